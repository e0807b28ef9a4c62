// Real websocket server on a free port with the leader and follower bots
// connected over loopback. Prints the final snapshot.

use std::thread;

use decoupled_hands::harness::{run_live_bot, BotSpec};
use decoupled_hands::server::{Server, ServerConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures");
    let mut config = ServerConfig::new("127.0.0.1:0".parse()?, format!("{fixtures}/scenes/terrain_demo.json"));
    config.log_events = true;

    let rt = tokio::runtime::Runtime::new()?;
    let server = rt.block_on(Server::bind(config))?;
    let addr = server.local_addr().to_string();
    let stop = server.shutdown_handle();
    let running = rt.spawn(server.run());

    let bots: Vec<_> = ["leader", "follower"]
        .into_iter()
        .enumerate()
        .map(|(i, name)| {
            let spec = BotSpec::from_json(&std::fs::read_to_string(format!("{fixtures}/bots/{name}.json")).unwrap()).unwrap();
            let addr = addr.clone();
            thread::spawn(move || run_live_bot(&addr, spec, i as u64, Some(15.0)))
        })
        .collect();
    for b in bots {
        let report = b.join().expect("bot thread")?;
        eprintln!("bot {:?} ended at {:.1}° after {} frames", report.user_id, report.final_rho.to_degrees(), report.received);
    }

    stop.trigger();
    let report = rt.block_on(running)??;
    eprintln!("{}", report.final_snapshot.to_json());
    Ok(())
}
