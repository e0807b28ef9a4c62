// Two scripted bots over a lossy simulated network; prints the metrics log.

use decoupled_hands::harness::{run_scenario_file, MetricsEvent};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/dyad_100deg.json");
    let seed = std::env::args().nth(1).map(|s| s.parse()).transpose()?;
    let out = run_scenario_file(path, seed)?;
    print!("{}", out.log());
    for e in &out.events {
        if let MetricsEvent::AlignCompleted { t, follower, rho } = e {
            eprintln!("{follower} settled at {:.1}° after t={t:.3} s", rho.to_degrees());
        }
    }
    eprintln!("seed {}, replica offset gap {:.1e} rad", out.seed, out.replica_rho_discrepancy);
    Ok(())
}
