// Summarize a metrics log: alignment counts, gaze episodes, reference error
// and line-of-sight checks. Reads a file if given, else simulates one.

use decoupled_hands::harness::{analyze, run_scenario_file};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let log = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(path)?,
        None => {
            let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/metrics_3align_2gaze.json");
            run_scenario_file(path, None)?.log()
        }
    };
    let summary = analyze(&log)?;
    for (user, s) in &summary.users {
        println!(
            "{user}: {} alignments, {} pins, {} gaze episodes ({:.2} s)",
            s.alignments, s.pins_placed, s.gaze_episodes, s.gaze_seconds
        );
    }
    println!("{}", summary.to_json());
    Ok(())
}
