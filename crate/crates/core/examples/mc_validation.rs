//! Event-level simulation against the analytic counts at 25 km.

use mpqkd::config::RunConfig;
use mpqkd::mc::{run_protocol, validate};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = RunConfig::with_counts(1e7, 10_000).protocol(25.0)?;
    let run = run_protocol(&cfg, 1)?;
    println!("seed 1: {} rounds, {} clicks, {} pairs", run.rounds, run.clicks, run.pairs);

    let report = validate(&cfg, &[1, 2, 3, 4], None)?;
    for cell in report.cells.iter().filter(|c| c.seed == 1) {
        println!("{cell}");
    }
    println!(
        "{:.1}% of {} cells within {} sigma: {}",
        100.0 * report.fraction_within(),
        report.cells.len(),
        report.sigmas,
        if report.passed() { "pass" } else { "fail" }
    );
    Ok(())
}
