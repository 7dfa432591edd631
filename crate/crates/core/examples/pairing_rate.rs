//! Analytic pairs per round of the greedy pairing strategy against a
//! simulation of the click stream.

use mpqkd::channel::pairing_rate;
use mpqkd::mc::simulate_pairing_rate;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for (p, l) in [(0.3, 10), (0.01, 100), (0.001, 1000), (1e-4, 1_000_000)] {
        let analytic = pairing_rate(p, l)?;
        let rounds = (1e8f64).max(1e6 / analytic) as u64;
        let simulated = simulate_pairing_rate(p, l, rounds, 42)?;
        println!(
            "p {p:<6} l {l:<8} analytic {analytic:.6e} simulated {simulated:.6e} rel {:.2e}",
            (simulated - analytic).abs() / analytic
        );
    }
    Ok(())
}
