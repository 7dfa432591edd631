//! Optimized six-state rate against the original protocol at long
//! distance. Each six-state search also starts from the original optimum.

use mpqkd::config::RunConfig;
use mpqkd::optimize::{warm_start_sweep, warm_start_sweep_with, OptimizationBox};
use mpqkd::Variant;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let distances: Vec<f64> = (0..=9).map(|k| 300.0 + 15.0 * f64::from(k)).collect();
    let mut cfg = RunConfig::with_counts(1e13, 1_000_000);
    let original =
        warm_start_sweep(&distances, &cfg.protocol(0.0)?, &cfg.security()?, &OptimizationBox::new(Variant::Original))?;
    cfg.variant = Variant::SixState;
    let six = warm_start_sweep_with(
        &distances,
        &cfg.protocol(0.0)?,
        &cfg.security()?,
        &OptimizationBox::new(Variant::SixState),
        |i| vec![original[i].params],
    )?;
    for (o, s) in original.iter().zip(&six) {
        let ratio = if o.rate > 0.0 { s.rate / o.rate } else { f64::NAN };
        println!("{:>5} km  original {:.4e}  six-state {:.4e}  ratio {ratio:.4}", o.distance_km, o.rate, s.rate);
    }
    Ok(())
}
