//! Warm-started parameter optimization along a distance sweep.

use mpqkd::channel::plob_bound;
use mpqkd::config::RunConfig;
use mpqkd::optimize::{warm_start_sweep, OptimizationBox};
use mpqkd::Variant;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = RunConfig::with_counts(1e13, 1_000_000);
    let base = cfg.protocol(0.0)?;
    let security = cfg.security()?;
    let distances: Vec<f64> = (0..=9).map(|k| 50.0 * f64::from(k)).collect();
    let rows = warm_start_sweep(&distances, &base, &security, &OptimizationBox::new(Variant::Original))?;
    println!("distance_km,key_rate,plob,mu,nu,p_mu,p_nu,delta");
    for r in rows {
        let eta = base.channel.at_distance(r.distance_km).channel_transmittance();
        let plob = plob_bound(eta).unwrap_or(f64::INFINITY);
        let p = r.params;
        println!(
            "{},{:.4e},{:.4e},{:.3},{:.4},{:.3},{:.3},{:.4}",
            r.distance_km, r.rate, plob, p.mu, p.nu, p.p_mu, p.p_nu, p.delta
        );
    }
    Ok(())
}
