//! Key rate of the original protocol at fixed parameters over a few
//! distances, next to the repeaterless bound.

use mpqkd::channel::plob_bound;
use mpqkd::compute_rate;
use mpqkd::config::RunConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = RunConfig::with_counts(1e13, 1_000_000);
    let security = cfg.security()?;
    println!("xi = {:.3e}", security.xi);
    for d in [50.0, 100.0, 200.0, 300.0] {
        let protocol = cfg.protocol(d)?;
        let r = compute_rate(&protocol, &security)?;
        let plob = plob_bound(protocol.channel.channel_transmittance())?;
        println!(
            "{d:>5} km  rate {:.4e}  PLOB {:.4e}  E_Z {:.4}  aborted {}",
            r.key_rate, plob, r.error_rate_z, r.aborted
        );
    }
    Ok(())
}
