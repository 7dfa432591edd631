//! Expected counts per intensity class and the single-photon bounds drawn
//! from them, for both variants.

use mpqkd::config::RunConfig;
use mpqkd::decoy::{estimate, poisson_coeffs};
use mpqkd::{expected_counts, IntensityClass, Variant};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for variant in [Variant::Original, Variant::SixState] {
        let mut cfg = RunConfig::with_counts(1e13, 1_000_000);
        cfg.variant = variant;
        let protocol = cfg.protocol(200.0)?;
        let counts = expected_counts(&protocol)?;
        println!("{} at 200 km", variant.name());
        for class in IntensityClass::all() {
            println!(
                "  {class}: n_z {:.4e} m_z {:.4e} n_x {:.4e} m_x {:.4e}",
                counts.n_z[class], counts.m_z[class], counts.n_x[class], counts.m_x[class]
            );
        }
        let (a, b) = (protocol.intensities_a, protocol.intensities_b);
        let coeffs = poisson_coeffs(a.mu, a.nu, b.mu, b.nu);
        let est = estimate(&counts, &coeffs, &cfg.security()?.split())?;
        println!("  {est:#?}");
    }
    Ok(())
}
