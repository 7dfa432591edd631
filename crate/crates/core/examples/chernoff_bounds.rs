//! Chernoff bounds in both directions and a joint bound on a weighted sum.

use mpqkd::bounds::{chernoff_expected, chernoff_observed, joint_lower, joint_upper, Direction};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for xi in [1e-3, 1e-10, 1e-30] {
        for c in [10.0, 1e4, 1e8] {
            println!(
                "xi {xi:.0e} count {c:.0e}: observed [{:.4e}, {:.4e}]  expected [{:.4e}, {:.4e}]",
                chernoff_observed(c, xi, Direction::Lower)?,
                chernoff_observed(c, xi, Direction::Upper)?,
                chernoff_expected(c, xi, Direction::Lower)?,
                chernoff_expected(c, xi, Direction::Upper)?,
            );
        }
    }
    let gammas = [0.2, 1.0, 0.5, 0.0];
    let observed = [1e4, 2e3, 5e5, 1e2];
    let xis = [1e-10; 4];
    let point: f64 = gammas.iter().zip(&observed).map(|(g, o)| g * o).sum();
    println!(
        "joint: {:.4e} <= {point:.4e} <= {:.4e}",
        joint_lower(gammas, observed, xis)?,
        joint_upper(gammas, observed, xis)?
    );
    Ok(())
}
