//! Secret key length and rate, and the split of the total security
//! parameter into the per-estimate failure probability.

use crate::bounds::FailureSplit;
use crate::decoy::{estimate, failure_ledger, poisson_coeffs, SinglePhotonEstimates};
use crate::error::{AbortReason, Error, Result};
use crate::stats::{expected_counts, ProtocolConfig, Variant};

/// Composable security parameters. `eps_cor`, `eps_hat` and `eps_pa` are
/// all set to `xi`, which also bounds every individual estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecurityBudget {
    pub eps_tol: f64,
    pub eps_cor: f64,
    pub eps_hat: f64,
    pub eps_pa: f64,
    pub xi: f64,
    pub eps_bar: f64,
    pub eps_sec: f64,
    pub variant: Variant,
}

impl SecurityBudget {
    /// Budget obtained from a common failure probability `xi`.
    pub fn from_xi(xi: f64, variant: Variant) -> Result<Self> {
        let split = FailureSplit::new(xi)?;
        let ledger = failure_ledger(&split);
        let (eps_bar, eps_sec) = match variant {
            Variant::Original => {
                let bar = (ledger.eps_e + ledger.eps_1).sqrt();
                (bar, 2.0 * (xi + 2.0 * bar) + xi)
            }
            Variant::SixState => {
                // 1 − (1 − a)(1 − b) without cancellation.
                let (a, b) = (ledger.eps_1 + ledger.eps_e_prime, ledger.eps_1 + ledger.eps_e_double_prime);
                let bar = (a + b - a * b).sqrt();
                (bar, 2.0 * xi + 4.0 * bar + xi)
            }
        };
        Ok(SecurityBudget {
            eps_tol: xi + eps_sec,
            eps_cor: xi,
            eps_hat: xi,
            eps_pa: xi,
            xi,
            eps_bar,
            eps_sec,
            variant,
        })
    }

    pub fn split(&self) -> FailureSplit {
        FailureSplit { xi: self.xi }
    }

    /// `log2(2/ε_cor) + 2 log2(1/(√2 ε̂ ε_PA))`.
    pub fn finite_size_cost(&self) -> f64 {
        (2.0 / self.eps_cor).log2() + 2.0 * (1.0 / (std::f64::consts::SQRT_2 * self.eps_hat * self.eps_pa)).log2()
    }
}

/// Finds the largest common `ξ` with `ε_cor + ε_sec = eps_tol`.
pub fn solve_xi(eps_tol: f64, variant: Variant) -> Result<SecurityBudget> {
    if !(eps_tol > 0.0 && eps_tol < 1.0) {
        return Err(Error::invalid("eps_tol", "must lie in (0, 1)"));
    }
    let total = |ln_xi: f64| SecurityBudget::from_xi(ln_xi.exp(), variant).map(|b| b.eps_tol);
    // The total is at least 4ξ, so the root lies below ln(ε_tol / 4).
    let mut lo = f64::MIN_POSITIVE.ln();
    let mut hi = (eps_tol / 4.0).ln();
    for _ in 0..2048 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if total(mid)? > eps_tol {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut budget = SecurityBudget::from_xi(lo.exp(), variant)?;
    budget.eps_tol = eps_tol;
    Ok(budget)
}

/// `h(x) = −x log2 x − (1 − x) log2(1 − x)`.
pub fn binary_entropy(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    -(x * x.ln() + (1.0 - x) * (-x).ln_1p()) / std::f64::consts::LN_2
}

/// Bits revealed by error correction, `f n_Z h(E_Z)`.
pub fn lambda_ec(n_z: f64, e_z: f64, f: f64) -> f64 {
    f * n_z * binary_entropy(e_z)
}

/// Key length of the original protocol. Negative values mean no key.
pub fn key_length_original(
    est: &SinglePhotonEstimates,
    n_z: f64,
    e_z: f64,
    f: f64,
    budget: &SecurityBudget,
) -> Result<f64> {
    let e_ph = est.e_ph_upper.ok_or(Error::WrongVariant("original"))?;
    if e_ph > 0.5 {
        return Err(Error::Abort(AbortReason::PhaseErrorTooHigh));
    }
    Ok(est.n_z1_lower * (1.0 - binary_entropy(e_ph)) - lambda_ec(n_z, e_z, f) - budget.finite_size_cost())
}

/// Key length of the six-state protocol. Negative values mean no key.
pub fn key_length_sixstate(
    est: &SinglePhotonEstimates,
    n_z: f64,
    e_z: f64,
    f: f64,
    budget: &SecurityBudget,
) -> Result<f64> {
    let (e_bit, e_sum) = est.e_bit_z_upper.zip(est.e_xy_sum_upper).ok_or(Error::WrongVariant("six-state"))?;
    if e_bit >= 1.0 {
        return Err(Error::Abort(AbortReason::BitErrorTooHigh));
    }
    let arg = (1.0 - 0.5 * (e_bit + e_sum)) / (1.0 - e_bit);
    if !(0.0..=1.0 + 1e-12).contains(&arg) {
        return Err(Error::Abort(AbortReason::EntropyArgumentOutOfRange));
    }
    // `arg` falls as the true X+Y error sum rises, and the sum is only known to
    // lie below `e_sum`. h is maximal at 1/2, so an argument below 1/2 must be
    // charged the worst case h(1/2) = 1 rather than credited by symmetry.
    let arg = arg.clamp(0.5, 1.0);
    Ok(est.n_z1_lower * (1.0 - e_bit) * (1.0 - binary_entropy(arg))
        - lambda_ec(n_z, e_z, f)
        - budget.finite_size_cost())
}

/// Outcome of one key-rate evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyRateResult {
    pub key_length: f64,
    /// `max(key_length, 0) / N`.
    pub key_rate: f64,
    pub n_z: f64,
    pub error_rate_z: f64,
    pub lambda_ec: f64,
    pub estimates: Option<SinglePhotonEstimates>,
    pub aborted: bool,
    pub abort_reason: Option<AbortReason>,
}

/// Simulates the observed statistics of `cfg` by their expected values and
/// runs the full estimation and key-length computation.
pub fn compute_rate(cfg: &ProtocolConfig, budget: &SecurityBudget) -> Result<KeyRateResult> {
    if budget.variant != cfg.variant {
        return Err(Error::WrongVariant(cfg.variant.name()));
    }
    let counts = expected_counts(cfg)?;
    let n_z = counts.raw_key_length();
    let e_z = counts.z_error_rate();
    let lambda = lambda_ec(n_z, e_z, cfg.ec_efficiency);
    let mut result = KeyRateResult {
        key_length: 0.0,
        key_rate: 0.0,
        n_z,
        error_rate_z: e_z,
        lambda_ec: lambda,
        estimates: None,
        aborted: false,
        abort_reason: None,
    };
    let (a, b) = (&cfg.intensities_a, &cfg.intensities_b);
    let coeffs = poisson_coeffs(a.mu, a.nu, b.mu, b.nu);
    let outcome = estimate(&counts, &coeffs, &budget.split()).and_then(|est| {
        let length = match cfg.variant {
            Variant::Original => key_length_original(&est, n_z, e_z, cfg.ec_efficiency, budget)?,
            Variant::SixState => key_length_sixstate(&est, n_z, e_z, cfg.ec_efficiency, budget)?,
        };
        Ok((est, length))
    });
    match outcome {
        Ok((est, length)) => {
            result.estimates = Some(est);
            result.key_length = length;
            result.key_rate = length.max(0.0) / cfg.total_rounds;
        }
        Err(Error::Abort(reason)) => {
            result.aborted = true;
            result.abort_reason = Some(reason);
        }
        Err(e) => return Err(e),
    }
    Ok(result)
}
