//! Decoy-state bounds on the single-photon yield, the single-photon
//! detection count and the single-photon error rates.

use crate::bounds::{chernoff_observed, joint_lower, joint_upper, Direction, FailureSplit};
use crate::channel::Level;
use crate::error::{AbortReason, Error, Result};
use crate::stats::{ClassMap, ExpectedCounts, IntensityClass};

const MU: Level = Level::Signal;
const NU: Level = Level::Decoy;
const O: Level = Level::Vacuum;

fn class(a: Level, b: Level) -> IntensityClass {
    IntensityClass::new(a, b)
}

/// `e^{−λ} λ^n / n!`.
pub fn poisson(lambda: f64, n: u32) -> f64 {
    let mut v = (-lambda).exp();
    for k in 1..=n {
        v *= lambda / f64::from(k);
    }
    v
}

fn row(lambda: f64) -> [f64; 3] {
    [poisson(lambda, 0), poisson(lambda, 1), poisson(lambda, 2)]
}

/// Photon-number probabilities `n ∈ {0, 1, 2}` of the decoy (`a`, `b`) and
/// signal (`a'`, `b'`) intensities of a single Z-basis pulse, and of the
/// X-basis pair of two decoy pulses (`x_a`, `x_b`, mean `2ν`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonCoeffs {
    pub a: [f64; 3],
    pub a_prime: [f64; 3],
    pub b: [f64; 3],
    pub b_prime: [f64; 3],
    pub x_a: [f64; 3],
    pub x_b: [f64; 3],
}

impl PoissonCoeffs {
    /// `b̃₁₂ = b₁b₂' − b₁'b₂`.
    pub fn b_tilde_12(&self) -> f64 {
        self.b[1] * self.b_prime[2] - self.b_prime[1] * self.b[2]
    }

    /// The same coefficients with Alice and Bob exchanged.
    pub fn mirrored(&self) -> Self {
        PoissonCoeffs {
            a: self.b,
            a_prime: self.b_prime,
            b: self.a,
            b_prime: self.a_prime,
            x_a: self.x_b,
            x_b: self.x_a,
        }
    }

    /// `k e^{−k}` of a signal-class side, for the levels of one party.
    fn single_photon(row_nu: &[f64; 3], row_mu: &[f64; 3], level: Level) -> f64 {
        match level {
            Level::Signal => row_mu[1],
            Level::Decoy => row_nu[1],
            Level::Vacuum => 0.0,
        }
    }
}

pub fn poisson_coeffs(mu_a: f64, nu_a: f64, mu_b: f64, nu_b: f64) -> PoissonCoeffs {
    PoissonCoeffs {
        a: row(nu_a),
        a_prime: row(mu_a),
        b: row(nu_b),
        b_prime: row(mu_b),
        x_a: row(2.0 * nu_a),
        x_b: row(2.0 * nu_b),
    }
}

/// Total failure probabilities of the estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FailureLedger {
    /// Single-photon detection count.
    pub eps_1: f64,
    /// Phase error rate (original variant).
    pub eps_e: f64,
    /// Z-basis single-photon bit error rate (six-state).
    pub eps_e_prime: f64,
    /// X+Y single-photon error sum (six-state).
    pub eps_e_double_prime: f64,
}

pub fn failure_ledger(split: &FailureSplit) -> FailureLedger {
    let eps_1 = split.yield_components().map(|(_, v)| v).sum();
    let eps_e: f64 = split.error_components().map(|(_, v)| v).sum();
    FailureLedger { eps_1, eps_e, eps_e_prime: eps_e, eps_e_double_prime: eps_e }
}

/// Bounds on the single-photon component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinglePhotonEstimates {
    pub y_z1_lower: f64,
    pub n_z1_lower: f64,
    /// Original variant only.
    pub e_ph_upper: Option<f64>,
    /// Six-state variant only.
    pub e_bit_z_upper: Option<f64>,
    /// Six-state variant only.
    pub e_xy_sum_upper: Option<f64>,
    pub ledger: FailureLedger,
}

/// Lower bound on the expected single-photon yield `⟨y_Z1⟩`.
pub fn yield_lower(counts: &ExpectedCounts, coeffs: &PoissonCoeffs, split: &FailureSplit) -> Result<f64> {
    let c = coeffs;
    let first = c.a_prime[1] * c.b_prime[2] * c.a[2] * c.b[1] <= c.a_prime[2] * c.b_prime[1] * c.a[1] * c.b[2];
    let exchanged = |k: &PoissonCoeffs| PoissonCoeffs {
        a: [k.a[0], k.b[1], k.b[2]],
        a_prime: [k.a_prime[0], k.b_prime[1], k.b_prime[2]],
        b: [k.b[0], k.a[1], k.a[2]],
        b_prime: [k.b_prime[0], k.a_prime[1], k.a_prime[2]],
        ..*k
    };
    let (primary, fallback) = if first { (*c, exchanged(c)) } else { (exchanged(c), *c) };
    let k = if primary.b_tilde_12() != 0.0 {
        primary
    } else if fallback.b_tilde_12() != 0.0 {
        fallback
    } else {
        return Err(Error::DegenerateDecoy);
    };

    let (n, s) = (&counts.n_z, &counts.slot_z);
    let ratio = |num: f64, cls: IntensityClass| if num == 0.0 { 0.0 } else { num / s[cls] };
    let xis = split.joint();
    let lead = k.a_prime[1] * k.b_prime[2];
    let sub = k.a[1] * k.b[2];
    let y_plus = joint_lower(
        [
            ratio(lead, class(NU, NU)),
            ratio(sub * k.a_prime[0], class(O, MU)),
            ratio(sub * k.b_prime[0], class(MU, O)),
            ratio(lead * k.a[0] * k.b[0] - sub * k.a_prime[0] * k.b_prime[0], class(O, O)),
        ],
        [n[class(NU, NU)], n[class(O, MU)], n[class(MU, O)], n[class(O, O)]],
        xis,
    )?;
    let y_minus = joint_upper(
        [ratio(sub, class(MU, MU)), ratio(lead * k.a[0], class(O, NU)), ratio(lead * k.b[0], class(NU, O)), 0.0],
        [n[class(MU, MU)], n[class(O, NU)], n[class(NU, O)], 0.0],
        xis,
    )?;
    let y = (y_plus - y_minus) / (k.a[1] * k.a_prime[1] * k.b_tilde_12());
    Ok(y.max(0.0))
}

/// Lower bound on the number of single-photon detections in the raw key.
pub fn n_z1_lower(counts: &ExpectedCounts, coeffs: &PoissonCoeffs, y_lower: f64, split: &FailureSplit) -> Result<f64> {
    if y_lower <= 0.0 {
        return Ok(0.0);
    }
    let expected: f64 = IntensityClass::signal()
        .map(|k| {
            counts.slot_z[k]
                * PoissonCoeffs::single_photon(&coeffs.a, &coeffs.a_prime, k.a)
                * PoissonCoeffs::single_photon(&coeffs.b, &coeffs.b_prime, k.b)
                * y_lower
        })
        .sum();
    chernoff_observed(expected, split.xi, Direction::Lower)
}

/// Upper bound on the expected single-photon error rate from error counts
/// `m` with slots `slots` in the classes `(k,k)`, `(0,0)`, `(0,k)`, `(k,0)`
/// of `level`, using photon-number rows `ra`, `rb`.
fn error_rate_upper(
    m: &ClassMap,
    slots: &ClassMap,
    level: Level,
    ra: &[f64; 3],
    rb: &[f64; 3],
    y_lower: f64,
    split: &FailureSplit,
) -> Result<f64> {
    if y_lower <= 0.0 {
        return Err(Error::Abort(AbortReason::YieldVanishes));
    }
    let xis = split.joint();
    let (kk, oo, ok, ko) = (class(level, level), class(O, O), class(O, level), class(level, O));
    let t_plus = joint_upper([1.0 / slots[kk], ra[0] * rb[0] / slots[oo], 0.0, 0.0], [m[kk], m[oo], 0.0, 0.0], xis)?;
    let t_minus = joint_lower([ra[0] / slots[ok], rb[0] / slots[ko], 0.0, 0.0], [m[ok], m[ko], 0.0, 0.0], xis)?;
    Ok(((t_plus - t_minus) / (ra[1] * rb[1] * y_lower)).max(0.0))
}

/// Upper bound on the expected single-photon X-basis bit error rate.
/// Aborts when the bound exceeds one half.
pub fn x_bit_error_upper(
    counts: &ExpectedCounts,
    coeffs: &PoissonCoeffs,
    y_lower: f64,
    split: &FailureSplit,
) -> Result<f64> {
    let e = error_rate_upper(&counts.m_x, &counts.slot_x, NU, &coeffs.x_a, &coeffs.x_b, y_lower, split)?;
    if e > 0.5 {
        return Err(Error::Abort(AbortReason::PhaseErrorTooHigh));
    }
    Ok(e)
}

/// `O^U(n e, ξ) / n`: lifts a bound on an expected error rate to a bound on
/// the realised rate among `n` events.
fn lift(n: f64, e_mean: f64, split: &FailureSplit) -> Result<f64> {
    if n <= 0.0 {
        return Err(Error::Abort(AbortReason::NoSinglePhotonEvents));
    }
    Ok(chernoff_observed(n * e_mean, split.xi, Direction::Upper)? / n)
}

/// Upper bound on the single-photon phase error rate of the raw key.
pub fn e_ph_upper(n_z1_lower: f64, e_mean_upper: f64, split: &FailureSplit) -> Result<f64> {
    let e = lift(n_z1_lower, e_mean_upper, split)?;
    if e > 0.5 {
        return Err(Error::Abort(AbortReason::PhaseErrorTooHigh));
    }
    Ok(e)
}

/// Six-state bounds `(e_Z1^bit, (e_X1^bit + e_Y1^bit))` on the realised
/// single-photon error rates.
pub fn sixstate_error_uppers(
    counts: &ExpectedCounts,
    coeffs: &PoissonCoeffs,
    y_lower: f64,
    n_z1_lower: f64,
    split: &FailureSplit,
) -> Result<(f64, f64)> {
    let six = counts.six_state.as_ref().ok_or(Error::WrongVariant("six-state"))?;
    let bit_mean = error_rate_upper(&counts.m_z, &counts.slot_z, NU, &coeffs.a, &coeffs.b, y_lower, split)?;
    let xy_errors = ClassMap::from_fn(|k| six.m_x_bar[k] + six.m_y_bar[k]);
    let sum_mean = error_rate_upper(&xy_errors, &six.slot_x_bar, NU, &coeffs.x_a, &coeffs.x_b, y_lower, split)?;
    let e_bit = lift(n_z1_lower, bit_mean, split)?;
    let e_sum = lift(n_z1_lower, sum_mean, split)?;
    if e_bit > 0.5 {
        return Err(Error::Abort(AbortReason::BitErrorTooHigh));
    }
    if e_sum > 2.0 {
        return Err(Error::Abort(AbortReason::ErrorSumTooHigh));
    }
    Ok((e_bit, e_sum))
}

/// Runs the full estimation for whichever variant `counts` carries: the
/// six-state bounds when the X statistics have been split, the phase error
/// bound otherwise.
pub fn estimate(
    counts: &ExpectedCounts,
    coeffs: &PoissonCoeffs,
    split: &FailureSplit,
) -> Result<SinglePhotonEstimates> {
    let y = yield_lower(counts, coeffs, split)?;
    if y <= 0.0 {
        return Err(Error::Abort(AbortReason::YieldVanishes));
    }
    let n1 = n_z1_lower(counts, coeffs, y, split)?;
    if n1 <= 0.0 {
        return Err(Error::Abort(AbortReason::NoSinglePhotonEvents));
    }
    let mut est = SinglePhotonEstimates {
        y_z1_lower: y,
        n_z1_lower: n1,
        e_ph_upper: None,
        e_bit_z_upper: None,
        e_xy_sum_upper: None,
        ledger: failure_ledger(split),
    };
    if counts.six_state.is_some() {
        let (b, s) = sixstate_error_uppers(counts, coeffs, y, n1, split)?;
        est.e_bit_z_upper = Some(b);
        est.e_xy_sum_upper = Some(s);
    } else {
        let e = x_bit_error_upper(counts, coeffs, y, split)?;
        est.e_ph_upper = Some(e_ph_upper(n1, e, split)?);
    }
    Ok(est)
}
