//! Chernoff bounds relating an expected count to its observed value, and
//! the analytic solution of the joint-constraint problem built on them.
//!
//! Each bound solves `c · φ(t) = ln ξ` for a monotone exponent `φ` with
//! `φ(0) = 0`, by bisection to floating-point resolution. The parameter `t`
//! is the `δ` of the defining equation except for the two bounds on the
//! expected value, which are solved in logarithmic coordinates so that the
//! bracket stays finite when the count is small.

use crate::error::{Error, Result};

/// Which side of the observed/expected relation to bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Lower,
    Upper,
}

/// The four Chernoff tails.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tail {
    /// `O^L = (1 − δ)E`, `E[−δ − (1 − δ)ln(1 − δ)] = ln ξ`.
    ObservedLower,
    /// `O^U = (1 + δ)E`, `E[δ − (1 + δ)ln(1 + δ)] = ln ξ`.
    ObservedUpper,
    /// `E^L = O/(1 + δ)`, `O[δ/(1 + δ) − ln(1 + δ)] = ln ξ`.
    ExpectedLower,
    /// `E^U = O/(1 − δ)`, `O[−δ/(1 − δ) − ln(1 − δ)] = ln ξ`.
    ExpectedUpper,
}

/// Failure probability assigned to every individual estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FailureSplit {
    pub xi: f64,
}

impl FailureSplit {
    pub fn new(xi: f64) -> Result<Self> {
        if !(xi > 0.0 && xi <= 1.0) {
            return Err(Error::invalid("xi", format!("{xi} is not in (0, 1]")));
        }
        Ok(FailureSplit { xi })
    }

    /// Components consumed by the single-photon detection bound.
    pub const YIELD_COMPONENTS: [&'static str; 8] =
        ["xi_y", "xi_y1", "xi_y2", "xi_y3", "xi_y4", "xi_y5", "xi_y6", "xi_y7"];
    /// Components consumed by each error-rate bound.
    pub const ERROR_COMPONENTS: [&'static str; 5] = ["xi_e", "xi_e1", "xi_e2", "xi_e3", "xi_e4"];

    /// Named components of the single-photon detection bound.
    pub fn yield_components(&self) -> impl Iterator<Item = (&'static str, f64)> + '_ {
        Self::YIELD_COMPONENTS.into_iter().map(|n| (n, self.xi))
    }

    /// Named components of one error-rate bound.
    pub fn error_components(&self) -> impl Iterator<Item = (&'static str, f64)> + '_ {
        Self::ERROR_COMPONENTS.into_iter().map(|n| (n, self.xi))
    }

    /// The same `ξ` for each of the four joint-constraint slots.
    pub fn joint(&self) -> [f64; 4] {
        [self.xi; 4]
    }
}

/// Sums `Σ_{k ≥ 2} sign^k x^k / d(k)` until terms stop mattering.
fn tail_series(x: f64, sign: f64, d: impl Fn(f64) -> f64) -> f64 {
    let mut pow = x * x;
    let mut k = 2.0;
    let mut sum = 0.0;
    let mut s = 1.0;
    loop {
        let term = s * pow / d(k);
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() {
            return sum;
        }
        pow *= x;
        s *= sign;
        k += 1.0;
    }
}

const SERIES_CUTOFF: f64 = 1e-2;

impl Tail {
    /// Exponent `φ(t)` of the defining equation, in the solver's coordinate.
    /// Decreasing from `φ(0) = 0`.
    pub fn exponent(self, t: f64) -> f64 {
        let small = t < SERIES_CUTOFF;
        match self {
            // −δ − (1 − δ)ln(1 − δ) = −Σ δ^k / (k(k−1))
            Tail::ObservedLower => {
                if small {
                    -tail_series(t, 1.0, |k| k * (k - 1.0))
                } else if t >= 1.0 {
                    -1.0
                } else {
                    -t - (1.0 - t) * (-t).ln_1p()
                }
            }
            // δ − (1 + δ)ln(1 + δ) = −Σ (−δ)^k / (k(k−1))
            Tail::ObservedUpper => {
                if small {
                    -tail_series(t, -1.0, |k| k * (k - 1.0))
                } else {
                    t - (1.0 + t) * t.ln_1p()
                }
            }
            // With u = ln(1 + δ): 1 − e^{−u} − u = −Σ (−u)^k / k!
            Tail::ExpectedLower => {
                if small {
                    -tail_series(t, -1.0, factorial)
                } else {
                    -(-t).exp_m1() - t
                }
            }
            // With v = −ln(1 − δ): 1 + v − e^v = −Σ v^k / k!
            Tail::ExpectedUpper => {
                if small {
                    -tail_series(t, 1.0, factorial)
                } else {
                    t - t.exp_m1()
                }
            }
        }
    }

    /// Bound value for solver coordinate `t` and input count `c`.
    pub fn value(self, c: f64, t: f64) -> f64 {
        match self {
            Tail::ObservedLower => (1.0 - t) * c,
            Tail::ObservedUpper => (1.0 + t) * c,
            Tail::ExpectedLower => c * (-t).exp(),
            Tail::ExpectedUpper => c * t.exp(),
        }
    }

    /// The `δ` of the defining equation for solver coordinate `t`.
    pub fn delta_from_coordinate(self, t: f64) -> f64 {
        match self {
            Tail::ObservedLower | Tail::ObservedUpper => t,
            Tail::ExpectedLower => t.exp_m1(),
            Tail::ExpectedUpper => -(-t).exp_m1(),
        }
    }
}

fn factorial(k: f64) -> f64 {
    (2..=k as u32).map(f64::from).product()
}

fn check_inputs(c: f64, xi: f64) -> Result<()> {
    if !(c >= 0.0) || !c.is_finite() {
        return Err(Error::invalid("count", format!("{c} must be finite and non-negative")));
    }
    if !(xi > 0.0 && xi <= 1.0) {
        return Err(Error::invalid("xi", format!("{xi} is not in (0, 1]")));
    }
    Ok(())
}

/// Bisects for the root of a decreasing `g` on `[lo, hi]` with `g(lo) ≥ 0 ≥ g(hi)`.
fn bisect(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..4096 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Solves the defining equation of `tail` in solver coordinates.
/// Returns `None` when the lower observed bound has no root, which happens
/// when `c < ln(1/ξ)`: the tail probability never falls below `ξ`.
pub fn solve_coordinate(tail: Tail, c: f64, xi: f64) -> Result<Option<f64>> {
    check_inputs(c, xi)?;
    if xi == 1.0 {
        return Ok(Some(0.0));
    }
    if c == 0.0 {
        return Ok(None);
    }
    let ln_xi = xi.ln();
    let g = |t: f64| c * tail.exponent(t) - ln_xi;
    let hi = match tail {
        Tail::ObservedLower => {
            if g(1.0) > 0.0 {
                return Ok(None);
            }
            1.0
        }
        Tail::ObservedUpper => {
            let mut hi = 1.0;
            while g(hi) > 0.0 {
                hi *= 2.0;
                if !hi.is_finite() {
                    return Err(Error::NoRoot { what: "observed upper bound" });
                }
            }
            hi
        }
        // φ(u) ≤ 1 − u, so the root lies below 1 + |ln ξ|/c.
        Tail::ExpectedLower => 1.0 + (-ln_xi) / c,
        // e^v − 1 − v ≥ X/2 at v = ln X for X ≥ 6.
        Tail::ExpectedUpper => (2.0 * (-ln_xi) / c).max(6.0).ln(),
    };
    Ok(Some(bisect(g, 0.0, hi)))
}

/// `δ` of the defining equation for `tail` at count `c` and failure `ξ`.
pub fn chernoff_delta(tail: Tail, c: f64, xi: f64) -> Result<Option<f64>> {
    Ok(solve_coordinate(tail, c, xi)?.map(|t| tail.delta_from_coordinate(t)))
}

/// Chernoff bound on the observed value of a sum with expected value `e`.
///
/// At `e = 0`, and for the lower bound whenever `e < ln(1/ξ)`, the bound is 0.
pub fn chernoff_observed(e: f64, xi: f64, direction: Direction) -> Result<f64> {
    let tail = match direction {
        Direction::Lower => Tail::ObservedLower,
        Direction::Upper => Tail::ObservedUpper,
    };
    Ok(match solve_coordinate(tail, e, xi)? {
        Some(t) => tail.value(e, t),
        None => 0.0,
    })
}

/// Chernoff bound on the expected value of a sum observed as `o`.
///
/// At `o = 0` the lower bound is 0 and the upper bound is `ln(1/ξ)`.
pub fn chernoff_expected(o: f64, xi: f64, direction: Direction) -> Result<f64> {
    let tail = match direction {
        Direction::Lower => Tail::ExpectedLower,
        Direction::Upper => Tail::ExpectedUpper,
    };
    Ok(match solve_coordinate(tail, o, xi)? {
        Some(t) => tail.value(o, t),
        None => match direction {
            Direction::Lower => 0.0,
            Direction::Upper => -xi.ln(),
        },
    })
}

fn joint(gammas: [f64; 4], observed: [f64; 4], xis: [f64; 4], direction: Direction) -> Result<f64> {
    for &g in &gammas {
        if !(g >= 0.0) {
            return Err(Error::NegativeCoefficient(g));
        }
    }
    let mut order = [0usize, 1, 2, 3];
    order.sort_by(|&i, &j| gammas[i].total_cmp(&gammas[j]));
    let mut total = 0.0;
    let mut prev = 0.0;
    for t in 0..4 {
        let g = gammas[order[t]];
        let step = g - prev;
        prev = g;
        if step == 0.0 {
            continue;
        }
        let partial: f64 = order[t..].iter().map(|&i| observed[i]).sum();
        let size = 4 - t;
        total += step * chernoff_expected(partial, xis[size - 1], direction)?;
    }
    Ok(total)
}

/// Lower bound on `Σ γ_k ⟨g_k⟩` given observations `g̃_k`, using the joint
/// constraints on every partial sum of the γ-sorted observations.
/// `xis[s − 1]` is the failure probability for a sum of `s` observations.
pub fn joint_lower(gammas: [f64; 4], observed: [f64; 4], xis: [f64; 4]) -> Result<f64> {
    joint(gammas, observed, xis, Direction::Lower)
}

/// Upper-bound counterpart of [`joint_lower`].
pub fn joint_upper(gammas: [f64; 4], observed: [f64; 4], xis: [f64; 4]) -> Result<f64> {
    joint(gammas, observed, xis, Direction::Upper)
}
