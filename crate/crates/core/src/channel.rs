//! Physical-layer model: fiber and detector efficiency, exclusive-click
//! probabilities at Charlie's beam splitter, the pairing rate of the
//! greedy pairing strategy and the repeaterless (PLOB) reference bound.

use std::fmt;

use crate::error::{Error, Result};

/// Detector and fiber parameters for one Alice–Charlie–Bob link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    /// Dark-count probability per pulse, per detector.
    pub dark_count_prob: f64,
    pub detector_eff: f64,
    pub fiber_loss_db_per_km: f64,
    pub dist_a_km: f64,
    pub dist_b_km: f64,
}

impl ChannelParams {
    /// The fixed experimental parameters used throughout the simulations
    /// (`p_d = 1e-8`, `η_d = 0.7`, `α = 0.2 dB/km`), with Charlie in the
    /// middle of a link of `total_km`.
    pub fn reference(total_km: f64) -> Self {
        ChannelParams {
            dark_count_prob: 1e-8,
            detector_eff: 0.7,
            fiber_loss_db_per_km: 0.2,
            dist_a_km: total_km / 2.0,
            dist_b_km: total_km / 2.0,
        }
    }

    /// Same parameters with Charlie moved to the middle of `total_km`.
    pub fn at_distance(mut self, total_km: f64) -> Self {
        self.dist_a_km = total_km / 2.0;
        self.dist_b_km = total_km / 2.0;
        self
    }

    pub fn total_km(&self) -> f64 {
        self.dist_a_km + self.dist_b_km
    }

    pub fn eta_a(&self) -> f64 {
        overall_efficiency(self.dist_a_km, self)
    }

    pub fn eta_b(&self) -> f64 {
        overall_efficiency(self.dist_b_km, self)
    }

    /// Fiber transmittance between Alice and Bob, excluding the detectors.
    pub fn channel_transmittance(&self) -> f64 {
        10f64.powf(-self.fiber_loss_db_per_km * self.total_km() / 10.0)
    }

    pub fn validate(&self) -> Result<()> {
        check_prob("dark_count_prob", self.dark_count_prob)?;
        check_prob("detector_eff", self.detector_eff)?;
        check_nonneg("fiber_loss_db_per_km", self.fiber_loss_db_per_km)?;
        check_nonneg("dist_a_km", self.dist_a_km)?;
        check_nonneg("dist_b_km", self.dist_b_km)?;
        Ok(())
    }
}

/// One of the three intensity settings a sender may choose per round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Level {
    Vacuum,
    Decoy,
    Signal,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Signal, Level::Decoy, Level::Vacuum];

    pub(crate) fn index(self) -> usize {
        match self {
            Level::Signal => 0,
            Level::Decoy => 1,
            Level::Vacuum => 2,
        }
    }

    pub fn is_vacuum(self) -> bool {
        self == Level::Vacuum
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::Signal => "mu",
            Level::Decoy => "nu",
            Level::Vacuum => "0",
        })
    }
}

/// Three-intensity decoy setting `{μ, ν, 0}` for one sender.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntensityProfile {
    pub mu: f64,
    pub nu: f64,
    pub prob_mu: f64,
    pub prob_nu: f64,
    pub prob_o: f64,
}

impl IntensityProfile {
    /// Builds a profile with `prob_o = 1 - prob_mu - prob_nu`.
    pub fn new(mu: f64, nu: f64, prob_mu: f64, prob_nu: f64) -> Result<Self> {
        let profile = IntensityProfile { mu, nu, prob_mu, prob_nu, prob_o: 1.0 - prob_mu - prob_nu };
        profile.validate()?;
        Ok(profile)
    }

    pub fn intensity(&self, level: Level) -> f64 {
        match level {
            Level::Signal => self.mu,
            Level::Decoy => self.nu,
            Level::Vacuum => 0.0,
        }
    }

    pub fn prob(&self, level: Level) -> f64 {
        match level {
            Level::Signal => self.prob_mu,
            Level::Decoy => self.prob_nu,
            Level::Vacuum => self.prob_o,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0) {
            return Err(Error::invalid("nu", "must be positive"));
        }
        if !(self.mu > self.nu) || !self.mu.is_finite() {
            return Err(Error::invalid("mu", "must exceed nu"));
        }
        check_prob("prob_mu", self.prob_mu)?;
        check_prob("prob_nu", self.prob_nu)?;
        check_prob("prob_o", self.prob_o)?;
        let total = self.prob_mu + self.prob_nu + self.prob_o;
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("prob_o", format!("probabilities sum to {total}, not 1")));
        }
        Ok(())
    }
}

/// Misalignment error applied to Z-pairs and X (or XY) pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MisalignmentParams {
    pub e_d_z: f64,
    pub e_d_x: f64,
}

impl MisalignmentParams {
    pub fn reference() -> Self {
        MisalignmentParams { e_d_z: 0.005, e_d_x: 0.05 }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("e_d_z", self.e_d_z), ("e_d_x", self.e_d_x)] {
            if !(0.0..=0.5).contains(&v) {
                return Err(Error::invalid(name, "must lie in [0, 0.5]"));
            }
        }
        Ok(())
    }
}

fn check_prob(name: &'static str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("{v} is not a probability")))
    }
}

fn check_nonneg(name: &'static str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("{v} must be finite and non-negative")))
    }
}

/// `η = η_d · 10^(−α L / 10)`.
pub fn overall_efficiency(dist_km: f64, params: &ChannelParams) -> f64 {
    params.detector_eff * 10f64.powf(-params.fiber_loss_db_per_km * dist_km / 10.0)
}

/// The `(y, ω)` shorthand of a single round: `y = (1 − p_d) e^{−(k_a η_a + k_b η_b)/2}`,
/// `ω = sqrt(k_a η_a k_b η_b)`. Also returns `1 − y` computed without cancellation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct RoundShorthand {
    pub y: f64,
    pub one_minus_y: f64,
    pub omega: f64,
}

impl RoundShorthand {
    pub(crate) fn new(k_a: f64, k_b: f64, eta_a: f64, eta_b: f64, p_d: f64) -> Self {
        let s = k_a * eta_a + k_b * eta_b;
        let log_y = (-p_d).ln_1p() - 0.5 * s;
        RoundShorthand { y: log_y.exp(), one_minus_y: -log_y.exp_m1(), omega: (k_a * eta_a * k_b * eta_b).sqrt() }
    }

    /// `Pr(C = 1) = 2y[I0(ω) − y]`.
    pub(crate) fn click_prob(&self) -> f64 {
        2.0 * self.y * (bessel_i0_minus_one(self.omega) + self.one_minus_y)
    }
}

/// Probabilities that only detector L (resp. only R) clicks for relative
/// phase `theta = θ_a − θ_b`.
pub fn click_probs_given_phase(k_a: f64, k_b: f64, theta: f64, eta_a: f64, eta_b: f64, p_d: f64) -> (f64, f64) {
    let r = RoundShorthand::new(k_a, k_b, eta_a, eta_b, p_d);
    let c = r.omega * theta.cos();
    let q_l = r.y * (c.exp_m1() + r.one_minus_y);
    let q_r = r.y * ((-c).exp_m1() + r.one_minus_y);
    (q_l.max(0.0), q_r.max(0.0))
}

/// Phase-averaged probability of an effective (single-detector) click.
pub fn prob_click(k_a: f64, k_b: f64, eta_a: f64, eta_b: f64, p_d: f64) -> f64 {
    RoundShorthand::new(k_a, k_b, eta_a, eta_b, p_d).click_prob()
}

/// Zero-order modified Bessel function of the first kind, `x ≥ 0`.
pub fn bessel_i0(x: f64) -> f64 {
    1.0 + bessel_i0_minus_one(x)
}

/// `I0(x) − 1` by the power series `Σ_{k≥1} (x/2)^{2k} / (k!)²`, stopped once
/// the term ratio drops below 1e-16.
pub(crate) fn bessel_i0_minus_one(x: f64) -> f64 {
    let q = 0.25 * x * x;
    if q == 0.0 {
        return 0.0;
    }
    let mut term = q;
    let mut sum = q;
    let mut k = 1.0;
    loop {
        k += 1.0;
        term *= q / (k * k);
        sum += term;
        if term <= 1e-16 * sum {
            return sum;
        }
    }
}

/// Expected number of pairs formed per round by the greedy pairing strategy
/// with per-round click probability `p` and maximal interval `l`:
/// `r_p = [1/(p(1 − (1 − p)^l)) + 1/p]^{-1}`.
pub fn pairing_rate(p: f64, l: u64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::NoClicks);
    }
    if p > 1.0 {
        return Err(Error::invalid("p", "click probability exceeds one"));
    }
    if l == 0 {
        return Err(Error::invalid("l", "maximal pairing interval must be at least 1"));
    }
    let within = -((l as f64) * (-p).ln_1p()).exp_m1();
    Ok(p * within / (1.0 + within))
}

/// Repeaterless secret-key capacity `−log2(1 − η)`.
pub fn plob_bound(eta: f64) -> Result<f64> {
    if eta >= 1.0 {
        return Err(Error::InfiniteCapacity);
    }
    if !(eta >= 0.0) {
        return Err(Error::invalid("eta", "transmittance must be non-negative"));
    }
    Ok(-(-eta).ln_1p() / std::f64::consts::LN_2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, Tolerance};
    use proptest::prelude::*;
    use std::f64::consts::{PI, TAU};

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn efficiency_examples() {
        let params = ChannelParams::reference(0.0);
        assert!(rel(overall_efficiency(50.0, &params), 0.07) < 1e-12);
        assert!(rel(overall_efficiency(0.0, &params), 0.7) < 1e-15);
        assert!(rel(overall_efficiency(100.0, &params), 0.007) < 1e-12);
    }

    #[test]
    fn vacuum_clicks() {
        assert_eq!(click_probs_given_phase(0.0, 0.0, 1.3, 0.5, 0.5, 0.0), (0.0, 0.0));
        let pd = 1e-3;
        let (l, r) = click_probs_given_phase(0.0, 0.0, 0.4, 0.5, 0.5, pd);
        assert!(rel(l, pd * (1.0 - pd)) < 1e-12);
        assert!(rel(r, pd * (1.0 - pd)) < 1e-12);
        assert_eq!(prob_click(0.0, 0.0, 0.5, 0.5, 0.0), 0.0);
        assert!(rel(prob_click(0.0, 0.0, 0.5, 0.5, pd), 2.0 * (1.0 - pd) * pd) < 1e-12);
    }

    #[test]
    fn click_at_zero_phase_matches_direct_formula() {
        // k_a η_a = k_b η_b = 0.01, so ω = 0.01 and y = e^{-0.01}.
        let (l, _) = click_probs_given_phase(0.02, 0.02, 0.0, 0.5, 0.5, 0.0);
        // y (e^ω − y) = e^{-0.01}(e^{0.01} − e^{-0.01}) = 1 − e^{-0.02}
        let expected = 0.019_801_326_693_244_71;
        assert!(rel(l, expected) < 1e-13, "{l}");
    }

    #[test]
    fn bessel_values() {
        assert_eq!(bessel_i0(0.0), 1.0);
        // Power-series oracle Σ (x/2)^{2k}/(k!)², summed independently.
        let oracle = |x: f64| {
            let mut s = 0.0;
            let mut fact = 1.0;
            for k in 0..40 {
                if k > 0 {
                    fact *= k as f64;
                }
                s += (x / 2.0).powi(2 * k) / (fact * fact);
            }
            s
        };
        for x in [0.1, 0.5, 1.0, 2.0, 5.0] {
            assert!(rel(bessel_i0(x), oracle(x)) < 1e-14, "x = {x}");
        }
        assert!(rel(bessel_i0(1.0), 1.266_065_877_752_008_4) < 1e-15);
        assert!((bessel_i0(0.1) - (1.0 + 0.01 / 4.0)).abs() < 1e-5);
    }

    #[test]
    fn click_probability_matches_phase_quadrature() {
        let (ka, kb, ea, eb, pd) = (0.1, 0.1, 0.5, 0.5, 1e-8);
        let tol = Tolerance { abs: 0.0, rel: 1e-13, max_intervals: 500 };
        let avg = integrate(
            |t| {
                let (l, r) = click_probs_given_phase(ka, kb, t, ea, eb, pd);
                l + r
            },
            0.0,
            TAU,
            tol,
        )
        .unwrap()
            / TAU;
        let direct = prob_click(ka, kb, ea, eb, pd);
        assert!(rel(direct, avg) < 1e-9, "{direct} vs {avg}");
    }

    #[test]
    fn pairing_rate_examples() {
        assert!(rel(pairing_rate(1.0, 1).unwrap(), 0.5) < 1e-15);
        let r = pairing_rate(0.01, 100).unwrap();
        assert!((r - 3.880e-3).abs() < 5e-7, "{r}");
        assert!(rel(pairing_rate(0.3, 10_000).unwrap(), 0.15) < 1e-12);
        assert_eq!(pairing_rate(0.0, 10), Err(Error::NoClicks));
    }

    #[test]
    fn plob_examples() {
        assert_eq!(plob_bound(0.5).unwrap(), 1.0);
        assert_eq!(plob_bound(0.0).unwrap(), 0.0);
        // -log2(0.99) = 0.014499569695115...
        assert!(rel(plob_bound(0.01).unwrap(), 0.014_499_569_695_115_09) < 1e-12);
        assert_eq!(plob_bound(1.0), Err(Error::InfiniteCapacity));
    }

    #[test]
    fn validation_rejects_bad_profiles() {
        assert!(IntensityProfile::new(0.1, 0.2, 0.3, 0.3).is_err());
        assert!(IntensityProfile::new(0.4, 0.0, 0.3, 0.3).is_err());
        assert!(IntensityProfile::new(0.4, 0.1, 0.7, 0.4).is_err());
        assert!(IntensityProfile::new(0.4, 0.1, 0.3, 0.3).is_ok());
        let mut ch = ChannelParams::reference(10.0);
        ch.detector_eff = 1.2;
        assert!(ch.validate().is_err());
        assert!(MisalignmentParams { e_d_z: 0.6, e_d_x: 0.0 }.validate().is_err());
    }

    proptest! {
        #[test]
        fn shifted_phase_swaps_detectors(
            ka in 0.0..1.0f64, kb in 0.0..1.0f64, theta in 0.0..PI,
            ea in 1e-6..1.0f64, eb in 1e-6..1.0f64, pd in 0.0..1e-3f64,
        ) {
            let (l0, r0) = click_probs_given_phase(ka, kb, theta, ea, eb, pd);
            let (l1, r1) = click_probs_given_phase(ka, kb, theta + PI, ea, eb, pd);
            prop_assert!((l0 - r1).abs() <= 1e-15 + 1e-12 * l0);
            prop_assert!((r0 - l1).abs() <= 1e-15 + 1e-12 * r0);
            prop_assert!(l0 >= 0.0 && r0 >= 0.0 && l0 + r0 <= 1.0);
        }

        #[test]
        fn pairing_rate_bounded_and_monotone(p in 1e-6..1.0f64, l in 1u64..100_000) {
            let r = pairing_rate(p, l).unwrap();
            prop_assert!(r > 0.0 && r <= p / 2.0 * (1.0 + 1e-12));
            prop_assert!(pairing_rate(p, l + 1).unwrap() >= r);
        }

        #[test]
        fn loss_composes_in_db(l1 in 0.0..300.0f64, l2 in 0.0..300.0f64) {
            let params = ChannelParams::reference(0.0);
            let lhs = overall_efficiency(l1 + l2, &params) * params.detector_eff;
            let rhs = overall_efficiency(l1, &params) * overall_efficiency(l2, &params);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs);
        }
    }
}
