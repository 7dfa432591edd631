//! Analytic expected values of the observed quantities: effective-detection
//! and error counts per intensity class, and the slot counts used as their
//! normalisation by the decoy estimators.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Index, IndexMut};

use crate::channel::{
    bessel_i0, pairing_rate, ChannelParams, IntensityProfile, Level, MisalignmentParams, RoundShorthand,
};
use crate::error::{Error, Result};
use crate::quadrature::{integrate, Tolerance};

/// Protocol variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Original,
    SixState,
}

impl Variant {
    /// Upper end of the admissible phase post-selection window.
    pub fn max_delta(self) -> f64 {
        match self {
            Variant::Original => PI / 2.0,
            Variant::SixState => PI / 4.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Original => "original",
            Variant::SixState => "six-state",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "original" => Ok(Variant::Original),
            "six-state" | "sixstate" | "six_state" => Ok(Variant::SixState),
            _ => Err(Error::invalid("variant", format!("unknown variant `{s}`"))),
        }
    }
}

/// Everything that determines the expected statistics of one protocol run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolConfig {
    pub channel: ChannelParams,
    pub intensities_a: IntensityProfile,
    pub intensities_b: IntensityProfile,
    pub misalignment: MisalignmentParams,
    /// Number of rounds `N`.
    pub total_rounds: f64,
    /// Maximal pairing interval `l`.
    pub max_pair_interval: u64,
    /// Phase post-selection window `Δ`.
    pub delta: f64,
    pub variant: Variant,
    /// Error-correction efficiency `f`.
    pub ec_efficiency: f64,
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        self.intensities_a.validate()?;
        self.intensities_b.validate()?;
        self.misalignment.validate()?;
        if !(self.total_rounds >= 1.0) || !self.total_rounds.is_finite() {
            return Err(Error::invalid("N", "must be at least 1"));
        }
        if self.max_pair_interval == 0 {
            return Err(Error::invalid("l", "must be at least 1"));
        }
        if !(self.delta > 0.0 && self.delta < self.variant.max_delta()) {
            return Err(Error::invalid(
                "delta",
                format!("must lie in (0, {}) for the {} variant", self.variant.max_delta(), self.variant),
            ));
        }
        if !(self.ec_efficiency >= 1.0) {
            return Err(Error::invalid("f", "error-correction efficiency must be at least 1"));
        }
        Ok(())
    }

    /// The same configuration with Alice's and Bob's roles exchanged.
    pub fn mirrored(&self) -> Self {
        let mut m = *self;
        m.intensities_a = self.intensities_b;
        m.intensities_b = self.intensities_a;
        m.channel.dist_a_km = self.channel.dist_b_km;
        m.channel.dist_b_km = self.channel.dist_a_km;
        m
    }

    fn round(&self, ka: f64, kb: f64) -> RoundShorthand {
        RoundShorthand::new(ka, kb, self.channel.eta_a(), self.channel.eta_b(), self.channel.dark_count_prob)
    }

    fn click(&self, a: Level, b: Level) -> f64 {
        self.round(self.intensities_a.intensity(a), self.intensities_b.intensity(b)).click_prob()
    }

    fn prob(&self, a: Level, b: Level) -> f64 {
        self.intensities_a.prob(a) * self.intensities_b.prob(b)
    }

    /// Average per-round effective-click probability `p`.
    pub fn mean_click_prob(&self) -> f64 {
        let mut p = 0.0;
        for a in Level::ALL {
            for b in Level::ALL {
                p += self.prob(a, b) * self.click(a, b);
            }
        }
        p
    }

    /// `N r_p / p²`: the conversion from joint click probabilities of an
    /// ordered round pair to expected pair counts.
    fn pair_prefactor(&self) -> Result<f64> {
        let p = self.mean_click_prob();
        let rp = pairing_rate(p, self.max_pair_interval)?;
        Ok(self.total_rounds * rp / (p * p))
    }
}

/// Intensity class of a pair: the level each side used in its non-vacuum
/// round. In the Z basis the intensity sums are `(k_a, k_b)`; in the X basis
/// they are `(2k_a, 2k_b)`. `(Vacuum, Vacuum)` is the '0'-pair class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IntensityClass {
    pub a: Level,
    pub b: Level,
}

impl IntensityClass {
    pub const fn new(a: Level, b: Level) -> Self {
        IntensityClass { a, b }
    }

    /// All nine classes, signal-first.
    pub fn all() -> impl Iterator<Item = IntensityClass> {
        Level::ALL.into_iter().flat_map(|a| Level::ALL.into_iter().map(move |b| IntensityClass { a, b }))
    }

    /// The four classes whose Z pairs form the raw key.
    pub fn signal() -> impl Iterator<Item = IntensityClass> {
        Self::all().filter(|c| !c.a.is_vacuum() && !c.b.is_vacuum())
    }

    pub fn has_vacuum_side(&self) -> bool {
        self.a.is_vacuum() || self.b.is_vacuum()
    }

    pub fn transposed(&self) -> Self {
        IntensityClass { a: self.b, b: self.a }
    }

    /// Intensity sums `(k_a^i + k_a^j, k_b^i + k_b^j)` of a Z-basis pair.
    pub fn z_sums(&self, a: &IntensityProfile, b: &IntensityProfile) -> (f64, f64) {
        (a.intensity(self.a), b.intensity(self.b))
    }

    /// Intensity sums of an X-basis pair.
    pub fn x_sums(&self, a: &IntensityProfile, b: &IntensityProfile) -> (f64, f64) {
        (2.0 * a.intensity(self.a), 2.0 * b.intensity(self.b))
    }
}

impl fmt::Display for IntensityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.a, self.b)
    }
}

impl std::str::FromStr for IntensityClass {
    type Err = Error;

    /// Parses the display form, e.g. `(mu,0)`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid("class", format!("`{s}` is not of the form (mu|nu|0,mu|nu|0)"));
        let inner = s.trim().strip_prefix('(').and_then(|r| r.strip_suffix(')')).ok_or_else(bad)?;
        let (a, b) = inner.split_once(',').ok_or_else(bad)?;
        let level = |t: &str| match t.trim() {
            "mu" => Ok(Level::Signal),
            "nu" => Ok(Level::Decoy),
            "0" => Ok(Level::Vacuum),
            _ => Err(bad()),
        };
        Ok(IntensityClass::new(level(a)?, level(b)?))
    }
}

/// A value per intensity class.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClassMap(pub [[f64; 3]; 3]);

impl ClassMap {
    pub fn zeros() -> Self {
        ClassMap::default()
    }

    pub fn from_fn<F: FnMut(IntensityClass) -> f64>(mut f: F) -> Self {
        let mut m = ClassMap::zeros();
        for c in IntensityClass::all() {
            m[c] = f(c);
        }
        m
    }

    pub fn try_from_fn<F: FnMut(IntensityClass) -> Result<f64>>(mut f: F) -> Result<Self> {
        let mut m = ClassMap::zeros();
        for c in IntensityClass::all() {
            m[c] = f(c)?;
        }
        Ok(m)
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Self {
        ClassMap::from_fn(|c| f(self[c]))
    }

    pub fn transposed(&self) -> Self {
        ClassMap::from_fn(|c| self[c.transposed()])
    }

    pub fn iter(&self) -> impl Iterator<Item = (IntensityClass, f64)> + '_ {
        IntensityClass::all().map(move |c| (c, self[c]))
    }

    /// Sum over the four signal classes, in fixed order.
    pub fn signal_sum(&self) -> f64 {
        IntensityClass::signal().map(|c| self[c]).sum()
    }
}

impl Index<IntensityClass> for ClassMap {
    type Output = f64;

    fn index(&self, c: IntensityClass) -> &f64 {
        &self.0[c.a.index()][c.b.index()]
    }
}

impl IndexMut<IntensityClass> for ClassMap {
    fn index_mut(&mut self, c: IntensityClass) -> &mut f64 {
        &mut self.0[c.a.index()][c.b.index()]
    }
}

/// Six-state refinement of the X statistics into X and Y pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SixStateCounts {
    pub m_x_bar: ClassMap,
    pub m_y_bar: ClassMap,
    pub slot_x_bar: ClassMap,
}

/// Expected (or observed) counts per intensity class. X-class entries are
/// indexed by the level each side used in both rounds; the `(0,0)` X entry
/// mirrors the '0'-pair class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedCounts {
    pub n_z: ClassMap,
    pub m_z: ClassMap,
    pub n_x_all: ClassMap,
    pub n_x: ClassMap,
    pub m_x: ClassMap,
    pub slot_z: ClassMap,
    pub slot_x: ClassMap,
    pub six_state: Option<SixStateCounts>,
}

impl ExpectedCounts {
    /// Total raw-key length over the signal classes.
    pub fn raw_key_length(&self) -> f64 {
        self.n_z.signal_sum()
    }

    /// Aggregate Z error rate over the signal classes.
    pub fn z_error_rate(&self) -> f64 {
        let n = self.n_z.signal_sum();
        if n > 0.0 {
            self.m_z.signal_sum() / n
        } else {
            0.0
        }
    }
}

/// Round-level combinations `((a_i, b_i), (a_j, b_j))` that produce a Z or
/// '0' pair of the given class.
fn z_combos(c: IntensityClass) -> Vec<[(Level, Level); 2]> {
    let sides = |l: Level| -> Vec<(Level, Level)> {
        if l.is_vacuum() {
            vec![(Level::Vacuum, Level::Vacuum)]
        } else {
            vec![(l, Level::Vacuum), (Level::Vacuum, l)]
        }
    };
    let mut out = Vec::with_capacity(4);
    for (ai, aj) in sides(c.a) {
        for &(bi, bj) in &sides(c.b) {
            out.push([(ai, bi), (aj, bj)]);
        }
    }
    out
}

fn mix(m0: f64, n: f64, e_d: f64) -> f64 {
    (1.0 - e_d) * m0 + e_d * (n - m0)
}

/// Expected Z (and '0') effective-detection counts `n_Z^k`.
pub fn expected_z_counts(cfg: &ProtocolConfig) -> Result<ClassMap> {
    Ok(z_counts_and_raw_errors(cfg)?.0)
}

/// `(n_Z^k, m_Z^{k,0})`.
fn z_counts_and_raw_errors(cfg: &ProtocolConfig) -> Result<(ClassMap, ClassMap)> {
    let pref = cfg.pair_prefactor()?;
    let mut n = ClassMap::zeros();
    let mut m0 = ClassMap::zeros();
    for c in IntensityClass::all() {
        let (mut nc, mut mc) = (0.0, 0.0);
        for [(ai, bi), (aj, bj)] in z_combos(c) {
            let v = cfg.prob(ai, bi) * cfg.prob(aj, bj) * cfg.click(ai, bi) * cfg.click(aj, bj);
            nc += v;
            // Both senders in the same round: their bits disagree.
            if (ai.is_vacuum() && bi.is_vacuum()) || (aj.is_vacuum() && bj.is_vacuum()) {
                mc += v;
            }
        }
        n[c] = pref * nc;
        m0[c] = if c.has_vacuum_side() { 0.5 * n[c] } else { pref * mc };
    }
    Ok((n, m0))
}

/// Expected Z error counts `m_Z^k` including misalignment.
pub fn expected_z_errors(cfg: &ProtocolConfig) -> Result<ClassMap> {
    let (n, m0) = z_counts_and_raw_errors(cfg)?;
    let e = cfg.misalignment.e_d_z;
    Ok(ClassMap::from_fn(|c| mix(m0[c], n[c], e)))
}

fn quad_tol() -> Tolerance {
    Tolerance { abs: 0.0, rel: 1e-12, max_intervals: 200 }
}

/// Phase-window averages over `δ ∈ [−Δ, Δ]`, after the relative phase of
/// the first round has been integrated out analytically:
/// `(⟨2I0(2ω cos δ/2) + 2I0(2ω |sin δ/2|)⟩, ⟨2I0(2ω sin δ/2)⟩)`.
fn window_averages(omega: f64, delta: f64) -> Result<(f64, f64)> {
    let tol = quad_tol();
    let all = integrate(
        |d: f64| {
            let (s, c) = (0.5 * d).sin_cos();
            2.0 * bessel_i0(2.0 * omega * c) + 2.0 * bessel_i0(2.0 * omega * s.abs())
        },
        0.0,
        delta,
        tol,
    )?;
    let err = integrate(|d: f64| 2.0 * bessel_i0(2.0 * omega * (0.5 * d).sin().abs()), 0.0, delta, tol)?;
    // Both integrands are even in δ.
    Ok((all / delta, err / delta))
}

/// `(n_X^{k,all}, n_X^k, m_X^{k,0})` for every X class.
fn x_counts_and_raw_errors(cfg: &ProtocolConfig) -> Result<(ClassMap, ClassMap, ClassMap)> {
    let pref = cfg.pair_prefactor()?;
    let (nz, _) = z_counts_and_raw_errors(cfg)?;
    let mut all = ClassMap::zeros();
    let mut kept = ClassMap::zeros();
    let mut m0 = ClassMap::zeros();
    let retention = 2.0 * cfg.delta / PI;
    for c in IntensityClass::all() {
        if c.a.is_vacuum() && c.b.is_vacuum() {
            all[c] = nz[c];
            kept[c] = nz[c];
            m0[c] = 0.5 * nz[c];
            continue;
        }
        let pr = cfg.prob(c.a, c.b) * cfg.prob(c.a, c.b);
        let click = cfg.click(c.a, c.b);
        all[c] = pref * pr * click * click;
        if c.has_vacuum_side() {
            kept[c] = all[c];
            m0[c] = 0.5 * all[c];
            continue;
        }
        let r = cfg.round(cfg.intensities_a.intensity(c.a), cfg.intensities_b.intensity(c.b));
        let (avg_all, avg_err) = window_averages(r.omega, cfg.delta)?;
        let (y, i0) = (r.y, bessel_i0(r.omega));
        let y2 = y * y;
        kept[c] = pref * retention * pr * (y2 * avg_all - 8.0 * y2 * y * i0 + 4.0 * y2 * y2);
        m0[c] = pref * retention * pr * (y2 * avg_err - 4.0 * y2 * y * i0 + 2.0 * y2 * y2);
        // Guard against rounding below zero at vanishing ω.
        kept[c] = kept[c].max(0.0);
        m0[c] = m0[c].clamp(0.0, kept[c]);
    }
    Ok((all, kept, m0))
}

/// Expected X effective-detection counts `(n_X^{k,all}, n_X^k)`.
pub fn expected_x_counts(cfg: &ProtocolConfig) -> Result<(ClassMap, ClassMap)> {
    let (all, kept, _) = x_counts_and_raw_errors(cfg)?;
    Ok((all, kept))
}

/// Expected X error counts `m_X^k` including misalignment.
pub fn expected_x_errors(cfg: &ProtocolConfig) -> Result<ClassMap> {
    let (_, kept, m0) = x_counts_and_raw_errors(cfg)?;
    let e = cfg.misalignment.e_d_x;
    Ok(ClassMap::from_fn(|c| mix(m0[c], kept[c], e)))
}

/// Expected slot counts `(N_Z^k, N_X^k)`.
pub fn slot_counts(cfg: &ProtocolConfig) -> (ClassMap, ClassMap) {
    let half_n = 0.5 * cfg.total_rounds;
    let slot_z = ClassMap::from_fn(|c| {
        half_n * z_combos(c).into_iter().map(|[(ai, bi), (aj, bj)]| cfg.prob(ai, bi) * cfg.prob(aj, bj)).sum::<f64>()
    });
    let slot_x = ClassMap::from_fn(|c| {
        if c.a.is_vacuum() && c.b.is_vacuum() {
            slot_z[c]
        } else if c.has_vacuum_side() {
            half_n * cfg.prob(c.a, c.b).powi(2)
        } else {
            cfg.total_rounds * cfg.delta / PI * cfg.prob(c.a, c.b).powi(2)
        }
    });
    (slot_z, slot_x)
}

/// Splits the X statistics into the X and Y halves of the six-state variant.
pub fn sixstate_split(counts: &ExpectedCounts, variant: Variant) -> Result<ExpectedCounts> {
    if variant != Variant::SixState {
        return Err(Error::WrongVariant("six-state"));
    }
    let half = counts.m_x.map(|v| 0.5 * v);
    Ok(ExpectedCounts {
        six_state: Some(SixStateCounts { m_x_bar: half, m_y_bar: half, slot_x_bar: counts.slot_x.map(|v| 0.5 * v) }),
        ..*counts
    })
}

/// All expected statistics of `cfg`, split for the six-state variant.
pub fn expected_counts(cfg: &ProtocolConfig) -> Result<ExpectedCounts> {
    cfg.validate()?;
    let (n_z, m0_z) = z_counts_and_raw_errors(cfg)?;
    let (n_x_all, n_x, m0_x) = x_counts_and_raw_errors(cfg)?;
    let (slot_z, slot_x) = slot_counts(cfg);
    let m = &cfg.misalignment;
    let counts = ExpectedCounts {
        m_z: ClassMap::from_fn(|c| mix(m0_z[c], n_z[c], m.e_d_z)),
        m_x: ClassMap::from_fn(|c| mix(m0_x[c], n_x[c], m.e_d_x)),
        n_z,
        n_x_all,
        n_x,
        slot_z,
        slot_x,
        six_state: None,
    };
    match cfg.variant {
        Variant::Original => Ok(counts),
        Variant::SixState => sixstate_split(&counts, Variant::SixState),
    }
}
