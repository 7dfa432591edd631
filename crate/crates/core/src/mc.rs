//! Event-level Monte Carlo of the protocol: rounds, pairing, basis sifting
//! and key mapping. Its tallies are compared against [`crate::stats`].
//!
//! Two ChaCha8 streams derived from one seed keep the run reproducible.
//! Stream 0 feeds the rounds, five draws per round in the order: Alice's
//! level, Bob's level, Alice's phase, Bob's phase, click. Stream 1 feeds
//! sifting, three draws per admitted pair: Alice's coin, Bob's coin,
//! misalignment. Coins are drawn even when unused.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};

use crate::channel::{pairing_rate, IntensityProfile, Level, RoundShorthand};
use crate::error::{Error, Result};
use crate::stats::{slot_counts, ClassMap, ExpectedCounts, IntensityClass, ProtocolConfig, SixStateCounts, Variant};

/// Largest number of rounds a single run accepts.
pub const MAX_ROUNDS: f64 = 1e9;

/// Charlie's announcement for one round. Double clicks are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Click {
    None,
    L,
    R,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundRecord {
    pub index: u64,
    pub intensity_a: Level,
    pub intensity_b: Level,
    pub phase_a: f64,
    pub phase_b: f64,
    pub click: Click,
}

impl RoundRecord {
    pub fn clicked(&self) -> bool {
        self.click != Click::None
    }
}

/// Per-round generator of [`RoundRecord`]s.
#[derive(Debug, Clone)]
pub struct RoundSimulator {
    a: IntensityProfile,
    b: IntensityProfile,
    rounds: [[RoundShorthand; 3]; 3],
    rng: ChaCha8Rng,
    next: u64,
    total: u64,
}

fn draw_level(p: &IntensityProfile, u: f64) -> Level {
    if u < p.prob_mu {
        Level::Signal
    } else if u < p.prob_mu + p.prob_nu {
        Level::Decoy
    } else {
        Level::Vacuum
    }
}

impl RoundSimulator {
    pub fn new(cfg: &ProtocolConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if cfg.total_rounds > MAX_ROUNDS {
            return Err(Error::invalid("N", format!("Monte Carlo runs are limited to {MAX_ROUNDS:e} rounds")));
        }
        let (a, b) = (cfg.intensities_a, cfg.intensities_b);
        let ch = &cfg.channel;
        let rounds = Level::ALL.map(|la| {
            Level::ALL.map(|lb| {
                RoundShorthand::new(a.intensity(la), b.intensity(lb), ch.eta_a(), ch.eta_b(), ch.dark_count_prob)
            })
        });
        Ok(RoundSimulator {
            a,
            b,
            rounds,
            rng: ChaCha8Rng::seed_from_u64(seed),
            next: 0,
            total: cfg.total_rounds.round() as u64,
        })
    }
}

impl Iterator for RoundSimulator {
    type Item = RoundRecord;

    fn next(&mut self) -> Option<RoundRecord> {
        if self.next >= self.total {
            return None;
        }
        let intensity_a = draw_level(&self.a, self.rng.random());
        let intensity_b = draw_level(&self.b, self.rng.random());
        let phase_a = TAU * self.rng.random::<f64>();
        let phase_b = TAU * self.rng.random::<f64>();
        let u: f64 = self.rng.random();
        let r = &self.rounds[intensity_a.index()][intensity_b.index()];
        let c = r.omega * (phase_a - phase_b).cos();
        let q_l = r.y * (c.exp_m1() + r.one_minus_y);
        let q_r = r.y * ((-c).exp_m1() + r.one_minus_y);
        let click = if u < q_l {
            Click::L
        } else if u < q_l + q_r {
            Click::R
        } else {
            Click::None
        };
        let index = self.next;
        self.next += 1;
        Some(RoundRecord { index, intensity_a, intensity_b, phase_a, phase_b, click })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.total - self.next) as usize;
        (left, Some(left))
    }
}

/// Seeded stream of `cfg.total_rounds` rounds.
pub fn simulate_rounds(cfg: &ProtocolConfig, seed: u64) -> Result<RoundSimulator> {
    RoundSimulator::new(cfg, seed)
}

/// Greedy pairing of effective events: the pending event pairs with the next
/// one if they are at most `l` rounds apart, otherwise it is dropped and the
/// newer event becomes pending.
#[derive(Debug, Clone)]
pub struct Pairer<T> {
    l: u64,
    pending: Option<(u64, T)>,
}

impl<T> Pairer<T> {
    pub fn new(l: u64) -> Self {
        Pairer { l, pending: None }
    }

    /// Feeds the effective event at round `index`; indices must increase.
    pub fn push(&mut self, index: u64, item: T) -> Option<((u64, T), (u64, T))> {
        match self.pending.take() {
            Some((i, first)) if index - i <= self.l => Some(((i, first), (index, item))),
            _ => {
                self.pending = Some((index, item));
                None
            }
        }
    }
}

/// Pairs of round indices formed from `clicks` (increasing) with interval `l`.
pub fn pair_events(clicks: impl IntoIterator<Item = u64>, l: u64) -> Vec<(u64, u64)> {
    let mut p = Pairer::new(l);
    clicks.into_iter().filter_map(|i| p.push(i, ()).map(|((i, _), (j, _))| (i, j))).collect()
}

/// One side's basis label for a pair of rounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Basis {
    Z,
    /// X in the original protocol, XY in the six-state one.
    X,
    Zero,
    Discard,
}

impl Basis {
    pub fn of(first: Level, second: Level) -> Basis {
        match (first.is_vacuum(), second.is_vacuum()) {
            (true, true) => Basis::Zero,
            (true, false) | (false, true) => Basis::Z,
            (false, false) if first == second => Basis::X,
            _ => Basis::Discard,
        }
    }
}

/// Joint classification of a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PairClass {
    Z,
    X,
    Y,
    Zero,
    Discarded,
}

/// Pair assignment from the two basis labels: equal labels agree, a '0'
/// side joins the other side's basis, anything else is discarded. The X/Y
/// distinction is settled later by the phases.
pub fn assign_pair(a: Basis, b: Basis) -> PairClass {
    match (a, b) {
        (Basis::Z, Basis::Z) | (Basis::Z, Basis::Zero) | (Basis::Zero, Basis::Z) => PairClass::Z,
        (Basis::X, Basis::X) | (Basis::X, Basis::Zero) | (Basis::Zero, Basis::X) => PairClass::X,
        (Basis::Zero, Basis::Zero) => PairClass::Zero,
        _ => PairClass::Discarded,
    }
}

/// A sifted and key-mapped pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairRecord {
    pub i: u64,
    pub j: u64,
    pub class: IntensityClass,
    pub basis_a: Basis,
    pub basis_b: Basis,
    pub pair_class: PairClass,
    /// False for X/Y pairs removed by phase post-selection.
    pub retained: bool,
    pub bit_a: bool,
    pub bit_b: bool,
    pub delta_a: f64,
    pub delta_b: f64,
    /// Six-state basis bits after Bob's flips.
    pub r: Option<(bool, bool)>,
    pub clicks: (Click, Click),
}

impl PairRecord {
    pub fn is_error(&self) -> bool {
        self.bit_a != self.bit_b
    }
}

fn side_level(first: Level, second: Level) -> Level {
    if first.is_vacuum() {
        second
    } else {
        first
    }
}

/// `(κ, δ, r)` from a relative phase. `r` is only meaningful for the
/// six-state variant, where `δ` lives in `[0, π/2)`.
fn phase_map(theta: f64, variant: Variant) -> (bool, f64, bool) {
    let kappa = theta >= PI;
    match variant {
        Variant::Original => (kappa, theta % PI, false),
        Variant::SixState => {
            let quadrant = (theta / FRAC_PI_2).floor() as u8 % 4;
            (kappa, theta % FRAC_PI_2, quadrant % 2 == 1)
        }
    }
}

/// Phase post-selection and Bob's flips. Returns `None` when the pair is
/// discarded, otherwise Bob's `(κ_b, r_b)` after the flips.
fn postselect(
    variant: Variant,
    delta: f64,
    (da, ra): (f64, bool),
    (db, kb, rb): (f64, bool, bool),
) -> Option<(bool, bool)> {
    let d = da - db;
    match variant {
        Variant::Original => {
            if d.abs() <= delta {
                Some((kb, rb))
            } else if d.abs() >= PI - delta {
                Some((!kb, rb))
            } else {
                None
            }
        }
        Variant::SixState => {
            let edge = FRAC_PI_2 - delta;
            if d.abs() <= delta && ra == rb {
                Some((kb, rb))
            } else if ra != rb && -d >= edge {
                // δ_b − δ_a near π/2: flip κ_b only when Alice is in X.
                Some((kb ^ !ra, !rb))
            } else if ra != rb && d >= edge {
                Some((kb ^ ra, !rb))
            } else {
                None
            }
        }
    }
}

/// Sifting and key mapping with its own random stream.
#[derive(Debug, Clone)]
pub struct Sifter {
    variant: Variant,
    delta: f64,
    e_d_z: f64,
    e_d_x: f64,
    rng: ChaCha8Rng,
}

impl Sifter {
    pub fn new(cfg: &ProtocolConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        Sifter {
            variant: cfg.variant,
            delta: cfg.delta,
            e_d_z: cfg.misalignment.e_d_z,
            e_d_x: cfg.misalignment.e_d_x,
            rng,
        }
    }

    pub fn sift(&mut self, first: &RoundRecord, second: &RoundRecord) -> PairRecord {
        let basis_a = Basis::of(first.intensity_a, second.intensity_a);
        let basis_b = Basis::of(first.intensity_b, second.intensity_b);
        let pair_class = assign_pair(basis_a, basis_b);
        let class = IntensityClass::new(
            side_level(first.intensity_a, second.intensity_a),
            side_level(first.intensity_b, second.intensity_b),
        );
        let mut rec = PairRecord {
            i: first.index,
            j: second.index,
            class,
            basis_a,
            basis_b,
            pair_class,
            retained: false,
            bit_a: false,
            bit_b: false,
            delta_a: 0.0,
            delta_b: 0.0,
            r: None,
            clicks: (first.click, second.click),
        };
        if pair_class == PairClass::Discarded {
            return rec;
        }
        let coin_a: bool = self.rng.random();
        let coin_b: bool = self.rng.random();
        let mis: f64 = self.rng.random();

        let theta_a = (second.phase_a - first.phase_a).rem_euclid(TAU);
        let theta_b = (second.phase_b - first.phase_b).rem_euclid(TAU);
        let (ka, da, ra) = phase_map(theta_a, self.variant);
        let (kb, db, rb) = phase_map(theta_b, self.variant);
        rec.delta_a = da;
        rec.delta_b = db;

        let e_d = match pair_class {
            PairClass::Z | PairClass::Zero => {
                // Alice's bit is 1 when she sent in the first round, Bob's
                // when he sent in the second; a silent side draws a coin.
                rec.bit_a = if basis_a == Basis::Zero { coin_a } else { !first.intensity_a.is_vacuum() };
                rec.bit_b = if basis_b == Basis::Zero { coin_b } else { !second.intensity_b.is_vacuum() };
                rec.retained = true;
                if self.variant == Variant::SixState {
                    rec.r = Some((ra, rb));
                }
                self.e_d_z
            }
            _ => {
                let post = if class.has_vacuum_side() {
                    Some((kb, rb))
                } else {
                    postselect(self.variant, self.delta, (da, ra), (db, kb, rb))
                };
                let Some((kb, rb)) = post else {
                    rec.r = (self.variant == Variant::SixState).then_some((ra, rb));
                    if ra {
                        rec.pair_class = PairClass::Y;
                    }
                    return rec;
                };
                let opposite = matches!((first.click, second.click), (Click::L, Click::R) | (Click::R, Click::L));
                rec.bit_a = ka;
                rec.bit_b = kb ^ opposite;
                rec.retained = true;
                if self.variant == Variant::SixState {
                    rec.r = Some((ra, rb));
                    if ra {
                        rec.pair_class = PairClass::Y;
                    }
                }
                self.e_d_x
            }
        };
        if mis < e_d {
            rec.bit_b = !rec.bit_b;
        }
        rec
    }
}

/// Streaming accumulator of pair records into per-class counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Tally {
    pub n_z: ClassMap,
    pub m_z: ClassMap,
    pub n_x_all: ClassMap,
    pub n_x: ClassMap,
    pub m_x: ClassMap,
    /// Six-state only: retained error counts labelled X and Y.
    pub m_x_bar: ClassMap,
    pub m_y_bar: ClassMap,
}

impl Default for Tally {
    fn default() -> Self {
        Tally {
            n_z: ClassMap::zeros(),
            m_z: ClassMap::zeros(),
            n_x_all: ClassMap::zeros(),
            n_x: ClassMap::zeros(),
            m_x: ClassMap::zeros(),
            m_x_bar: ClassMap::zeros(),
            m_y_bar: ClassMap::zeros(),
        }
    }
}

impl Tally {
    pub fn add(&mut self, rec: &PairRecord) {
        let c = rec.class;
        let err = if rec.is_error() { 1.0 } else { 0.0 };
        match rec.pair_class {
            PairClass::Discarded => {}
            PairClass::Z => {
                self.n_z[c] += 1.0;
                self.m_z[c] += err;
            }
            PairClass::Zero => {
                // '0' pairs serve both bases.
                self.n_z[c] += 1.0;
                self.m_z[c] += err;
                self.n_x_all[c] += 1.0;
                self.n_x[c] += 1.0;
                self.m_x[c] += err;
                match rec.r {
                    Some((true, _)) => self.m_y_bar[c] += err,
                    Some((false, _)) => self.m_x_bar[c] += err,
                    None => {}
                }
            }
            PairClass::X | PairClass::Y => {
                self.n_x_all[c] += 1.0;
                if rec.retained {
                    self.n_x[c] += 1.0;
                    self.m_x[c] += err;
                    if rec.pair_class == PairClass::Y {
                        self.m_y_bar[c] += err;
                    } else {
                        self.m_x_bar[c] += err;
                    }
                }
            }
        }
    }

    /// Counts in the form consumed by the estimators, with the analytic slot
    /// counts of `cfg`.
    pub fn into_counts(self, cfg: &ProtocolConfig) -> ExpectedCounts {
        let (slot_z, slot_x) = slot_counts(cfg);
        ExpectedCounts {
            n_z: self.n_z,
            m_z: self.m_z,
            n_x_all: self.n_x_all,
            n_x: self.n_x,
            m_x: self.m_x,
            slot_z,
            slot_x,
            six_state: (cfg.variant == Variant::SixState).then(|| SixStateCounts {
                m_x_bar: self.m_x_bar,
                m_y_bar: self.m_y_bar,
                slot_x_bar: slot_x.map(|v| 0.5 * v),
            }),
        }
    }
}

/// Empirical counts from `records`.
pub fn tally<'a>(records: impl IntoIterator<Item = &'a PairRecord>, cfg: &ProtocolConfig) -> ExpectedCounts {
    let mut t = Tally::default();
    for r in records {
        t.add(r);
    }
    t.into_counts(cfg)
}

/// Summary of one simulated protocol run.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolRun {
    pub seed: u64,
    pub rounds: u64,
    pub clicks: u64,
    pub pairs: u64,
    pub counts: ExpectedCounts,
}

/// Simulates rounds, pairing, sifting and tallying in one streaming pass.
pub fn run_protocol(cfg: &ProtocolConfig, seed: u64) -> Result<ProtocolRun> {
    let sim = simulate_rounds(cfg, seed)?;
    let mut sifter = Sifter::new(cfg, seed);
    let mut pairer = Pairer::new(cfg.max_pair_interval);
    let mut t = Tally::default();
    let (mut rounds, mut clicks, mut pairs) = (0u64, 0u64, 0u64);
    for r in sim {
        rounds += 1;
        if !r.clicked() {
            continue;
        }
        clicks += 1;
        if let Some(((_, first), (_, second))) = pairer.push(r.index, r) {
            pairs += 1;
            t.add(&sifter.sift(&first, &second));
        }
    }
    Ok(ProtocolRun { seed, rounds, clicks, pairs, counts: t.into_counts(cfg) })
}

/// Pairs per round from `rounds` Bernoulli(`p`) click slots, sampled through
/// geometric gaps between clicks.
pub fn simulate_pairing_rate(p: f64, l: u64, rounds: u64, seed: u64) -> Result<f64> {
    // Validates p and l.
    pairing_rate(p, l)?;
    if rounds == 0 {
        return Err(Error::invalid("rounds", "must be positive"));
    }
    let gap = Geometric::new(p).map_err(|e| Error::invalid("p", e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairer = Pairer::new(l);
    let mut pairs = 0u64;
    // Geometric counts failures before the next click.
    let mut next = gap.sample(&mut rng);
    while next < rounds {
        if pairer.push(next, ()).is_some() {
            pairs += 1;
        }
        next = next.saturating_add(gap.sample(&mut rng)).saturating_add(1);
    }
    Ok(pairs as f64 / rounds as f64)
}

/// Names of the compared count families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quantity {
    NZ,
    MZ,
    NXAll,
    NX,
    MX,
    MXBar,
    MYBar,
}

impl Quantity {
    fn get(self, c: &ExpectedCounts) -> Option<&ClassMap> {
        Some(match self {
            Quantity::NZ => &c.n_z,
            Quantity::MZ => &c.m_z,
            Quantity::NXAll => &c.n_x_all,
            Quantity::NX => &c.n_x,
            Quantity::MX => &c.m_x,
            Quantity::MXBar => &c.six_state.as_ref()?.m_x_bar,
            Quantity::MYBar => &c.six_state.as_ref()?.m_y_bar,
        })
    }

    fn get_mut(self, c: &mut ExpectedCounts) -> Option<&mut ClassMap> {
        Some(match self {
            Quantity::NZ => &mut c.n_z,
            Quantity::MZ => &mut c.m_z,
            Quantity::NXAll => &mut c.n_x_all,
            Quantity::NX => &mut c.n_x,
            Quantity::MX => &mut c.m_x,
            Quantity::MXBar => &mut c.six_state.as_mut()?.m_x_bar,
            Quantity::MYBar => &mut c.six_state.as_mut()?.m_y_bar,
        })
    }

    const ALL: [Quantity; 7] =
        [Quantity::NZ, Quantity::MZ, Quantity::NXAll, Quantity::NX, Quantity::MX, Quantity::MXBar, Quantity::MYBar];
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Quantity::NZ => "n_z",
            Quantity::MZ => "m_z",
            Quantity::NXAll => "n_x_all",
            Quantity::NX => "n_x",
            Quantity::MX => "m_x",
            Quantity::MXBar => "m_x_bar",
            Quantity::MYBar => "m_y_bar",
        })
    }
}

/// One (quantity, class, seed) comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub quantity: Quantity,
    pub class: IntensityClass,
    pub seed: u64,
    pub expected: f64,
    pub observed: f64,
    /// `(observed − expected)/√expected`; zero when both vanish.
    pub z: f64,
}

impl Cell {
    pub fn within(&self, sigmas: f64) -> bool {
        self.z.abs() <= sigmas
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{} expected={:.6e} observed={:.6e} z={:.4}",
            self.quantity, self.class, self.expected, self.observed, self.z
        )
    }
}

/// Poisson z-scores of every shared count.
pub fn compare(expected: &ExpectedCounts, observed: &ExpectedCounts, seed: u64) -> Vec<Cell> {
    let mut out = Vec::new();
    for q in Quantity::ALL {
        let (Some(e), Some(o)) = (q.get(expected), q.get(observed)) else {
            continue;
        };
        for class in IntensityClass::all() {
            let (ev, ov) = (e[class], o[class]);
            let z = if ev > 0.0 {
                (ov - ev) / ev.sqrt()
            } else if ov == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            out.push(Cell { quantity: q, class, seed, expected: ev, observed: ov, z });
        }
    }
    out
}

/// Multiplies every count of `class` by `factor`. Used to check that the
/// validation detects a corrupted model.
pub fn inject_fault(counts: &mut ExpectedCounts, class: IntensityClass, factor: f64) {
    for q in Quantity::ALL {
        if let Some(m) = q.get_mut(counts) {
            m[class] *= factor;
        }
    }
}

/// Analytic-versus-simulated agreement over a set of seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub cells: Vec<Cell>,
    pub sigmas: f64,
    pub required_fraction: f64,
}

impl ValidationReport {
    pub const SIGMAS: f64 = 4.0;
    pub const REQUIRED_FRACTION: f64 = 0.95;

    pub fn fraction_within(&self) -> f64 {
        if self.cells.is_empty() {
            return 1.0;
        }
        let ok = self.cells.iter().filter(|c| c.within(self.sigmas)).count();
        ok as f64 / self.cells.len() as f64
    }

    pub fn passed(&self) -> bool {
        self.fraction_within() >= self.required_fraction
    }

    pub fn violations(&self) -> impl Iterator<Item = &Cell> {
        self.cells.iter().filter(|c| !c.within(self.sigmas))
    }
}

/// Runs the protocol once per seed and compares each tally against the
/// analytic counts, optionally corrupted by `fault`.
pub fn validate(cfg: &ProtocolConfig, seeds: &[u64], fault: Option<(IntensityClass, f64)>) -> Result<ValidationReport> {
    use rayon::prelude::*;
    let mut expected = crate::stats::expected_counts(cfg)?;
    if let Some((class, factor)) = fault {
        inject_fault(&mut expected, class, factor);
    }
    let runs: Vec<ProtocolRun> = seeds.par_iter().map(|&s| run_protocol(cfg, s)).collect::<Result<_>>()?;
    let cells = runs.iter().flat_map(|r| compare(&expected, &r.counts, r.seed)).collect();
    Ok(ValidationReport {
        cells,
        sigmas: ValidationReport::SIGMAS,
        required_fraction: ValidationReport::REQUIRED_FRACTION,
    })
}
