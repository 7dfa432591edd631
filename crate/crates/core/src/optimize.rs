//! Per-distance maximisation of the key rate over the five free parameters
//! `(μ, ν, p_μ, p_ν, Δ)`, with Alice and Bob using the same intensities and
//! Charlie in the middle.
//!
//! The search is a multi-start Nelder–Mead on `−log10(rate)`. Coordinates
//! are normalised to the unit box, logarithmically for the two intensities;
//! every proposal is projected back onto the feasible set before evaluation.

use rayon::prelude::*;

use crate::channel::IntensityProfile;
use crate::error::{Error, Result};
use crate::keyrate::{compute_rate, KeyRateResult, SecurityBudget};
use crate::stats::{ProtocolConfig, Variant};

/// The optimised parameters of a symmetric configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    pub mu: f64,
    pub nu: f64,
    pub p_mu: f64,
    pub p_nu: f64,
    pub delta: f64,
}

impl Params {
    pub fn apply(&self, base: &ProtocolConfig) -> Result<ProtocolConfig> {
        let profile = IntensityProfile::new(self.mu, self.nu, self.p_mu, self.p_nu)?;
        let mut cfg = *base;
        cfg.intensities_a = profile;
        cfg.intensities_b = profile;
        cfg.delta = self.delta;
        Ok(cfg)
    }

    pub fn of(cfg: &ProtocolConfig) -> Self {
        let a = &cfg.intensities_a;
        Params { mu: a.mu, nu: a.nu, p_mu: a.prob_mu, p_nu: a.prob_nu, delta: cfg.delta }
    }
}

const MU_RANGE: (f64, f64) = (0.01, 1.0);
const NU_MIN: f64 = 0.001;
const MARGIN: f64 = 1e-6;

/// Feasible region, starting points and evaluation budget.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationBox {
    pub delta_max: f64,
    pub seeds: Vec<Params>,
    /// Evaluations allowed per start, restarts included.
    pub max_evals: usize,
    /// Relative rate change below which a simplex is considered converged.
    pub rel_tol: f64,
    /// Initial simplex edge as a fraction of the box width.
    pub step: f64,
}

impl OptimizationBox {
    pub fn new(variant: Variant) -> Self {
        let d = |x: f64| x.min(variant.max_delta() - 1e-3);
        OptimizationBox {
            delta_max: variant.max_delta(),
            seeds: vec![
                Params { mu: 0.5, nu: 0.03, p_mu: 0.3, p_nu: 0.1, delta: d(0.25) },
                Params { mu: 0.3, nu: 0.02, p_mu: 0.2, p_nu: 0.1, delta: d(0.3) },
                Params { mu: 0.8, nu: 0.05, p_mu: 0.4, p_nu: 0.15, delta: d(0.2) },
                Params { mu: 0.4, nu: 0.01, p_mu: 0.15, p_nu: 0.05, delta: d(0.35) },
                Params { mu: 0.6, nu: 0.1, p_mu: 0.3, p_nu: 0.3, delta: d(std::f64::consts::PI / 16.0) },
            ],
            max_evals: 1500,
            rel_tol: 1e-4,
            step: 0.1,
        }
    }

    pub fn with_seeds(mut self, extra: impl IntoIterator<Item = Params>) -> Self {
        self.seeds.extend(extra);
        self
    }

    /// Nearest feasible point.
    pub fn project(&self, p: Params) -> Params {
        let mu = p.mu.clamp(MU_RANGE.0, MU_RANGE.1);
        let nu = p.nu.clamp(NU_MIN, mu * (1.0 - MARGIN));
        let mut p_mu = p.p_mu.clamp(MARGIN, 1.0);
        let mut p_nu = p.p_nu.clamp(MARGIN, 1.0);
        let total = p_mu + p_nu;
        if total > 1.0 - MARGIN {
            // Shrinks only the excess over the floor, so both stay ≥ MARGIN.
            let s = (1.0 - 3.0 * MARGIN) / (total - 2.0 * MARGIN);
            p_mu = MARGIN + (p_mu - MARGIN) * s;
            p_nu = MARGIN + (p_nu - MARGIN) * s;
        }
        let delta = p.delta.clamp(MARGIN, self.delta_max - MARGIN);
        Params { mu, nu, p_mu, p_nu, delta }
    }

    pub fn contains(&self, p: &Params) -> bool {
        (MU_RANGE.0..=MU_RANGE.1).contains(&p.mu)
            && p.nu >= NU_MIN
            && p.nu < p.mu
            && p.p_mu > 0.0
            && p.p_nu > 0.0
            && p.p_mu + p.p_nu < 1.0
            && p.delta > 0.0
            && p.delta < self.delta_max
    }

    fn to_unit(&self, p: &Params) -> [f64; 5] {
        [
            (p.mu / MU_RANGE.0).ln() / (MU_RANGE.1 / MU_RANGE.0).ln(),
            (p.nu / NU_MIN).ln() / (MU_RANGE.1 / NU_MIN).ln(),
            p.p_mu,
            p.p_nu,
            p.delta / self.delta_max,
        ]
    }

    fn params_at(&self, u: &[f64; 5]) -> Params {
        self.project(Params {
            mu: MU_RANGE.0 * ((MU_RANGE.1 / MU_RANGE.0).ln() * u[0]).exp(),
            nu: NU_MIN * ((MU_RANGE.1 / NU_MIN).ln() * u[1]).exp(),
            p_mu: u[2],
            p_nu: u[3],
            delta: u[4] * self.delta_max,
        })
    }
}

/// One evaluated point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub params: Params,
    pub rate: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub distance_km: f64,
    pub params: Params,
    pub rate: f64,
    pub result: KeyRateResult,
    pub trace: Vec<Evaluation>,
}

/// Minimised objective: `−log10(rate)` for a positive rate, otherwise a
/// penalty above any attainable value that still slopes towards a key.
fn objective(r: &KeyRateResult) -> f64 {
    if r.key_rate > 0.0 {
        -r.key_rate.log10()
    } else if r.aborted {
        100.0
    } else {
        30.0 + (-r.key_length).ln_1p()
    }
}

struct Search<'a> {
    base: &'a ProtocolConfig,
    security: &'a SecurityBudget,
    bx: &'a OptimizationBox,
    trace: Vec<Evaluation>,
}

impl Search<'_> {
    fn eval(&mut self, u: &[f64; 5]) -> Result<f64> {
        let params = self.bx.params_at(u);
        let r = compute_rate(&params.apply(self.base)?, self.security)?;
        let objective = objective(&r);
        self.trace.push(Evaluation { params, rate: r.key_rate, objective });
        Ok(objective)
    }

    /// Nelder–Mead from `start`, returning the best vertex and its value.
    fn nelder_mead(&mut self, start: [f64; 5], budget: usize) -> Result<([f64; 5], f64)> {
        let used = self.trace.len();
        let step = self.bx.step;
        let mut simplex = vec![start];
        for i in 0..5 {
            let mut v = start;
            v[i] += if v[i] + step <= 1.0 { step } else { -step };
            simplex.push(v);
        }
        let mut values = simplex.iter().map(|v| self.eval(v)).collect::<Result<Vec<_>>>()?;
        let tol = self.bx.rel_tol / std::f64::consts::LN_10;
        while self.trace.len() - used < budget {
            let mut order: Vec<usize> = (0..6).collect();
            order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
            simplex = order.iter().map(|&i| simplex[i]).collect();
            values = order.iter().map(|&i| values[i]).collect();
            if values[5] - values[0] <= tol {
                break;
            }
            let mut centroid = [0.0; 5];
            for v in &simplex[..5] {
                for k in 0..5 {
                    centroid[k] += v[k] / 5.0;
                }
            }
            let towards = |t: f64| -> [f64; 5] {
                let mut p = [0.0; 5];
                for k in 0..5 {
                    p[k] = (centroid[k] + t * (simplex[5][k] - centroid[k])).clamp(0.0, 1.0);
                }
                p
            };
            let reflected = towards(-1.0);
            let fr = self.eval(&reflected)?;
            if fr < values[0] {
                let expanded = towards(-2.0);
                let fe = self.eval(&expanded)?;
                if fe < fr {
                    simplex[5] = expanded;
                    values[5] = fe;
                } else {
                    simplex[5] = reflected;
                    values[5] = fr;
                }
            } else if fr < values[4] {
                simplex[5] = reflected;
                values[5] = fr;
            } else {
                let (contracted, fc) = if fr < values[5] {
                    let c = towards(-0.5);
                    let f = self.eval(&c)?;
                    (c, f)
                } else {
                    let c = towards(0.5);
                    let f = self.eval(&c)?;
                    (c, f)
                };
                if fc < values[5].min(fr) {
                    simplex[5] = contracted;
                    values[5] = fc;
                } else {
                    let best = simplex[0];
                    for i in 1..6 {
                        for (x, b) in simplex[i].iter_mut().zip(best) {
                            *x = b + 0.5 * (*x - b);
                        }
                        values[i] = self.eval(&simplex[i])?;
                    }
                }
            }
        }
        let best = (0..6).min_by(|&i, &j| values[i].total_cmp(&values[j])).unwrap_or(0);
        Ok((simplex[best], values[best]))
    }

    /// Nelder–Mead with restarts from the incumbent until a restart no
    /// longer improves it or the budget runs out.
    fn run(&mut self, seed: &Params) -> Result<()> {
        let mut start = self.bx.to_unit(&self.bx.project(*seed));
        let mut best = f64::INFINITY;
        loop {
            let remaining = self.bx.max_evals.saturating_sub(self.trace.len());
            if remaining < 12 {
                return Ok(());
            }
            let (point, value) = self.nelder_mead(start, remaining)?;
            let improved = value < best - self.bx.rel_tol / std::f64::consts::LN_10;
            best = best.min(value);
            start = point;
            if !improved {
                return Ok(());
            }
        }
    }
}

/// Maximises the key rate at `distance_km` over the box.
pub fn optimize(
    distance_km: f64,
    base: &ProtocolConfig,
    security: &SecurityBudget,
    bx: &OptimizationBox,
) -> Result<OptimizationResult> {
    if bx.seeds.is_empty() {
        return Err(Error::invalid("seeds", "at least one starting point is required"));
    }
    for s in &bx.seeds {
        if !bx.contains(s) {
            return Err(Error::invalid("seeds", format!("infeasible starting point {s:?}")));
        }
    }
    let mut base = *base;
    base.channel = base.channel.at_distance(distance_km);
    let traces = bx
        .seeds
        .par_iter()
        .map(|seed| {
            let mut search = Search { base: &base, security, bx, trace: Vec::new() };
            search.run(seed).map(|_| search.trace)
        })
        .collect::<Result<Vec<_>>>()?;
    let trace: Vec<Evaluation> = traces.into_iter().flatten().collect();
    // First minimum in seed order, so the result does not depend on scheduling.
    let best = trace
        .iter()
        .fold(None::<&Evaluation>, |acc, e| match acc {
            Some(b) if b.objective <= e.objective => Some(b),
            _ => Some(e),
        })
        .copied()
        .ok_or(Error::invalid("seeds", "no evaluations"))?;
    let cfg = best.params.apply(&base)?;
    let result = compute_rate(&cfg, security)?;
    Ok(OptimizationResult { distance_km, params: best.params, rate: result.key_rate, result, trace })
}

/// Optimises at each of the ascending `distances`, seeding every distance
/// with the previous optimum and with `extra_seeds(i)`.
pub fn warm_start_sweep_with(
    distances: &[f64],
    base: &ProtocolConfig,
    security: &SecurityBudget,
    bx: &OptimizationBox,
    extra_seeds: impl Fn(usize) -> Vec<Params>,
) -> Result<Vec<OptimizationResult>> {
    if distances.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("distances", "must be ascending"));
    }
    let mut out: Vec<OptimizationResult> = Vec::with_capacity(distances.len());
    for (i, &d) in distances.iter().enumerate() {
        let mut b = bx.clone().with_seeds(extra_seeds(i).into_iter().map(|p| bx.project(p)));
        if let Some(prev) = out.last() {
            b.seeds.insert(0, prev.params);
        }
        out.push(optimize(d, base, security, &b)?);
    }
    Ok(out)
}

/// [`warm_start_sweep_with`] without extra seeds.
pub fn warm_start_sweep(
    distances: &[f64],
    base: &ProtocolConfig,
    security: &SecurityBudget,
    bx: &OptimizationBox,
) -> Result<Vec<OptimizationResult>> {
    warm_start_sweep_with(distances, base, security, bx, |_| Vec::new())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keyrate::solve_xi;
    use crate::stats::tests::reference_config;
    use proptest::prelude::*;

    fn quick_box() -> OptimizationBox {
        OptimizationBox { max_evals: 300, ..OptimizationBox::new(Variant::Original) }
    }

    #[test]
    fn rejects_infeasible_seeds() {
        let bx = OptimizationBox::new(Variant::Original).with_seeds([Params {
            mu: 0.1,
            nu: 0.2,
            p_mu: 0.3,
            p_nu: 0.3,
            delta: 0.2,
        }]);
        let budget = solve_xi(1e-10, Variant::Original).unwrap();
        assert!(optimize(10.0, &reference_config(10.0), &budget, &bx).is_err());
    }

    #[test]
    fn result_dominates_trace_and_is_deterministic() {
        let mut cfg = reference_config(0.0);
        cfg.total_rounds = 1e12;
        let budget = solve_xi(1e-10, Variant::Original).unwrap();
        let bx = quick_box();
        let a = optimize(50.0, &cfg, &budget, &bx).unwrap();
        let b = optimize(50.0, &cfg, &budget, &bx).unwrap();
        assert_eq!(a, b);
        assert!(a.rate > 0.0);
        assert!(a.trace.iter().all(|e| e.rate <= a.rate));
        assert!(a.trace.iter().all(|e| bx.contains(&e.params)));
    }

    #[test]
    fn single_distance_sweep_matches_optimize() {
        let mut cfg = reference_config(0.0);
        cfg.total_rounds = 1e12;
        let budget = solve_xi(1e-10, Variant::Original).unwrap();
        let bx = quick_box();
        let sweep = warm_start_sweep(&[80.0], &cfg, &budget, &bx).unwrap();
        assert_eq!(sweep[0], optimize(80.0, &cfg, &budget, &bx).unwrap());
        assert!(warm_start_sweep(&[80.0, 40.0], &cfg, &budget, &bx).is_err());
    }

    proptest! {
        #[test]
        fn projection_is_feasible_and_idempotent(
            mu in -1.0..2.0f64, nu in -1.0..2.0f64, pm in -0.5..1.5f64,
            pn in -0.5..1.5f64, d in -1.0..3.0f64,
        ) {
            let bx = OptimizationBox::new(Variant::SixState);
            let p = bx.project(Params { mu, nu, p_mu: pm, p_nu: pn, delta: d });
            prop_assert!(bx.contains(&p));
            let q = bx.project(p);
            for (x, y) in [(q.mu, p.mu), (q.nu, p.nu), (q.p_mu, p.p_mu), (q.p_nu, p.p_nu), (q.delta, p.delta)] {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }
    }
}
