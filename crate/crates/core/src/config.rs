//! Flat `key = value` run configuration with `#` comments.
//!
//! Only `N` and `l` are required. Everything else defaults to the reference
//! experimental setting. Serialization writes keys in a fixed order, so a
//! parse/serialize round trip is idempotent.

use std::f64::consts::PI;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::channel::{ChannelParams, IntensityProfile, MisalignmentParams};
use crate::keyrate::{solve_xi, SecurityBudget};
use crate::optimize::Params;
use crate::stats::{ProtocolConfig, Variant};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },

    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },

    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },

    #[error("line {line}: invalid value for `{key}`: {message}")]
    BadValue { line: usize, key: String, message: String },

    #[error("missing required key `{0}`")]
    Missing(&'static str),

    #[error("invalid configuration: {0}")]
    Invalid(String),

    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

/// Distance grid of a sweep, inclusive of both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepGrid {
    pub start_km: f64,
    pub stop_km: f64,
    pub step_km: f64,
}

impl SweepGrid {
    pub fn new(start_km: f64, stop_km: f64, step_km: f64) -> Result<Self, ConfigError> {
        let g = SweepGrid { start_km, stop_km, step_km };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.step_km > 0.0) || !self.step_km.is_finite() {
            return Err(ConfigError::Invalid("step_km must be positive".into()));
        }
        if !(self.start_km >= 0.0) || !(self.stop_km >= self.start_km) || !self.stop_km.is_finite() {
            return Err(ConfigError::Invalid("need 0 <= start_km <= stop_km".into()));
        }
        Ok(())
    }

    pub fn distances(&self) -> Vec<f64> {
        // The small slack keeps `stop` on the grid despite rounding of the step.
        let n = ((self.stop_km - self.start_km) / self.step_km + 1e-9).floor() as usize;
        (0..=n).map(|k| self.start_km + k as f64 * self.step_km).collect()
    }
}

/// Everything a CLI run needs besides its command-line flags.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dark_count_prob: f64,
    pub detector_eff: f64,
    pub fiber_loss_db_per_km: f64,
    pub ec_efficiency: f64,
    pub eps_tol: f64,
    pub e_d_z: f64,
    pub e_d_x: f64,
    pub total_rounds: f64,
    pub max_pair_interval: u64,
    pub delta: f64,
    pub mu: f64,
    pub nu: f64,
    pub p_mu: f64,
    pub p_nu: f64,
    pub variant: Variant,
    pub distance_km: Option<f64>,
    pub sweep: Option<SweepGrid>,
    pub optimize: bool,
    /// Original-protocol sweep CSV used for the six-state ratio column.
    pub companion: Option<PathBuf>,
}

const KEYS: [&str; 21] = [
    "p_d",
    "eta_d",
    "alpha",
    "f",
    "eps_tol",
    "e_d_z",
    "e_d_x",
    "N",
    "l",
    "delta",
    "mu",
    "nu",
    "p_mu",
    "p_nu",
    "variant",
    "distance_km",
    "start_km",
    "stop_km",
    "step_km",
    "optimize",
    "companion",
];

impl RunConfig {
    /// Reference setting with the two required counts.
    pub fn with_counts(total_rounds: f64, max_pair_interval: u64) -> Self {
        RunConfig {
            dark_count_prob: 1e-8,
            detector_eff: 0.7,
            fiber_loss_db_per_km: 0.2,
            ec_efficiency: 1.1,
            eps_tol: 1e-10,
            e_d_z: 0.005,
            e_d_x: 0.05,
            total_rounds,
            max_pair_interval,
            delta: PI / 16.0,
            mu: 0.4,
            nu: 0.05,
            p_mu: 0.3,
            p_nu: 0.3,
            variant: Variant::Original,
            distance_km: None,
            sweep: None,
            optimize: false,
            companion: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
        text.parse()
    }

    pub fn params(&self) -> Params {
        Params { mu: self.mu, nu: self.nu, p_mu: self.p_mu, p_nu: self.p_nu, delta: self.delta }
    }

    /// Symmetric protocol configuration at `total_km`.
    pub fn protocol(&self, total_km: f64) -> Result<ProtocolConfig, ConfigError> {
        let bad = |e: crate::Error| ConfigError::Invalid(e.to_string());
        let channel = ChannelParams {
            dark_count_prob: self.dark_count_prob,
            detector_eff: self.detector_eff,
            fiber_loss_db_per_km: self.fiber_loss_db_per_km,
            dist_a_km: 0.0,
            dist_b_km: 0.0,
        }
        .at_distance(total_km);
        let profile = IntensityProfile::new(self.mu, self.nu, self.p_mu, self.p_nu).map_err(bad)?;
        let cfg = ProtocolConfig {
            channel,
            intensities_a: profile,
            intensities_b: profile,
            misalignment: MisalignmentParams { e_d_z: self.e_d_z, e_d_x: self.e_d_x },
            total_rounds: self.total_rounds,
            max_pair_interval: self.max_pair_interval,
            delta: self.delta,
            variant: self.variant,
            ec_efficiency: self.ec_efficiency,
        };
        cfg.validate().map_err(bad)?;
        Ok(cfg)
    }

    pub fn security(&self) -> Result<SecurityBudget, ConfigError> {
        solve_xi(self.eps_tol, self.variant).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.protocol(self.distance_km.unwrap_or(0.0))?;
        if !(self.eps_tol > 0.0 && self.eps_tol < 1.0) {
            return Err(ConfigError::Invalid("eps_tol must lie in (0, 1)".into()));
        }
        if let Some(d) = self.distance_km {
            if !(d >= 0.0) || !d.is_finite() {
                return Err(ConfigError::Invalid("distance_km must be non-negative".into()));
            }
        }
        if let Some(g) = &self.sweep {
            g.validate()?;
        }
        Ok(())
    }

    fn set(&mut self, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
        let bad = |message: String| ConfigError::BadValue { line, key: key.to_string(), message };
        let num = || value.parse::<f64>().map_err(|e| bad(e.to_string()));
        match key {
            "p_d" => self.dark_count_prob = num()?,
            "eta_d" => self.detector_eff = num()?,
            "alpha" => self.fiber_loss_db_per_km = num()?,
            "f" => self.ec_efficiency = num()?,
            "eps_tol" => self.eps_tol = num()?,
            "e_d_z" => self.e_d_z = num()?,
            "e_d_x" => self.e_d_x = num()?,
            "N" => self.total_rounds = num()?,
            "l" => {
                // Accepts `1e6` as well as `1000000`.
                let v = num()?;
                if !(v >= 1.0 && v.fract() == 0.0 && v <= u64::MAX as f64) {
                    return Err(bad("must be a positive integer".into()));
                }
                self.max_pair_interval = v as u64;
            }
            "delta" => self.delta = num()?,
            "mu" => self.mu = num()?,
            "nu" => self.nu = num()?,
            "p_mu" => self.p_mu = num()?,
            "p_nu" => self.p_nu = num()?,
            "variant" => self.variant = value.parse().map_err(|e: crate::Error| bad(e.to_string()))?,
            "distance_km" => self.distance_km = Some(num()?),
            "start_km" => self.grid_mut().start_km = num()?,
            "stop_km" => self.grid_mut().stop_km = num()?,
            "step_km" => self.grid_mut().step_km = num()?,
            "optimize" => {
                self.optimize = match value {
                    "true" | "yes" | "1" => true,
                    "false" | "no" | "0" => false,
                    _ => return Err(bad("expected true or false".into())),
                }
            }
            "companion" => self.companion = Some(PathBuf::from(value)),
            _ => unreachable!("keys are checked before assignment"),
        }
        Ok(())
    }

    fn grid_mut(&mut self) -> &mut SweepGrid {
        self.sweep.get_or_insert(SweepGrid { start_km: f64::NAN, stop_km: f64::NAN, step_km: f64::NAN })
    }
}

impl FromStr for RunConfig {
    type Err = ConfigError;

    fn from_str(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::with_counts(f64::NAN, 0);
        let mut seen = std::collections::HashSet::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line,
                    message: format!("expected `key = value`, found `{content}`"),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(ConfigError::UnknownKey { line, key: key.to_string() });
            }
            if !seen.insert(key.to_string()) {
                return Err(ConfigError::DuplicateKey { line, key: key.to_string() });
            }
            cfg.set(key, value, line)?;
        }
        if !seen.contains("N") {
            return Err(ConfigError::Missing("N"));
        }
        if !seen.contains("l") {
            return Err(ConfigError::Missing("l"));
        }
        if let Some(g) = &cfg.sweep {
            for (name, v) in [("start_km", g.start_km), ("stop_km", g.stop_km), ("step_km", g.step_km)] {
                if v.is_nan() {
                    return Err(ConfigError::Missing(name));
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        let mut kv = |k: &str, v: &dyn fmt::Display| writeln!(s, "{k} = {v}");
        kv("p_d", &self.dark_count_prob)?;
        kv("eta_d", &self.detector_eff)?;
        kv("alpha", &self.fiber_loss_db_per_km)?;
        kv("f", &self.ec_efficiency)?;
        kv("eps_tol", &self.eps_tol)?;
        kv("e_d_z", &self.e_d_z)?;
        kv("e_d_x", &self.e_d_x)?;
        kv("N", &self.total_rounds)?;
        kv("l", &self.max_pair_interval)?;
        kv("delta", &self.delta)?;
        kv("mu", &self.mu)?;
        kv("nu", &self.nu)?;
        kv("p_mu", &self.p_mu)?;
        kv("p_nu", &self.p_nu)?;
        kv("variant", &self.variant)?;
        if let Some(d) = self.distance_km {
            kv("distance_km", &d)?;
        }
        if let Some(g) = &self.sweep {
            kv("start_km", &g.start_km)?;
            kv("stop_km", &g.stop_km)?;
            kv("step_km", &g.step_km)?;
        }
        kv("optimize", &self.optimize)?;
        if let Some(c) = &self.companion {
            kv("companion", &c.display())?;
        }
        out.write_str(&s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Rate,
    Sweep,
    McValidate,
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Subcommand::Rate => "rate",
            Subcommand::Sweep => "sweep",
            Subcommand::McValidate => "mc-validate",
        })
    }
}

/// What a CLI invocation resolved to, after flags override the file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub config_path: PathBuf,
    pub subcommand: Subcommand,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub variant: Variant,
    pub grid: Option<SweepGrid>,
}

impl fmt::Display for RunManifest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} config={} variant={}", self.subcommand, self.config_path.display(), self.variant)?;
        if let Some(o) = &self.out {
            write!(f, " out={}", o.display())?;
        }
        if let Some(s) = self.seed {
            write!(f, " seed={s}")?;
        }
        if let Some(w) = self.workers {
            write!(f, " workers={w}")?;
        }
        if let Some(g) = &self.grid {
            write!(f, " grid={}:{}:{}", g.start_km, g.step_km, g.stop_km)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SAMPLE: &str = "\
# reference setting
N = 1e13
l = 1e6   # pairing interval
variant = six-state
start_km = 0
stop_km = 500
step_km = 10
optimize = true
";

    #[test]
    fn parses_sample() {
        let c: RunConfig = SAMPLE.parse().unwrap();
        assert_eq!(c.total_rounds, 1e13);
        assert_eq!(c.max_pair_interval, 1_000_000);
        assert_eq!(c.variant, Variant::SixState);
        assert!(c.optimize);
        let g = c.sweep.unwrap();
        assert_eq!(g.distances().len(), 51);
        assert_eq!(*g.distances().last().unwrap(), 500.0);
        assert_eq!(c.eps_tol, 1e-10);
    }

    #[test]
    fn missing_required_key_is_named() {
        let err = "l = 100\n".parse::<RunConfig>().unwrap_err();
        assert_eq!(err, ConfigError::Missing("N"));
        assert!(err.to_string().contains("`N`"));
        let err = "N = 1e9\n".parse::<RunConfig>().unwrap_err();
        assert_eq!(err, ConfigError::Missing("l"));
    }

    #[test]
    fn diagnostics_carry_line_numbers() {
        let err = "N = 1e9\nl = 10\nbogus = 3\n".parse::<RunConfig>().unwrap_err();
        assert_eq!(err, ConfigError::UnknownKey { line: 3, key: "bogus".into() });
        let err = "N = 1e9\nl = 10\nN = 2\n".parse::<RunConfig>().unwrap_err();
        assert!(matches!(err, ConfigError::DuplicateKey { line: 3, .. }));
        let err = "N = lots\nl = 10\n".parse::<RunConfig>().unwrap_err();
        assert!(matches!(err, ConfigError::BadValue { line: 1, .. }));
        let err = "N = 1e9\nl = 2.5\n".parse::<RunConfig>().unwrap_err();
        assert!(matches!(err, ConfigError::BadValue { line: 2, .. }));
        let err = "N = 1e9\nl = 10\njunk\n".parse::<RunConfig>().unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { line: 3, .. }));
    }

    #[test]
    fn partial_grid_and_bad_values_rejected() {
        assert_eq!(
            "N = 1e9\nl = 10\nstart_km = 0\n".parse::<RunConfig>().unwrap_err(),
            ConfigError::Missing("stop_km")
        );
        assert!("N = 1e9\nl = 10\nmu = 0.01\nnu = 0.1\n".parse::<RunConfig>().is_err());
        assert!("N = 1e9\nl = 10\nstart_km = 5\nstop_km = 1\nstep_km = 1\n".parse::<RunConfig>().is_err());
        assert!(SweepGrid::new(0.0, 10.0, 0.0).is_err());
    }

    #[test]
    fn round_trip_is_idempotent() {
        let c: RunConfig = SAMPLE.parse().unwrap();
        let text = c.to_string();
        let back: RunConfig = text.parse().unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_string(), text);
    }

    #[test]
    fn protocol_is_symmetric_split() {
        let c: RunConfig = "N = 1e10\nl = 100\n".parse().unwrap();
        let p = c.protocol(120.0).unwrap();
        assert_eq!(p.channel.dist_a_km, 60.0);
        assert_eq!(p.intensities_a, p.intensities_b);
    }

    proptest! {
        #[test]
        fn arbitrary_configs_round_trip(
            n in 1.0..1e14f64, l in 1u64..10_000_000, mu in 0.1..1.0f64, frac in 0.01..0.9f64,
            pm in 0.01..0.5f64, pn in 0.01..0.45f64, delta in 0.01..0.7f64, six in any::<bool>(),
            d in proptest::option::of(0.0..500.0f64), opt in any::<bool>(),
        ) {
            let mut c = RunConfig::with_counts(n, l);
            c.mu = mu;
            c.nu = mu * frac;
            c.p_mu = pm;
            c.p_nu = pn;
            c.delta = delta;
            c.variant = if six { Variant::SixState } else { Variant::Original };
            c.distance_km = d;
            c.optimize = opt;
            let back: RunConfig = c.to_string().parse().unwrap();
            prop_assert_eq!(&back, &c);
            prop_assert_eq!(back.to_string(), c.to_string());
        }
    }
}
