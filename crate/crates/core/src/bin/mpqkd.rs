use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use mpqkd::channel::plob_bound;
use mpqkd::config::{self, ConfigError, RunConfig, RunManifest, SweepGrid};
use mpqkd::mc::{validate, ValidationReport};
use mpqkd::optimize::{optimize, warm_start_sweep_with, OptimizationBox};
use mpqkd::{compute_rate, IntensityClass, KeyRateResult, Variant};

/// Finite-key rates for mode-pairing QKD.
#[derive(Parser)]
#[command(name = "mpqkd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Key rate at `distance_km`.
    Rate(Common),
    /// CSV of key rates over the configured distance grid.
    Sweep(Common),
    /// Compare Monte Carlo tallies with the analytic counts at `distance_km`.
    McValidate(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    variant: Option<Variant>,
    /// Scales the analytic counts of one class, as `(mu,nu)=2`.
    #[arg(long, hide = true)]
    inject_fault: Option<String>,
}

/// Exit status with a message for stderr.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl ToString) -> Self {
        Failure { code: 1, message: message.to_string() }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::config(e)
    }
}

impl From<mpqkd::Error> for Failure {
    fn from(e: mpqkd::Error) -> Self {
        Failure::config(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (sub, args) = match cli.command {
        Command::Rate(a) => (config::Subcommand::Rate, a),
        Command::Sweep(a) => (config::Subcommand::Sweep, a),
        Command::McValidate(a) => (config::Subcommand::McValidate, a),
    };
    match run(sub, &args) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("mpqkd: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(sub: config::Subcommand, args: &Common) -> Result<u8, Failure> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(v) = args.variant {
        cfg.variant = v;
    }
    cfg.validate()?;
    if let Some(n) = args.workers {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(Failure::config)?;
    }
    let manifest = RunManifest {
        config_path: args.config.clone(),
        subcommand: sub,
        out: args.out.clone(),
        seed: args.seed,
        workers: args.workers,
        variant: cfg.variant,
        grid: cfg.sweep,
    };
    eprintln!("mpqkd: {manifest}");
    match sub {
        config::Subcommand::Rate => cmd_rate(&cfg, args.out.as_deref()),
        config::Subcommand::Sweep => cmd_sweep(&cfg, args.out.as_deref()),
        config::Subcommand::McValidate => cmd_mc_validate(&cfg, args),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::config(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn require_distance(cfg: &RunConfig) -> Result<f64, Failure> {
    cfg.distance_km.ok_or_else(|| Failure::config("missing required key `distance_km`"))
}

fn optimization_box(cfg: &RunConfig) -> OptimizationBox {
    let bx = OptimizationBox::new(cfg.variant);
    let start = bx.project(cfg.params());
    bx.with_seeds([start])
}

fn cmd_rate(cfg: &RunConfig, out: Option<&Path>) -> Result<u8, Failure> {
    let d = require_distance(cfg)?;
    let base = cfg.protocol(d)?;
    let security = cfg.security()?;
    let (params, r) = if cfg.optimize {
        let o = optimize(d, &base, &security, &optimization_box(cfg))?;
        (o.params, o.result)
    } else {
        (cfg.params(), compute_rate(&base, &security)?)
    };
    let mut line = format!(
        "distance_km={d} key_rate={:.8e} key_length={:.8e} aborted={} mu={:.8e} nu={:.8e} p_mu={:.8e} p_nu={:.8e} delta={:.8e}",
        r.key_rate, r.key_length, r.aborted, params.mu, params.nu, params.p_mu, params.p_nu, params.delta
    );
    if let Some(reason) = r.abort_reason {
        let _ = write!(line, " reason=\"{reason}\"");
    }
    line.push('\n');
    emit(out, &line)?;
    Ok(if r.aborted { 2 } else { 0 })
}

struct Row {
    distance_km: f64,
    params: mpqkd::optimize::Params,
    result: KeyRateResult,
}

fn sci(v: f64) -> String {
    format!("{v:.8e}")
}

/// Original-protocol key rates keyed by distance.
fn read_companion(path: &Path) -> Result<Vec<(f64, f64)>, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::config(format!("cannot read companion {}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| Failure::config(format!("companion {} lacks column `{name}`", path.display())))
    };
    let (di, ri) = (col("distance_km")?, col("key_rate")?);
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| {
            let f: Vec<&str> = l.split(',').collect();
            let num = |i: usize| {
                f.get(i)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| Failure::config(format!("companion {} line {}: bad number", path.display(), k + 2)))
            };
            Ok((num(di)?, num(ri)?))
        })
        .collect()
}

fn cmd_sweep(cfg: &RunConfig, out: Option<&Path>) -> Result<u8, Failure> {
    let grid: SweepGrid =
        cfg.sweep.ok_or_else(|| Failure::config("missing required keys `start_km`, `stop_km`, `step_km`"))?;
    let distances = grid.distances();
    let base = cfg.protocol(grid.start_km)?;
    let security = cfg.security()?;
    let companion = match (&cfg.companion, cfg.variant) {
        (Some(p), Variant::SixState) => Some(read_companion(p)?),
        _ => None,
    };

    let rows: Vec<Row> = if cfg.optimize {
        warm_start_sweep_with(&distances, &base, &security, &optimization_box(cfg), |_| Vec::new())?
            .into_iter()
            .map(|o| Row { distance_km: o.distance_km, params: o.params, result: o.result })
            .collect()
    } else {
        distances
            .par_iter()
            .map(|&d| {
                let mut c = base;
                c.channel = c.channel.at_distance(d);
                compute_rate(&c, &security).map(|result| Row { distance_km: d, params: cfg.params(), result })
            })
            .collect::<mpqkd::Result<_>>()?
    };

    let six = cfg.variant == Variant::SixState;
    let mut csv = String::from("distance_km,key_rate,plob_bound,mu,nu,p_mu,p_nu,delta,n_z1_lower,e_ph_upper");
    if six {
        csv.push_str(",e_bit_z_upper,e_xy_sum_upper");
        if companion.is_some() {
            csv.push_str(",ratio_to_original");
        }
    }
    csv.push('\n');
    for row in &rows {
        let est = row.result.estimates;
        let plob =
            plob_bound(base.channel.at_distance(row.distance_km).channel_transmittance()).unwrap_or(f64::INFINITY);
        let p = &row.params;
        let mut fields = vec![
            sci(row.distance_km),
            sci(row.result.key_rate),
            sci(plob),
            sci(p.mu),
            sci(p.nu),
            sci(p.p_mu),
            sci(p.p_nu),
            sci(p.delta),
            sci(est.map_or(f64::NAN, |e| e.n_z1_lower)),
            sci(est.and_then(|e| e.e_ph_upper).unwrap_or(f64::NAN)),
        ];
        if six {
            fields.push(sci(est.and_then(|e| e.e_bit_z_upper).unwrap_or(f64::NAN)));
            fields.push(sci(est.and_then(|e| e.e_xy_sum_upper).unwrap_or(f64::NAN)));
            if let Some(c) = &companion {
                let original = c
                    .iter()
                    .find(|(d, _)| (d - row.distance_km).abs() <= 1e-9 * d.abs().max(1.0))
                    .map_or(f64::NAN, |&(_, r)| r);
                fields.push(sci(row.result.key_rate / original));
            }
        }
        csv.push_str(&fields.join(","));
        csv.push('\n');
    }
    emit(out, &csv)?;
    Ok(0)
}

fn parse_fault(s: &str) -> Result<(IntensityClass, f64), Failure> {
    let (class, factor) =
        s.rsplit_once('=').ok_or_else(|| Failure::config(format!("fault `{s}` is not of the form (a,b)=factor")))?;
    let class: IntensityClass = class.parse()?;
    let factor: f64 = factor.trim().parse().map_err(|_| Failure::config(format!("bad fault factor in `{s}`")))?;
    Ok((class, factor))
}

fn cmd_mc_validate(cfg: &RunConfig, args: &Common) -> Result<u8, Failure> {
    let seed = args.seed.ok_or_else(|| Failure::config("mc-validate requires --seed"))?;
    let d = require_distance(cfg)?;
    let protocol = cfg.protocol(d)?;
    let fault = args.inject_fault.as_deref().map(parse_fault).transpose()?;
    let report = validate(&protocol, &[seed], fault)?;
    let text = render_report(&report);
    emit(args.out.as_deref(), &text)?;
    if report.passed() {
        Ok(0)
    } else {
        let bad: Vec<String> = report.violations().map(|c| format!("{}{}", c.quantity, c.class)).collect();
        eprintln!("mpqkd: validation failed for {}", bad.join(" "));
        Ok(3)
    }
}

fn render_report(report: &ValidationReport) -> String {
    let mut s = String::new();
    for c in &report.cells {
        let _ = writeln!(s, "{c}");
    }
    let total = report.cells.len();
    let ok = total - report.violations().count();
    let _ = writeln!(
        s,
        "# within {} sigma: {ok}/{total} ({:.2}%), required {:.0}%: {}",
        report.sigmas,
        100.0 * report.fraction_within(),
        100.0 * report.required_fraction,
        if report.passed() { "pass" } else { "fail" }
    );
    for c in report.violations() {
        let _ = writeln!(s, "# violation {}{}", c.quantity, c.class);
    }
    s
}
