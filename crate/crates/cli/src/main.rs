//! `mixdetect` command-line tool.
//!
//! Exit codes: 0 success, 1 the `test` subcommand rejected the null,
//! 2 usage or input error, 3 runtime error.

use std::fmt::Display;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use mixdetect::baselines::{self, BaselineTable, HcPlugin, StatisticKind};
use mixdetect::power::{self, MuGrid, PowerExperiment};
use mixdetect::spacing::{self, CalibrationTable, Variant};
use mixdetect::theory::{self, Regime};
use mixdetect::variance::{self, VarianceTable};
use mixdetect::{BaseDistribution, Error, Execution, MonteCarlo, SampleVector, TestDecision};

const THREADS_ENV: &str = "MIXDETECT_THREADS";

#[derive(Parser)]
#[command(name = "mixdetect", version, about = "Detect two-component location mixtures against a translation null")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate null thresholds for a test and write them as a JSON table.
    Calibrate(CalibrateArgs),
    /// Apply a calibrated table to a sample (exit 1 when the null is rejected).
    Test(TestArgs),
    /// Run a power study from a JSON config and write CSV.
    Power(PowerArgs),
    /// Print the detection boundary r*(delta) as CSV.
    Boundary(BoundaryArgs),
    /// Evaluate the finite-sample side conditions.
    Check(CheckArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Dist {
    Gaussian,
    Laplace,
}

impl From<Dist> for BaseDistribution {
    fn from(d: Dist) -> Self {
        match d {
            Dist::Gaussian => BaseDistribution::Gaussian,
            Dist::Laplace => BaseDistribution::Laplace,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Spacing,
    Contamination,
    Variance,
    HcKnown,
    HcPlugin,
    KsKnown,
    KsPlugin,
}

impl Kind {
    fn name(self) -> &'static str {
        match self {
            Kind::Spacing => "spacing",
            Kind::Contamination => "contamination",
            Kind::Variance => "variance",
            Kind::HcKnown => "hc-known",
            Kind::HcPlugin => "hc-plugin",
            Kind::KsKnown => "ks-known",
            Kind::KsPlugin => "ks-plugin",
        }
    }
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, value_enum, default_value = "gaussian")]
    dist: Dist,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Monte Carlo budget B.
    #[arg(long, default_value_t = mixdetect::montecarlo::DEFAULT_BUDGET)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long)]
    out: PathBuf,
    /// Use the Φ̄(X_i + X̄) reading of the plugin HC p-values.
    #[arg(long)]
    hc_plugin_literal: bool,
    /// Variance test only: use the closed-form bound instead of simulation.
    #[arg(long)]
    analytic_bound: bool,
}

#[derive(Args)]
struct TestArgs {
    /// One observation per line.
    #[arg(long)]
    input: PathBuf,
    /// Table written by `calibrate`.
    #[arg(long)]
    table: PathBuf,
}

#[derive(Args)]
struct PowerArgs {
    #[arg(long)]
    config: PathBuf,
    /// CSV destination; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BoundaryArgs {
    #[arg(long)]
    regime: Regime,
    /// `start:stop:step`.
    #[arg(long)]
    delta_grid: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long = "M", default_value_t = 0.1)]
    m: f64,
    #[arg(long, value_enum, default_value = "gaussian")]
    dist: Dist,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    fn usage(msg: impl Display) -> Self {
        Failure::Usage(msg.to_string())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::CalibrationBudget { .. } | Error::Io { .. } => Failure::Runtime(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

type CmdResult = std::result::Result<ExitCode, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let threads = match configure_threads() {
        Ok(t) => t,
        Err(f) => return report(f),
    };
    let result = match cli.command {
        Command::Calibrate(a) => calibrate(a, threads),
        Command::Test(a) => test(a),
        Command::Power(a) => power_cmd(a, threads),
        Command::Boundary(a) => boundary(a),
        Command::Check(a) => check(a),
    };
    result.unwrap_or_else(report)
}

fn report(f: Failure) -> ExitCode {
    match f {
        Failure::Usage(m) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Failure::Runtime(m) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}

/// Caps the global worker pool from the environment and returns its size.
fn configure_threads() -> std::result::Result<usize, Failure> {
    let requested = match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(t) if t > 0 => Some(t),
            _ => return Err(Failure::usage(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        },
        Err(_) => None,
    };
    if let Some(t) = requested {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::Runtime(format!("configuring worker pool: {e}")))?;
    }
    Ok(rayon::current_num_threads())
}

fn effective_config(v: Value) {
    eprintln!("effective config: {v}");
}

fn emit(line: impl Display) -> std::result::Result<(), Failure> {
    let mut out = io::stdout().lock();
    writeln!(out, "{line}").map_err(|e| Failure::Runtime(format!("writing output: {e}")))
}

fn read_file(path: &Path) -> std::result::Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> std::result::Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn check_alpha(alpha: f64) -> std::result::Result<(), Failure> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Failure::usage(format!("--alpha must lie in (0,1), got {alpha}")))
    }
}

fn calibrate(a: CalibrateArgs, threads: usize) -> CmdResult {
    check_alpha(a.alpha)?;
    if a.analytic_bound && !matches!(a.kind, Kind::Variance) {
        return Err(Failure::usage("--analytic-bound applies to --kind variance only"));
    }
    if a.hc_plugin_literal && !matches!(a.kind, Kind::HcPlugin) {
        return Err(Failure::usage("--hc-plugin-literal applies to --kind hc-plugin only"));
    }
    let base: BaseDistribution = a.dist.into();
    let hc_mode = if a.hc_plugin_literal { HcPlugin::Literal } else { HcPlugin::Centered };
    effective_config(json!({
        "command": "calibrate",
        "n": a.n,
        "dist": base.as_str(),
        "alpha": a.alpha,
        "reps": a.reps,
        "seed": a.seed,
        "kind": a.kind.name(),
        "out": a.out,
        "hc_plugin": hc_mode,
        "analytic_bound": a.analytic_bound,
        "threads": threads,
    }));
    let mc = MonteCarlo::new(a.reps, a.seed);
    let (text, summary) = match a.kind {
        Kind::Spacing | Kind::Contamination => {
            let variant = if matches!(a.kind, Kind::Spacing) {
                Variant::TwoSidedSpacing
            } else {
                Variant::OneSidedContamination
            };
            let t = spacing::calibrate(a.n, base, a.alpha, variant, &mc)?;
            let summary = json!({"kind": a.kind.name(), "n": t.n, "alpha": t.alpha, "alpha_n": t.alpha_n, "scales": t.scales()});
            (t.to_json()?, summary)
        }
        Kind::Variance => {
            let t = if a.analytic_bound {
                VarianceTable::analytic(a.n, base, a.alpha)?
            } else {
                variance::calibrate_variance(a.n, base, a.alpha, &mc)?
            };
            let summary = json!({"kind": "variance", "n": t.n, "alpha": t.alpha, "threshold": t.v_alpha_n, "threshold_source": t.threshold_source});
            (t.to_json()?, summary)
        }
        Kind::HcKnown | Kind::HcPlugin | Kind::KsKnown | Kind::KsPlugin => {
            let stat = match a.kind {
                Kind::HcKnown => StatisticKind::HcKnown,
                Kind::HcPlugin => StatisticKind::HcPlugin,
                Kind::KsKnown => StatisticKind::KsKnown,
                _ => StatisticKind::KsPlugin,
            };
            let t = baselines::calibrate_baseline_with(stat, a.n, base, a.alpha, &mc, hc_mode, 0.0)?;
            let summary = json!({"kind": a.kind.name(), "n": t.n, "alpha": t.alpha, "threshold": t.threshold, "clip_events": t.clip_events});
            (t.to_json()?, summary)
        }
    };
    write_file(&a.out, &text)?;
    emit(summary)?;
    Ok(ExitCode::SUCCESS)
}

enum AnyTable {
    Spacing(CalibrationTable),
    Variance(VarianceTable),
    Baseline(BaselineTable),
}

impl AnyTable {
    fn parse(text: &str) -> std::result::Result<Self, Failure> {
        let v: Value = serde_json::from_str(text).map_err(|e| Failure::usage(format!("table is not valid JSON: {e}")))?;
        if v.get("variant").is_some() {
            Ok(AnyTable::Spacing(CalibrationTable::from_json(text)?))
        } else if v.get("statistic_kind").is_some() {
            Ok(AnyTable::Baseline(BaselineTable::from_json(text)?))
        } else if v.get("schema").is_some() {
            Ok(AnyTable::Variance(VarianceTable::from_json(text)?))
        } else {
            Err(Failure::usage("unrecognised table format"))
        }
    }

    fn n(&self) -> usize {
        match self {
            AnyTable::Spacing(t) => t.n,
            AnyTable::Variance(t) => t.n,
            AnyTable::Baseline(t) => t.n,
        }
    }

    fn run(&self, sample: &SampleVector) -> mixdetect::Result<TestDecision> {
        match self {
            AnyTable::Spacing(t) => spacing::run_test(sample, t),
            AnyTable::Variance(t) => variance::run_variance_test(sample, t),
            AnyTable::Baseline(t) => baselines::run_baseline(sample, t),
        }
    }
}

fn parse_sample(text: &str) -> std::result::Result<Vec<f64>, Failure> {
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let s = line.trim();
        if s.is_empty() {
            continue;
        }
        match s.parse::<f64>() {
            Ok(x) if x.is_finite() => values.push(x),
            _ => return Err(Failure::usage(format!("line {}: `{s}` is not a finite number", i + 1))),
        }
    }
    Ok(values)
}

fn test(a: TestArgs) -> CmdResult {
    effective_config(json!({"command": "test", "input": a.input, "table": a.table}));
    let table = AnyTable::parse(&read_file(&a.table)?)?;
    let values = parse_sample(&read_file(&a.input)?)?;
    if values.len() != table.n() {
        return Err(Error::SizeMismatch {
            expected: table.n(),
            actual: values.len(),
        }
        .into());
    }
    let sample = SampleVector::new(values)?;
    let decision = table.run(&sample)?;
    let line = serde_json::to_string(&decision).map_err(|e| Failure::Runtime(e.to_string()))?;
    emit(line)?;
    Ok(if decision.reject { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

fn power_cmd(a: PowerArgs, threads: usize) -> CmdResult {
    let experiment = PowerExperiment::from_json(&read_file(&a.config)?)?;
    let mut cfg = serde_json::to_value(&experiment).map_err(|e| Failure::Runtime(e.to_string()))?;
    cfg["command"] = json!("power");
    cfg["hc_plugin"] = json!(experiment.hc_plugin);
    cfg["out"] = json!(a.out);
    cfg["threads"] = json!(threads);
    effective_config(cfg);
    let result = power::run_power_experiment(&experiment, Execution::Parallel)?;
    match &a.out {
        Some(path) => power::export_csv(&result, path)?,
        None => {
            let mut out = io::stdout().lock();
            result
                .write_csv(&mut out)
                .map_err(|e| Failure::Runtime(e.to_string()))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_grid(spec: &str) -> std::result::Result<Vec<f64>, Failure> {
    let parts: Vec<&str> = spec.split(':').collect();
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Failure::usage(format!("--delta-grid expects start:stop:step, got `{spec}`")))?;
    let [start, stop, step] = nums[..] else {
        return Err(Failure::usage(format!("--delta-grid expects start:stop:step, got `{spec}`")));
    };
    let values = MuGrid { start, stop, step }.values()?;
    // strip accumulated rounding so 0.55 + 2·0.05 prints as 0.65
    Ok(values.into_iter().map(|v| (v * 1e12).round() / 1e12).collect())
}

fn boundary(a: BoundaryArgs) -> CmdResult {
    effective_config(json!({"command": "boundary", "regime": a.regime, "delta_grid": a.delta_grid, "out": a.out}));
    let deltas = parse_grid(&a.delta_grid)?;
    let mut csv = String::from("regime,delta,r_star\n");
    for d in deltas {
        let r = theory::detection_boundary(a.regime, d)?;
        csv.push_str(&format!("{},{d},{r}\n", a.regime));
    }
    match &a.out {
        Some(path) => write_file(path, &csv)?,
        None => print!("{csv}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn check(a: CheckArgs) -> CmdResult {
    check_alpha(a.alpha)?;
    let base: BaseDistribution = a.dist.into();
    effective_config(json!({"command": "check", "n": a.n, "alpha": a.alpha, "M": a.m, "dist": base.as_str()}));
    let report = theory::check_side_conditions(a.n, a.alpha, a.m, base)?;
    emit(serde_json::to_string(&report).map_err(|e| Failure::Runtime(e.to_string()))?)?;
    Ok(ExitCode::SUCCESS)
}
