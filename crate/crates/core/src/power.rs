//! Monte Carlo power curves over an `(ε, μ₂)` grid with `μ₁ = 0`.
//!
//! Every selected test is calibrated once, then each grid cell draws `reps`
//! mixture samples and feeds the same sample to every test. Replicate `r`
//! of cell `c` always uses stream `(seed, c, r)`, so rejection counts are
//! identical for any thread count.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{self, calibrate_baseline_with, BaselineTable, HcPlugin, StatisticKind};
use crate::dist::{BaseDistribution, MixtureParams, Model};
use crate::error::{Error, Result};
use crate::exec::{CountWidth, Execution};
use crate::montecarlo::MonteCarlo;
use crate::rng::{RngStream, StreamFamily, POWER_DOMAIN};
use crate::spacing::{self, CalibrationTable, Variant};
use crate::variance::{self, VarianceTable};

pub const MIN_REPS: usize = 100;
pub const CSV_HEADER: &str = "test,eps,mu2,rejections,reps,power,stderr";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    Spacing,
    Contamination,
    Variance,
    HcKnown,
    HcPlugin,
    KsKnown,
    KsPlugin,
}

impl TestKind {
    pub const ALL: [TestKind; 7] = [
        TestKind::Spacing,
        TestKind::Contamination,
        TestKind::Variance,
        TestKind::HcKnown,
        TestKind::HcPlugin,
        TestKind::KsKnown,
        TestKind::KsPlugin,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TestKind::Spacing => "spacing",
            TestKind::Contamination => "contamination",
            TestKind::Variance => "variance",
            TestKind::HcKnown => "hc_known",
            TestKind::HcPlugin => "hc_plugin",
            TestKind::KsKnown => "ks_known",
            TestKind::KsPlugin => "ks_plugin",
        }
    }

    /// Tests whose null hypothesis fixes the location at 0.
    pub fn assumes_known_mean(self) -> bool {
        matches!(self, TestKind::Contamination | TestKind::HcKnown | TestKind::KsKnown)
    }

    fn baseline(self) -> Option<StatisticKind> {
        match self {
            TestKind::HcKnown => Some(StatisticKind::HcKnown),
            TestKind::HcPlugin => Some(StatisticKind::HcPlugin),
            TestKind::KsKnown => Some(StatisticKind::KsKnown),
            TestKind::KsPlugin => Some(StatisticKind::KsPlugin),
            _ => None,
        }
    }
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('-', "_");
        TestKind::ALL
            .into_iter()
            .find(|k| k.as_str() == norm)
            .ok_or_else(|| Error::domain(format!("unknown test `{s}`")))
    }
}

/// Arithmetic grid `start, start + step, …, ≤ stop`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MuGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl MuGrid {
    pub fn values(&self) -> Result<Vec<f64>> {
        let MuGrid { start, stop, step } = *self;
        if !(start.is_finite() && stop.is_finite() && stop >= start) {
            return Err(Error::domain(format!("invalid grid {start}..{stop}")));
        }
        if start == stop {
            return Ok(vec![start]);
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::domain(format!("grid step must be positive, got {step}")));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        Ok((0..count).map(|i| start + i as f64 * step).collect())
    }
}

/// A power study, as loaded from a JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerExperiment {
    pub n: usize,
    pub base: BaseDistribution,
    pub alpha: f64,
    #[serde(rename = "eps")]
    pub eps_list: Vec<f64>,
    #[serde(rename = "mu2")]
    pub mu_grid: MuGrid,
    pub tests: Vec<TestKind>,
    pub reps: usize,
    pub seed: u64,
    pub calibration_budget: usize,
    #[serde(default, skip_serializing_if = "is_default_hc")]
    pub hc_plugin: HcPlugin,
}

fn is_default_hc(m: &HcPlugin) -> bool {
    *m == HcPlugin::Centered
}

impl PowerExperiment {
    pub fn from_json(text: &str) -> Result<Self> {
        let e: Self = serde_json::from_str(text).map_err(|source| Error::Json {
            context: "parsing experiment config".into(),
            source,
        })?;
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::domain("experiment needs n >= 2"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::domain(format!("alpha must lie in (0,1), got {}", self.alpha)));
        }
        if self.eps_list.is_empty() || self.tests.is_empty() {
            return Err(Error::domain("eps list and test list must be nonempty"));
        }
        if let Some(e) = self.eps_list.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
            return Err(Error::domain(format!("mixture weight {e} is outside (0,1)")));
        }
        if self.reps < MIN_REPS {
            return Err(Error::domain(format!("reps must be at least {MIN_REPS}, got {}", self.reps)));
        }
        self.mu_grid.values().map(|_| ())
    }

    /// `(ε, μ₂)` for every grid cell, ε-major.
    pub fn cells(&self) -> Result<Vec<(f64, f64)>> {
        let mus = self.mu_grid.values()?;
        Ok(self
            .eps_list
            .iter()
            .flat_map(|&e| mus.iter().map(move |&m| (e, m)))
            .collect())
    }
}

/// Generating model of a cell with `μ₁ = 0`. `μ₂ = 0` is the null.
pub fn cell_model(base: BaseDistribution, eps: f64, mu2: f64) -> Result<Model> {
    Ok(if mu2 == 0.0 {
        Model::Pure { base, mu: 0.0 }
    } else if mu2 > 0.0 {
        Model::Mixture(MixtureParams::new(eps, 0.0, mu2, base)?)
    } else {
        // (1−ε)φ(x) + εφ(x−μ₂) with μ₂ < 0, relabelled so that μ₁ < μ₂
        Model::Mixture(MixtureParams::new(1.0 - eps, mu2, 0.0, base)?)
    })
}

/// A calibrated procedure ready to be applied to raw sample buffers.
#[derive(Debug, Clone)]
pub enum Procedure {
    Spacing(CalibrationTable),
    Variance(VarianceTable),
    Baseline(BaselineTable),
}

pub fn calibrate_procedure(
    kind: TestKind,
    n: usize,
    base: BaseDistribution,
    alpha: f64,
    mc: &MonteCarlo,
    hc_plugin: HcPlugin,
) -> Result<Procedure> {
    Ok(match kind {
        TestKind::Spacing => Procedure::Spacing(spacing::calibrate(n, base, alpha, Variant::TwoSidedSpacing, mc)?),
        TestKind::Contamination => {
            Procedure::Spacing(spacing::calibrate(n, base, alpha, Variant::OneSidedContamination, mc)?)
        }
        TestKind::Variance => Procedure::Variance(variance::calibrate_variance(n, base, alpha, mc)?),
        _ => {
            let stat = kind.baseline().expect("baseline kind");
            Procedure::Baseline(calibrate_baseline_with(stat, n, base, alpha, mc, hc_plugin, 0.0)?)
        }
    })
}

/// Scratch buffers for evaluating a set of procedures on one sample.
pub struct Workspace {
    pub values: Vec<f64>,
    lower: Vec<f64>,
    stats: Vec<f64>,
    width: usize,
}

impl Workspace {
    pub fn new(n: usize, width: usize) -> Self {
        let scales = spacing::DyadicScales::new(n.max(2)).map(|s| s.len()).unwrap_or(1);
        Self {
            values: vec![0.0; n],
            lower: vec![0.0; scales],
            stats: vec![0.0; scales],
            width,
        }
    }
}

impl CountWidth for Workspace {
    fn width(&self) -> usize {
        self.width
    }
}

/// Applies every procedure to `ws.values` and adds one to `rejects[i]` for
/// each procedure `i` that rejects. The buffer is reordered.
pub fn evaluate_all(procs: &[Procedure], ws: &mut Workspace, rejects: &mut [u64]) {
    let needs_sort = procs.iter().any(|p| matches!(p, Procedure::Baseline(_)));
    // order-dependent quantities first, on the sample as drawn
    let var = procs
        .iter()
        .any(|p| matches!(p, Procedure::Variance(_)))
        .then(|| variance::variance_of(&ws.values));
    let mean_origin = needs_sort.then(|| baselines::mean_origin(&ws.values));
    if needs_sort {
        ws.values.sort_by(f64::total_cmp);
    }
    for (p, slot) in procs.iter().zip(rejects.iter_mut()) {
        let reject = match p {
            Procedure::Variance(t) => var.expect("computed above") > t.v_alpha_n,
            Procedure::Baseline(t) => {
                let v = baselines::statistic_on(
                    t.statistic_kind,
                    t.base,
                    t.hc_plugin,
                    mean_origin.expect("computed above"),
                    &ws.values,
                );
                v.statistic > t.threshold
            }
            Procedure::Spacing(t) => {
                let scales: Vec<usize> = t.quantiles.iter().map(|q| q.k).collect();
                let w = scales.len();
                spacing::statistics_into(
                    &mut ws.values,
                    needs_sort,
                    t.variant,
                    &scales,
                    &mut ws.lower[..w],
                    &mut ws.stats[..w],
                );
                ws.stats[..w].iter().zip(&t.quantiles).any(|(d, q)| *d > q.q)
            }
        };
        *slot += u64::from(reject);
    }
}

/// Where replicate samples come from. The default draws from the cell model.
pub trait SampleSource: Sync {
    fn fill(&self, model: &Model, out: &mut [f64], rng: &mut RngStream);
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ModelSampler;

impl SampleSource for ModelSampler {
    fn fill(&self, model: &Model, out: &mut [f64], rng: &mut RngStream) {
        model.fill(out, rng);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerRow {
    pub test: TestKind,
    pub eps: f64,
    pub mu2: f64,
    pub rejections: u64,
    pub reps: u64,
    pub power: f64,
    pub stderr: f64,
}

impl PowerRow {
    pub fn new(test: TestKind, eps: f64, mu2: f64, rejections: u64, reps: u64) -> Self {
        let power = rejections as f64 / reps as f64;
        Self {
            test,
            eps,
            mu2,
            rejections,
            reps,
            power,
            stderr: (power * (1.0 - power) / reps as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PowerGridResult {
    pub rows: Vec<PowerRow>,
}

impl PowerGridResult {
    pub fn get(&self, test: TestKind, eps: f64, mu2: f64) -> Option<&PowerRow> {
        self.rows.iter().find(|r| r.test == test && r.eps == eps && r.mu2 == mu2)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Format(format!("writing CSV: {e}"));
        w.write_record(CSV_HEADER.split(',')).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record([
                r.test.as_str().to_string(),
                r.eps.to_string(),
                r.mu2.to_string(),
                r.rejections.to_string(),
                r.reps.to_string(),
                r.power.to_string(),
                r.stderr.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Format(format!("writing CSV: {e}")))
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("CSV is ASCII")
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let header = rdr
            .headers()
            .map_err(|e| Error::Format(format!("reading CSV header: {e}")))?
            .iter()
            .collect::<Vec<_>>()
            .join(",");
        if header != CSV_HEADER {
            return Err(Error::Format(format!("unexpected CSV header `{header}`")));
        }
        let mut rows = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Format(format!("reading CSV: {e}")))?;
            let bad = |field: &str| Error::Format(format!("CSV row {}: bad {field}", line + 2));
            let num = |i: usize, field: &str| rec[i].parse::<f64>().map_err(|_| bad(field));
            rows.push(PowerRow {
                test: rec[0].parse().map_err(|_| bad("test"))?,
                eps: num(1, "eps")?,
                mu2: num(2, "mu2")?,
                rejections: rec[3].parse().map_err(|_| bad("rejections"))?,
                reps: rec[4].parse().map_err(|_| bad("reps"))?,
                power: num(5, "power")?,
                stderr: num(6, "stderr")?,
            });
        }
        Ok(Self { rows })
    }
}

/// Writes the result as CSV to `path`.
pub fn export_csv(result: &PowerGridResult, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    result.write_csv(&mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn calibrate_all(e: &PowerExperiment, exec: Execution) -> Result<Vec<Procedure>> {
    let mc = MonteCarlo::new(e.calibration_budget, e.seed).with_execution(exec);
    e.tests
        .iter()
        .map(|&k| calibrate_procedure(k, e.n, e.base, e.alpha, &mc, e.hc_plugin))
        .collect()
}

pub fn run_power_experiment(e: &PowerExperiment, exec: Execution) -> Result<PowerGridResult> {
    run_power_experiment_with(e, exec, &ModelSampler)
}

pub fn run_power_experiment_with(e: &PowerExperiment, exec: Execution, source: &dyn SampleSource) -> Result<PowerGridResult> {
    e.validate()?;
    let procs = calibrate_all(e, exec)?;
    run_with_procedures(e, &procs, exec, source)
}

/// Runs the grid with already calibrated procedures (one per `e.tests` entry).
pub fn run_with_procedures(
    e: &PowerExperiment,
    procs: &[Procedure],
    exec: Execution,
    source: &dyn SampleSource,
) -> Result<PowerGridResult> {
    if procs.len() != e.tests.len() {
        return Err(Error::domain("one calibrated procedure per test is required"));
    }
    let cells = e.cells()?;
    let mut counts = Vec::with_capacity(cells.len());
    for (c, &(eps, mu2)) in cells.iter().enumerate() {
        let model = cell_model(e.base, eps, mu2)?;
        let family = StreamFamily::child(e.seed, POWER_DOMAIN, c as u64);
        counts.push(exec.count_init(
            e.reps,
            || Workspace::new(e.n, procs.len()),
            |ws, r, acc| {
                let mut rng = family.stream(r as u64);
                source.fill(&model, &mut ws.values, &mut rng);
                evaluate_all(procs, ws, acc);
            },
        ));
    }
    let rows = e
        .tests
        .iter()
        .enumerate()
        .flat_map(|(t, &test)| {
            cells
                .iter()
                .zip(&counts)
                .map(move |(&(eps, mu2), cnt)| PowerRow::new(test, eps, mu2, cnt[t], e.reps as u64))
        })
        .collect();
    Ok(PowerGridResult { rows })
}
