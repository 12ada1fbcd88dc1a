//! Higher Criticism and Kolmogorov–Smirnov baselines, in known-mean form and
//! in mean-plugin form (model centred at the sample mean).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::decision::TestDecision;
use crate::dist::{BaseDistribution, Model, SampleVector};
use crate::error::{Error, Result};
use crate::montecarlo::MonteCarlo;
use crate::order::upper_quantile;
use crate::rng::{StreamFamily, CALIBRATION_DOMAIN};

/// p-values are clipped into `[HC_CLIP, 1 − HC_CLIP]`.
pub const HC_CLIP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StatisticKind {
    #[serde(rename = "HC_known")]
    HcKnown,
    #[serde(rename = "HC_plugin")]
    HcPlugin,
    #[serde(rename = "KS_known")]
    KsKnown,
    #[serde(rename = "KS_plugin")]
    KsPlugin,
}

impl StatisticKind {
    pub fn is_plugin(self) -> bool {
        matches!(self, StatisticKind::HcPlugin | StatisticKind::KsPlugin)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StatisticKind::HcKnown => "hc-known",
            StatisticKind::HcPlugin => "hc-plugin",
            StatisticKind::KsKnown => "ks-known",
            StatisticKind::KsPlugin => "ks-plugin",
        }
    }
}

impl fmt::Display for StatisticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StatisticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "hc-known" => Ok(StatisticKind::HcKnown),
            "hc-plugin" => Ok(StatisticKind::HcPlugin),
            "ks-known" => Ok(StatisticKind::KsKnown),
            "ks-plugin" => Ok(StatisticKind::KsPlugin),
            other => Err(Error::domain(format!("unknown baseline statistic `{other}`"))),
        }
    }
}

/// How the plugin HC p-value uses the sample mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HcPlugin {
    /// `p̂ᵢ = Φ̄(Xᵢ − X̄)`.
    #[default]
    Centered,
    /// `p̂ᵢ = Φ̄(Xᵢ + X̄)`, the formula read verbatim. Not translation invariant.
    Literal,
}

/// Higher Criticism value plus the number of p-values that hit the clip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HcValue {
    pub statistic: f64,
    pub clipped: usize,
}

/// Mean of `values` relative to `values[0]`, so `xᵢ − X̄` can be formed as
/// `(xᵢ − x₀) − mean` and stays bit-identical under exact shifts.
fn relative_mean(values: &[f64]) -> f64 {
    let origin = values[0];
    values.iter().map(|x| x - origin).sum::<f64>() / values.len() as f64
}

/// Location offset `g` such that the model cdf is evaluated at `g(xᵢ)`.
#[derive(Clone, Copy)]
enum Centering {
    None,
    /// `xᵢ − X̄`, with `x₀` the first observation in sample order.
    Mean { origin: f64, rel_mean: f64 },
    /// `xᵢ + X̄`.
    PlusMean(f64),
}

impl Centering {
    fn of(values_in_order: &[f64], plugin: bool, hc_mode: HcPlugin) -> Self {
        if !plugin {
            return Centering::None;
        }
        match hc_mode {
            HcPlugin::Centered => Centering::Mean {
                origin: values_in_order[0],
                rel_mean: relative_mean(values_in_order),
            },
            HcPlugin::Literal => {
                Centering::PlusMean(values_in_order.iter().sum::<f64>() / values_in_order.len() as f64)
            }
        }
    }

    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Centering::None => x,
            Centering::Mean { origin, rel_mean } => (x - origin) - rel_mean,
            Centering::PlusMean(m) => x + m,
        }
    }
}

/// `√n · max_i max(i/n − G(X₍ᵢ₎), G(X₍ᵢ₎) − (i−1)/n)` over an ascending slice.
fn ks_sorted(sorted: &[f64], base: BaseDistribution, centering: Centering) -> f64 {
    let n = sorted.len() as f64;
    let mut sup = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let g = base.cdf(centering.apply(x));
        let above = (i + 1) as f64 / n - g;
        let below = g - i as f64 / n;
        sup = sup.max(above).max(below);
    }
    n.sqrt() * sup
}

/// HC over an ascending slice. The p-value is decreasing in `x`, so the
/// i-th smallest p-value belongs to the i-th largest observation.
fn hc_sorted(sorted: &[f64], base: BaseDistribution, centering: Centering) -> HcValue {
    let n = sorted.len();
    let nf = n as f64;
    let root_n = nf.sqrt();
    let mut best = f64::NEG_INFINITY;
    let mut clipped = 0;
    for (i, &x) in sorted.iter().rev().enumerate() {
        let raw = base.survival(centering.apply(x));
        let p = raw.clamp(HC_CLIP, 1.0 - HC_CLIP);
        if p != raw {
            clipped += 1;
        }
        let z = root_n * ((i + 1) as f64 / nf - p) / (p * (1.0 - p)).sqrt();
        best = best.max(z);
    }
    HcValue { statistic: best, clipped }
}

fn sorted_with_centering(sample: &SampleVector, plugin: bool, hc_mode: HcPlugin) -> (Vec<f64>, Centering) {
    let centering = Centering::of(sample.values(), plugin, hc_mode);
    let mut v = sample.values().to_vec();
    if !sample.is_sorted() {
        v.sort_by(f64::total_cmp);
    }
    (v, centering)
}

pub fn ks_statistic(sample: &SampleVector, base: BaseDistribution, plugin: bool) -> f64 {
    let (v, c) = sorted_with_centering(sample, plugin, HcPlugin::Centered);
    ks_sorted(&v, base, c)
}

pub fn hc_statistic(sample: &SampleVector, base: BaseDistribution, plugin: bool) -> f64 {
    hc_statistic_detailed(sample, base, plugin, HcPlugin::Centered).statistic
}

pub fn hc_statistic_detailed(sample: &SampleVector, base: BaseDistribution, plugin: bool, mode: HcPlugin) -> HcValue {
    let (v, c) = sorted_with_centering(sample, plugin, mode);
    hc_sorted(&v, base, c)
}

/// Statistic of `kind` on a buffer. `in_order` is the sample in its original
/// order (for the mean), `sorted` the same values ascending.
pub(crate) fn statistic_on(kind: StatisticKind, base: BaseDistribution, mode: HcPlugin, mean_origin: (f64, f64), sorted: &[f64]) -> HcValue {
    let centering = if kind.is_plugin() {
        match mode {
            HcPlugin::Literal if kind == StatisticKind::HcPlugin => {
                Centering::PlusMean(mean_origin.0 + mean_origin.1)
            }
            _ => Centering::Mean {
                origin: mean_origin.0,
                rel_mean: mean_origin.1,
            },
        }
    } else {
        Centering::None
    };
    match kind {
        StatisticKind::HcKnown | StatisticKind::HcPlugin => hc_sorted(sorted, base, centering),
        StatisticKind::KsKnown | StatisticKind::KsPlugin => HcValue {
            statistic: ks_sorted(sorted, base, centering),
            clipped: 0,
        },
    }
}

/// `(x₀, mean(x − x₀))` for a buffer in sample order.
pub(crate) fn mean_origin(values: &[f64]) -> (f64, f64) {
    (values[0], relative_mean(values))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineTable {
    pub schema_version: u32,
    pub n: usize,
    pub alpha: f64,
    pub threshold: f64,
    pub base: BaseDistribution,
    pub statistic_kind: StatisticKind,
    pub budget: usize,
    pub seed: u64,
    #[serde(default)]
    pub hc_plugin: HcPlugin,
    /// HC p-values clipped while simulating the null distribution.
    #[serde(default)]
    pub clip_events: u64,
}

impl BaselineTable {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|source| Error::Json {
            context: "serializing baseline table".into(),
            source,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|source| Error::Json {
            context: "parsing baseline table".into(),
            source,
        })
    }
}

pub fn calibrate_baseline(
    kind: StatisticKind,
    n: usize,
    base: BaseDistribution,
    alpha: f64,
    mc: &MonteCarlo,
) -> Result<BaselineTable> {
    calibrate_baseline_with(kind, n, base, alpha, mc, HcPlugin::Centered, 0.0)
}

/// Calibration with an explicit HC plugin reading and null location.
///
/// Known-mean statistics must be calibrated at `null_mu = 0`; plugin
/// statistics do not depend on it.
pub fn calibrate_baseline_with(
    kind: StatisticKind,
    n: usize,
    base: BaseDistribution,
    alpha: f64,
    mc: &MonteCarlo,
    mode: HcPlugin,
    null_mu: f64,
) -> Result<BaselineTable> {
    mc.validate(n, alpha)?;
    let family = StreamFamily::new(mc.seed, CALIBRATION_DOMAIN);
    let model = Model::Pure { base, mu: null_mu };
    let values = mc.execution.map_init(
        mc.budget,
        || vec![0.0; n],
        |buf, b| {
            let mut rng = family.stream(b as u64);
            model.fill(buf, &mut rng);
            let mo = mean_origin(buf);
            buf.sort_by(f64::total_cmp);
            statistic_on(kind, base, mode, mo, buf)
        },
    );
    let clip_events = values.iter().map(|v| v.clipped as u64).sum();
    let mut stats: Vec<f64> = values.into_iter().map(|v| v.statistic).collect();
    stats.sort_by(f64::total_cmp);
    Ok(BaselineTable {
        schema_version: 1,
        n,
        alpha,
        threshold: upper_quantile(&stats, alpha),
        base,
        statistic_kind: kind,
        budget: mc.budget,
        seed: mc.seed,
        hc_plugin: mode,
        clip_events,
    })
}

pub fn run_baseline(sample: &SampleVector, table: &BaselineTable) -> Result<TestDecision> {
    if sample.len() != table.n {
        return Err(Error::SizeMismatch {
            expected: table.n,
            actual: sample.len(),
        });
    }
    let mo = mean_origin(sample.values());
    let mut sorted = sample.values().to_vec();
    sorted.sort_by(f64::total_cmp);
    let v = statistic_on(table.statistic_kind, table.base, table.hc_plugin, mo, &sorted);
    Ok(TestDecision::single(v.statistic, table.threshold))
}
