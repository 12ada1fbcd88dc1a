//! Variance-based test: reject when the sample variance exceeds its null
//! `(1−α)`-quantile.

use serde::{Deserialize, Serialize};

use crate::decision::TestDecision;
use crate::dist::{BaseDistribution, Model, SampleVector};
use crate::error::{Error, Result};
use crate::montecarlo::MonteCarlo;
use crate::order::upper_quantile;
use crate::rng::{StreamFamily, CALIBRATION_DOMAIN};

pub const SCHEMA: &str = "variance_table";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdSource {
    #[default]
    MonteCarlo,
    /// `σ² + √(B/(nα))`, conservative.
    AnalyticBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceTable {
    pub schema: String,
    pub schema_version: u32,
    pub n: usize,
    pub alpha: f64,
    pub v_alpha_n: f64,
    pub sigma2: f64,
    pub fourth_moment_bound: f64,
    pub base: BaseDistribution,
    pub budget: usize,
    pub seed: u64,
    #[serde(default)]
    pub threshold_source: ThresholdSource,
}

impl VarianceTable {
    /// `σ² + √(B/(nα))`.
    pub fn analytic_bound(&self) -> f64 {
        analytic_bound(self.n, self.alpha, self.base)
    }

    /// Table whose threshold is the analytic bound instead of a simulated quantile.
    pub fn analytic(n: usize, base: BaseDistribution, alpha: f64) -> Result<Self> {
        if n < 2 || !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::domain(format!("need n >= 2 and alpha in (0,1), got n={n}, alpha={alpha}")));
        }
        Ok(Self {
            schema: SCHEMA.into(),
            schema_version: 1,
            n,
            alpha,
            v_alpha_n: analytic_bound(n, alpha, base),
            sigma2: base.variance(),
            fourth_moment_bound: base.fourth_moment(),
            base,
            budget: 0,
            seed: 0,
            threshold_source: ThresholdSource::AnalyticBound,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|source| Error::Json {
            context: "serializing variance table".into(),
            source,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let t: Self = serde_json::from_str(text).map_err(|source| Error::Json {
            context: "parsing variance table".into(),
            source,
        })?;
        if t.schema != SCHEMA {
            return Err(Error::Format(format!("expected schema `{SCHEMA}`, found `{}`", t.schema)));
        }
        Ok(t)
    }
}

fn analytic_bound(n: usize, alpha: f64, base: BaseDistribution) -> f64 {
    base.variance() + (base.fourth_moment() / (n as f64 * alpha)).sqrt()
}

/// Unbiased sample variance, two-pass.
///
/// Values are first expressed relative to the first observation so that
/// exactly representable shifts of the sample give bit-identical results.
pub(crate) fn variance_of(values: &[f64]) -> f64 {
    let n = values.len();
    let origin = values[0];
    let mean = values.iter().map(|x| x - origin).sum::<f64>() / n as f64;
    let ss: f64 = values
        .iter()
        .map(|x| {
            let d = (x - origin) - mean;
            d * d
        })
        .sum();
    ss / (n - 1) as f64
}

pub fn sample_variance(sample: &SampleVector) -> Result<f64> {
    if sample.len() < 2 {
        return Err(Error::domain("sample variance needs at least two observations"));
    }
    Ok(variance_of(sample.values()))
}

pub fn calibrate_variance(n: usize, base: BaseDistribution, alpha: f64, mc: &MonteCarlo) -> Result<VarianceTable> {
    mc.validate(n, alpha)?;
    let family = StreamFamily::new(mc.seed, CALIBRATION_DOMAIN);
    let model = Model::Pure { base, mu: 0.0 };
    let mut stats = mc.execution.map_init(
        mc.budget,
        || vec![0.0; n],
        |buf, b| {
            let mut rng = family.stream(b as u64);
            model.fill(buf, &mut rng);
            variance_of(buf)
        },
    );
    stats.sort_by(f64::total_cmp);
    Ok(VarianceTable {
        schema: SCHEMA.into(),
        schema_version: 1,
        n,
        alpha,
        v_alpha_n: upper_quantile(&stats, alpha),
        sigma2: base.variance(),
        fourth_moment_bound: base.fourth_moment(),
        base,
        budget: mc.budget,
        seed: mc.seed,
        threshold_source: ThresholdSource::MonteCarlo,
    })
}

pub fn run_variance_test(sample: &SampleVector, table: &VarianceTable) -> Result<TestDecision> {
    if sample.len() != table.n {
        return Err(Error::SizeMismatch {
            expected: table.n,
            actual: sample.len(),
        });
    }
    Ok(TestDecision::single(sample_variance(sample)?, table.v_alpha_n))
}

/// `(1/n)·(m₄ − (n−3)/(n−1)·v²)`, an upper bound on `Var(S_n²)`.
pub fn wilks_variance_bound(n: usize, fourth_central_moment: f64, variance: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::domain(format!("need n >= 2, got {n}")));
    }
    if !(fourth_central_moment >= 0.0 && variance >= 0.0) {
        return Err(Error::domain("moments must be nonnegative"));
    }
    if fourth_central_moment < variance * variance {
        return Err(Error::domain(format!(
            "fourth moment {fourth_central_moment} is below variance² = {}",
            variance * variance
        )));
    }
    let nf = n as f64;
    Ok((fourth_central_moment - (nf - 3.0) / (nf - 1.0) * variance * variance) / nf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{sample_mixture, sample_pure, MixtureParams};
    use crate::rng::RngStream;

    use BaseDistribution::{Gaussian, Laplace};

    fn sample(v: &[f64]) -> SampleVector {
        SampleVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn variance_arithmetic() {
        assert_eq!(sample_variance(&sample(&[0.0, 2.0])).unwrap(), 2.0);
        assert_eq!(sample_variance(&sample(&[3.3, 3.3, 3.3])).unwrap(), 0.0);
        assert!((sample_variance(&sample(&[1.0, 2.0, 3.0, 4.0])).unwrap() - 5.0 / 3.0).abs() < 1e-15);
        assert!(sample_variance(&sample(&[1.0])).is_err());
    }

    #[test]
    fn variance_is_stable_far_from_origin() {
        let v = [1e9 + 1.0, 1e9 + 2.0, 1e9 + 3.0, 1e9 + 4.0];
        assert!((sample_variance(&sample(&v)).unwrap() - 5.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn wilks_bound_values() {
        let b = wilks_variance_bound(100, 3.0, 1.0).unwrap();
        assert!((b - (3.0 - 97.0 / 99.0) / 100.0).abs() < 1e-15);
        assert!((b - 0.020202).abs() < 1e-6);
        assert_eq!(wilks_variance_bound(3, 5.0, 2.0).unwrap(), 5.0 / 3.0);
        assert!(matches!(wilks_variance_bound(100, 0.5, 1.0), Err(Error::Domain(_))));
        assert!(wilks_variance_bound(1, 3.0, 1.0).is_err());
    }

    #[test]
    fn calibrated_threshold_respects_analytic_bound() {
        let mc = MonteCarlo::new(20_000, 1);
        let g = calibrate_variance(100, Gaussian, 0.05, &mc).unwrap();
        assert!(g.v_alpha_n <= 1.0 + 0.6f64.sqrt());
        assert!((g.analytic_bound() - 1.774_596_669_241_483).abs() < 1e-12);
        let l = calibrate_variance(100, Laplace, 0.05, &mc).unwrap();
        assert!(l.v_alpha_n <= 2.0 + 4.8f64.sqrt());
        assert_eq!((g.sigma2, l.sigma2), (1.0, 2.0));
        assert_eq!((g.fourth_moment_bound, l.fourth_moment_bound), (3.0, 24.0));
        assert_eq!(g, calibrate_variance(100, Gaussian, 0.05, &mc).unwrap());
    }

    #[test]
    fn budget_is_enforced() {
        assert!(matches!(
            calibrate_variance(100, Gaussian, 0.05, &MonteCarlo::new(999, 1)),
            Err(Error::CalibrationBudget { .. })
        ));
    }

    #[test]
    fn dense_mixture_is_detected() {
        let t = calibrate_variance(100, Gaussian, 0.05, &MonteCarlo::new(10_000, 2)).unwrap();
        let p = MixtureParams::new(0.5, 0.0, 3.0, Gaussian).unwrap();
        let rejections = (0..1000)
            .filter(|&r| {
                let s = sample_mixture(&p, 100, &mut RngStream::new(77, r)).unwrap();
                run_variance_test(&s, &t).unwrap().reject
            })
            .count();
        assert!(rejections >= 990, "{rejections}");
    }

    #[test]
    fn analytic_table_and_json() {
        let t = VarianceTable::analytic(100, Gaussian, 0.05).unwrap();
        assert_eq!(t.v_alpha_n, t.analytic_bound());
        let back = VarianceTable::from_json(&t.to_json().unwrap()).unwrap();
        assert_eq!(t, back);
        let s = sample_pure(Gaussian, 0.0, 99, &mut RngStream::new(1, 1)).unwrap();
        assert!(matches!(run_variance_test(&s, &t), Err(Error::SizeMismatch { .. })));
    }
}
