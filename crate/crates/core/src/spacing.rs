//! The multi-scale order-statistics spacing test.
//!
//! For each dyadic scale `k` the statistic is the spacing
//! `D_k = X_(n−k+1) − X_(k)`, which does not depend on the location of the
//! null density. The test rejects as soon as one spacing exceeds its
//! calibrated quantile `q_{α_n,k}`, where the per-scale level `α_n` is tuned
//! by Monte Carlo so that the union of all scales has level `α`.
//!
//! The contamination variant (known null mean `0`) uses the upper order
//! statistic `X_(n−k+1)` alone.

use serde::{Deserialize, Serialize};

use crate::decision::{ScaleCheck, TestDecision, Threshold};
use crate::dist::{BaseDistribution, Model, SampleVector};
use crate::error::{Error, Result};
use crate::montecarlo::MonteCarlo;
use crate::order::select_extremes;
use crate::rng::{StreamFamily, CALIBRATION_DOMAIN};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    TwoSidedSpacing,
    OneSidedContamination,
}

/// `K_n = {2^j : 0 ≤ j ≤ ⌊log₂(n/2)⌋}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DyadicScales {
    n: usize,
    scales: Vec<usize>,
}

impl DyadicScales {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::domain(format!("dyadic scales need n >= 2, got {n}")));
        }
        let scales = std::iter::successors(Some(1usize), |k| Some(k * 2))
            .take_while(|&k| 2 * k <= n)
            .collect();
        Ok(Self { n, scales })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn scales(&self) -> &[usize] {
        &self.scales
    }

    pub fn len(&self) -> usize {
        self.scales.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scales.is_empty()
    }
}

pub fn dyadic_scales(n: usize) -> Result<DyadicScales> {
    DyadicScales::new(n)
}

/// Per-scale statistics of `values` (reordered in place) written to `out`.
pub(crate) fn statistics_into(
    values: &mut [f64],
    sorted: bool,
    variant: Variant,
    scales: &[usize],
    lower: &mut [f64],
    out: &mut [f64],
) {
    select_extremes(values, sorted, scales, lower, out);
    if variant == Variant::TwoSidedSpacing {
        for (d, lo) in out.iter_mut().zip(lower.iter()) {
            *d -= lo;
        }
    }
}

/// `k ↦ D_k = X_(n−k+1) − X_(k)` for every scale.
pub fn spacing_statistics(sample: &SampleVector, scales: &DyadicScales) -> Result<Vec<(usize, f64)>> {
    check_size(scales.n(), sample.len())?;
    Ok(per_scale_statistics(sample, scales, Variant::TwoSidedSpacing))
}

fn per_scale_statistics(sample: &SampleVector, scales: &DyadicScales, variant: Variant) -> Vec<(usize, f64)> {
    let mut values = sample.values().to_vec();
    let mut lower = vec![0.0; scales.len()];
    let mut out = vec![0.0; scales.len()];
    statistics_into(&mut values, sample.is_sorted(), variant, scales.scales(), &mut lower, &mut out);
    scales.scales().iter().copied().zip(out).collect()
}

fn check_size(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::SizeMismatch { expected, actual })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleQuantile {
    pub k: usize,
    pub q: f64,
}

/// Calibrated per-scale quantiles `q_{α_n,k}` and the adaptive level `α_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTable {
    pub schema_version: u32,
    pub n: usize,
    pub alpha: f64,
    pub alpha_n: f64,
    pub variant: Variant,
    pub base: BaseDistribution,
    pub budget: usize,
    pub seed: u64,
    pub quantiles: Vec<ScaleQuantile>,
}

impl CalibrationTable {
    pub fn scales(&self) -> Vec<usize> {
        self.quantiles.iter().map(|q| q.k).collect()
    }

    pub fn quantile(&self, k: usize) -> Option<f64> {
        self.quantiles.iter().find(|q| q.k == k).map(|q| q.q)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|source| Error::Json {
            context: "serializing calibration table".into(),
            source,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let table: Self = serde_json::from_str(text).map_err(|source| Error::Json {
            context: "parsing calibration table".into(),
            source,
        })?;
        table.validate()?;
        Ok(table)
    }

    fn validate(&self) -> Result<()> {
        let scales = DyadicScales::new(self.n)?;
        if self.scales() != scales.scales() {
            return Err(Error::Format(format!(
                "calibration table for n = {} must list scales {:?}",
                self.n,
                scales.scales()
            )));
        }
        if self.quantiles.iter().any(|q| !q.q.is_finite()) {
            return Err(Error::Format("calibration quantiles must be finite".into()));
        }
        Ok(())
    }
}

/// Min-p Monte Carlo calibration of the spacing test (or its contamination variant).
///
/// Draws `B` null samples at location 0, computes each replicate's smallest
/// marginal p-value across scales, and picks `α_n` as the largest grid value
/// `j/B` whose in-sample family-wise rejection rate stays at or below `alpha`.
pub fn calibrate(n: usize, base: BaseDistribution, alpha: f64, variant: Variant, mc: &MonteCarlo) -> Result<CalibrationTable> {
    mc.validate(n, alpha)?;
    let scales = DyadicScales::new(n)?;
    let width = scales.len();
    let budget = mc.budget;
    let family = StreamFamily::new(mc.seed, CALIBRATION_DOMAIN);
    let model = Model::Pure { base, mu: 0.0 };

    let rows: Vec<Vec<f64>> = mc.execution.map_init(
        budget,
        || (vec![0.0; n], vec![0.0; width]),
        |(buf, lower), b| {
            let mut rng = family.stream(b as u64);
            model.fill(buf, &mut rng);
            let mut out = vec![0.0; width];
            statistics_into(buf, false, variant, scales.scales(), lower, &mut out);
            out
        },
    );

    // Column-sorted statistics and, per replicate, the smallest count
    // `1 + #{b' : D_k(b') > D_k(b)}` across scales (= B · min-p).
    let mut columns: Vec<Vec<f64>> = (0..width).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
    for col in &mut columns {
        col.sort_by(f64::total_cmp);
    }
    let mut min_counts: Vec<usize> = rows
        .iter()
        .map(|row| {
            row.iter()
                .zip(&columns)
                .map(|(&d, col)| 1 + budget - col.partition_point(|&x| x <= d))
                .min()
                .expect("at least one scale")
        })
        .collect();
    min_counts.sort_unstable();

    // Largest j with #{b : m_b <= j} / B <= alpha.
    let allowed = (0..=budget).rev().find(|&c| c as f64 / budget as f64 <= alpha).unwrap_or(0);
    let j = if allowed >= budget { budget - 1 } else { min_counts[allowed] - 1 };
    if j == 0 {
        return Err(Error::domain(format!(
            "alpha = {alpha} is too small for a calibration budget of {budget}"
        )));
    }
    let alpha_n = j as f64 / budget as f64;

    // ⌈(1 − j/B)·B⌉ = B − j, exactly.
    let quantiles = scales
        .scales()
        .iter()
        .zip(&columns)
        .map(|(&k, col)| ScaleQuantile { k, q: col[budget - j - 1] })
        .collect();

    Ok(CalibrationTable {
        schema_version: SCHEMA_VERSION,
        n,
        alpha,
        alpha_n,
        variant,
        base,
        budget,
        seed: mc.seed,
        quantiles,
    })
}

/// `t_{α,k}` solving `Φ̄(t/2) = (k/n)(1 − √(2 log(4/α)/k))` when `k > 2 log(4/α)`, else `+∞`.
pub fn analytic_threshold(n: usize, k: usize, alpha: f64, base: BaseDistribution) -> Result<Threshold> {
    if k < 1 || 2 * k > n {
        return Err(Error::domain(format!("scale k = {k} must lie in 1..=n/2 for n = {n}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("alpha must lie in (0,1), got {alpha}")));
    }
    let log_term = 2.0 * (4.0 / alpha).ln();
    let kf = k as f64;
    if kf <= log_term {
        return Ok(Threshold::Infinite);
    }
    let rhs = kf / n as f64 * (1.0 - (log_term / kf).sqrt());
    Ok(Threshold::Finite(2.0 * base.inverse_survival(rhs)?))
}

/// Applies the calibrated test to one sample.
pub fn run_test(sample: &SampleVector, table: &CalibrationTable) -> Result<TestDecision> {
    check_size(table.n, sample.len())?;
    let scales = DyadicScales::new(table.n)?;
    let stats = per_scale_statistics(sample, &scales, table.variant);
    let checks = stats
        .into_iter()
        .zip(&table.quantiles)
        .map(|((k, d), q)| {
            let threshold = Threshold::Finite(q.q);
            ScaleCheck {
                k,
                statistic: d,
                threshold,
                exceeded: threshold.is_exceeded_by(d),
            }
        })
        .collect();
    Ok(TestDecision::from_checks(checks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Execution;
    use crate::rng::RngStream;

    use BaseDistribution::{Gaussian, Laplace};

    fn sample(v: &[f64]) -> SampleVector {
        SampleVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn dyadic_scale_sets() {
        assert_eq!(dyadic_scales(100).unwrap().scales(), &[1, 2, 4, 8, 16, 32]);
        assert_eq!(dyadic_scales(2).unwrap().scales(), &[1]);
        assert_eq!(dyadic_scales(1000).unwrap().scales(), &[1, 2, 4, 8, 16, 32, 64, 128, 256]);
        assert!(matches!(dyadic_scales(1), Err(Error::Domain(_))));
        for n in 2..600usize {
            let s = dyadic_scales(n).unwrap();
            assert_eq!(s.len(), (n as f64 / 2.0).log2().floor() as usize + 1);
            assert!(s.scales().iter().all(|&k| k.is_power_of_two() && 2 * k <= n));
        }
    }

    #[test]
    fn spacing_arithmetic() {
        let scales = dyadic_scales(4).unwrap();
        let s = sample(&[0.0, 1.0, 3.0, 10.0]);
        assert_eq!(spacing_statistics(&s, &scales).unwrap(), vec![(1, 10.0), (2, 2.0)]);
        let shifted = sample(&[7.0, 8.0, 10.0, 17.0]);
        assert_eq!(spacing_statistics(&shifted, &scales).unwrap(), vec![(1, 10.0), (2, 2.0)]);
        let unsorted = sample(&[10.0, 0.0, 3.0, 1.0]);
        assert_eq!(spacing_statistics(&unsorted, &scales).unwrap(), vec![(1, 10.0), (2, 2.0)]);
        let flat = sample(&[2.5; 4]);
        assert_eq!(spacing_statistics(&flat, &scales).unwrap(), vec![(1, 0.0), (2, 0.0)]);
        assert!(matches!(
            spacing_statistics(&sample(&[1.0, 2.0, 3.0]), &scales),
            Err(Error::SizeMismatch { .. })
        ));
    }

    #[test]
    fn analytic_threshold_branches() {
        assert_eq!(analytic_threshold(100, 4, 0.05, Gaussian).unwrap(), Threshold::Infinite);
        // arbitrary-precision root of Φ̄(t/2) = 0.15253367...: t = 2.0512543747693944
        let t = analytic_threshold(100, 32, 0.05, Gaussian).unwrap().finite().unwrap();
        assert!((t - 2.051_254_374_769_394).abs() < 1e-10, "{t}");
        assert!((t - 2.05).abs() < 0.01);
        let t = analytic_threshold(100, 32, 0.05, Laplace).unwrap().finite().unwrap();
        let a = 0.05f64;
        let closed = 2.0 * ((100.0f64 / 32.0).ln() - (1.0 - (2.0 * (4.0 / a).ln() / 32.0).sqrt()).ln() - 2f64.ln());
        assert!((t - closed).abs() < 1e-12, "{t} vs {closed}");
        assert!(analytic_threshold(100, 51, 0.05, Gaussian).is_err());
        assert!(analytic_threshold(100, 0, 0.05, Gaussian).is_err());
    }

    #[test]
    fn thresholds_are_monotone_in_k() {
        for base in [Gaussian, Laplace] {
            for n in [100, 1000, 10_000, 100_000] {
                for alpha in [0.01, 0.05, 0.2] {
                    let finite: Vec<f64> = (1..=n / 2)
                        .filter_map(|k| analytic_threshold(n, k, alpha, base).unwrap().finite())
                        .collect();
                    assert!(finite.windows(2).all(|w| w[1] <= w[0]), "n={n} alpha={alpha}");
                }
            }
        }
    }

    #[test]
    fn budget_and_domain_errors() {
        let small = MonteCarlo::new(10, 1);
        assert!(matches!(
            calibrate(100, Gaussian, 0.05, Variant::TwoSidedSpacing, &small),
            Err(Error::CalibrationBudget { budget: 10, .. })
        ));
        let ok = MonteCarlo::new(1000, 1);
        assert!(matches!(
            calibrate(100, Gaussian, 1.5, Variant::TwoSidedSpacing, &ok),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            calibrate(100, Gaussian, 0.0, Variant::TwoSidedSpacing, &ok),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn calibration_is_deterministic_across_execution_modes() {
        let seq = MonteCarlo::new(4000, 7).with_execution(Execution::Sequential);
        let par = MonteCarlo::new(4000, 7).with_execution(Execution::Parallel);
        for variant in [Variant::TwoSidedSpacing, Variant::OneSidedContamination] {
            let a = calibrate(64, Laplace, 0.05, variant, &seq).unwrap();
            let b = calibrate(64, Laplace, 0.05, variant, &par).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn calibrated_level_is_sandwiched() {
        let mc = MonteCarlo::new(20_000, 3);
        for n in [49, 100] {
            let t = calibrate(n, Gaussian, 0.05, Variant::TwoSidedSpacing, &mc).unwrap();
            let k = dyadic_scales(n).unwrap().len() as f64;
            assert!(t.alpha_n >= 0.05 / k && t.alpha_n <= 0.05, "{}", t.alpha_n);
            assert_eq!(t.quantiles.len(), k as usize);
            assert!(t.quantiles.iter().all(|q| q.q.is_finite() && q.q > 0.0));
        }
    }

    #[test]
    fn in_sample_rejection_rate_matches_min_p_rule() {
        // Re-running the calibration replicates through run_test must reject
        // exactly the replicates whose min-p is <= alpha_n.
        let mc = MonteCarlo::new(2000, 11).with_execution(Execution::Sequential);
        let t = calibrate(32, Gaussian, 0.1, Variant::TwoSidedSpacing, &mc).unwrap();
        let family = StreamFamily::new(11, CALIBRATION_DOMAIN);
        let rejected = (0..2000u64)
            .filter(|&b| {
                let mut rng = family.stream(b);
                let mut v = vec![0.0; 32];
                Model::Pure { base: Gaussian, mu: 0.0 }.fill(&mut v, &mut rng);
                run_test(&sample(&v), &t).unwrap().reject
            })
            .count();
        assert!(rejected as f64 / 2000.0 <= 0.1);
        assert!(rejected > 0);
    }

    #[test]
    fn bimodal_sample_is_rejected() {
        let mc = MonteCarlo::new(5000, 5);
        let t = calibrate(100, Gaussian, 0.05, Variant::TwoSidedSpacing, &mc).unwrap();
        let mut rng = RngStream::new(5, 0);
        let v: Vec<f64> = (0..100)
            .map(|i| if i < 50 { 0.0 } else { 100.0 } + 0.1 * Gaussian.draw(&mut rng))
            .collect();
        let d = run_test(&sample(&v), &t).unwrap();
        assert!(d.reject);
        assert_eq!(d.triggering_scale, Some(1));
    }

    #[test]
    fn constant_sample_accepts() {
        let mc = MonteCarlo::new(1000, 5);
        let t = calibrate(8, Gaussian, 0.05, Variant::TwoSidedSpacing, &mc).unwrap();
        let d = run_test(&sample(&[4.0; 8]), &t).unwrap();
        assert!(!d.reject);
        assert!(d.per_scale.iter().all(|c| c.statistic == 0.0));
    }

    #[test]
    fn size_mismatch_is_reported() {
        let mc = MonteCarlo::new(1000, 5);
        let t = calibrate(8, Gaussian, 0.05, Variant::TwoSidedSpacing, &mc).unwrap();
        assert!(matches!(
            run_test(&sample(&[0.0; 7]), &t),
            Err(Error::SizeMismatch { expected: 8, actual: 7 })
        ));
    }

    #[test]
    fn json_round_trip_is_exact() {
        let mc = MonteCarlo::new(1000, 9);
        let t = calibrate(100, Laplace, 0.05, Variant::OneSidedContamination, &mc).unwrap();
        let back = CalibrationTable::from_json(&t.to_json().unwrap()).unwrap();
        assert_eq!(t, back);
        let v: serde_json::Value = serde_json::from_str(&t.to_json().unwrap()).unwrap();
        for key in ["schema_version", "n", "alpha", "alpha_n", "variant", "base", "budget", "seed", "quantiles"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["variant"], "one_sided_contamination");
    }
}
