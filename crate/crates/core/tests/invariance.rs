use mixdetect::baselines::{hc_statistic, ks_statistic};
use mixdetect::spacing::{calibrate, run_test, spacing_statistics, DyadicScales, Variant};
use mixdetect::variance::{calibrate_variance, run_variance_test, sample_variance};
use mixdetect::{BaseDistribution, MonteCarlo, SampleVector};
use proptest::prelude::*;

const GRID: f64 = 1_048_576.0;

/// Values on a 2^-20 grid within ±2^9, so shifts on the same grid are exact.
fn grid_values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-(1i64 << 29)..(1i64 << 29), n).prop_map(|v| v.into_iter().map(|x| x as f64 / GRID).collect())
}

fn grid_shift() -> impl Strategy<Value = f64> {
    (-(1i64 << 30)..(1i64 << 30)).prop_map(|s| s as f64 / GRID)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn location_free_statistics_ignore_exact_shifts(values in grid_values(64), shift in grid_shift()) {
        let a = SampleVector::new(values.clone()).unwrap();
        let b = SampleVector::new(values.iter().map(|x| x + shift).collect()).unwrap();
        let scales = DyadicScales::new(64).unwrap();
        let sa = spacing_statistics(&a, &scales).unwrap();
        let sb = spacing_statistics(&b, &scales).unwrap();
        for ((_, x), (_, y)) in sa.iter().zip(&sb) {
            prop_assert_eq!(x.to_bits(), y.to_bits());
        }
        for base in [BaseDistribution::Gaussian, BaseDistribution::Laplace] {
            prop_assert_eq!(ks_statistic(&a, base, true).to_bits(), ks_statistic(&b, base, true).to_bits());
            prop_assert_eq!(hc_statistic(&a, base, true).to_bits(), hc_statistic(&b, base, true).to_bits());
        }
        prop_assert_eq!(sample_variance(&a).unwrap().to_bits(), sample_variance(&b).unwrap().to_bits());
    }

    #[test]
    fn known_mean_statistics_do_move(values in prop::collection::vec(-4.0f64..4.0, 32)) {
        let a = SampleVector::new(values.clone()).unwrap();
        let b = SampleVector::new(values.iter().map(|x| x + 50.0).collect()).unwrap();
        let g = BaseDistribution::Gaussian;
        prop_assert!(ks_statistic(&b, g, false) > 0.99);
        prop_assert!(ks_statistic(&a, g, false) != ks_statistic(&b, g, false));
    }
}

#[test]
fn decisions_agree_after_shifting_by_one_hundred() {
    let mc = MonteCarlo::new(2000, 5);
    let spacing = calibrate(100, BaseDistribution::Gaussian, 0.05, Variant::TwoSidedSpacing, &mc).unwrap();
    let var = calibrate_variance(100, BaseDistribution::Gaussian, 0.05, &mc).unwrap();
    for i in 0..50 {
        let values: Vec<f64> = (0..100).map(|j| ((j * 37 + i * 11) % 101) as f64 / 32.0).collect();
        let a = SampleVector::new(values.clone()).unwrap();
        let b = SampleVector::new(values.iter().map(|x| x + 100.0).collect()).unwrap();
        assert_eq!(run_test(&a, &spacing).unwrap(), run_test(&b, &spacing).unwrap());
        assert_eq!(run_variance_test(&a, &var).unwrap(), run_variance_test(&b, &var).unwrap());
    }
}
