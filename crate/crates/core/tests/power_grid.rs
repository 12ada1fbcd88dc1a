use mixdetect::power::{run_power_experiment, MuGrid, PowerExperiment, TestKind};
use mixdetect::{BaseDistribution, Execution};

fn experiment(n: usize, eps: Vec<f64>, mu: MuGrid, tests: Vec<TestKind>, reps: usize) -> PowerExperiment {
    PowerExperiment {
        n,
        base: BaseDistribution::Gaussian,
        alpha: 0.05,
        eps_list: eps,
        mu_grid: mu,
        tests,
        reps,
        seed: 7,
        calibration_budget: 100_000,
        hc_plugin: Default::default(),
    }
}

#[test]
fn reference_cell_mu2_six() {
    let e = experiment(1000, vec![0.001], MuGrid { start: 6.0, stop: 6.0, step: 1.0 }, vec![TestKind::Spacing], 100_000);
    let r = run_power_experiment(&e, Execution::Parallel).unwrap();
    let p = r.rows[0].power;
    assert!((p - 0.6131).abs() <= 0.01, "{p}");
}

#[test]
fn null_cell_holds_level_for_every_test() {
    let e = experiment(100, vec![0.3], MuGrid { start: 0.0, stop: 0.0, step: 1.0 }, TestKind::ALL.to_vec(), 4000);
    let r = run_power_experiment(&e, Execution::Parallel).unwrap();
    for row in &r.rows {
        let se = (0.05 * 0.95 / row.reps as f64).sqrt();
        assert!(row.power <= 0.05 + 3.0 * se, "{row:?}");
    }
}

#[test]
fn spacing_power_increases_with_separation() {
    let e = experiment(100, vec![0.25], MuGrid { start: 0.0, stop: 4.0, step: 0.5 }, vec![TestKind::Spacing], 4000);
    let r = run_power_experiment(&e, Execution::Parallel).unwrap();
    for w in r.rows.windows(2) {
        let slack = 2.0 * w[0].stderr.max(w[1].stderr);
        assert!(w[1].power + slack >= w[0].power, "{:?} then {:?}", w[0], w[1]);
    }
    assert!(r.rows.last().unwrap().power > 0.99);
}

#[test]
fn spacing_wins_sparse_variance_wins_dense() {
    let sparse = experiment(
        1000,
        vec![0.001],
        MuGrid { start: 8.0, stop: 8.0, step: 1.0 },
        vec![TestKind::Spacing, TestKind::Variance],
        4000,
    );
    let r = run_power_experiment(&sparse, Execution::Parallel).unwrap();
    assert!(r.rows[0].power > r.rows[1].power + 0.15, "{:?}", r.rows);

    let dense = experiment(
        100,
        vec![0.45],
        MuGrid { start: 1.0, stop: 1.0, step: 1.0 },
        vec![TestKind::Spacing, TestKind::Variance],
        4000,
    );
    let r = run_power_experiment(&dense, Execution::Parallel).unwrap();
    assert!(r.rows[1].power > r.rows[0].power + 0.05, "{:?}", r.rows);
}
