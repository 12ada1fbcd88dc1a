use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mixdetect::power::{run_power_experiment, MuGrid, PowerExperiment, TestKind};
use mixdetect::spacing::{calibrate, Variant};
use mixdetect::variance::calibrate_variance;
use mixdetect::{BaseDistribution, Execution, MonteCarlo};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn calibration(c: &mut Criterion) {
    let mut g = c.benchmark_group("calibration");
    g.sample_size(10);
    for n in [100usize, 1000] {
        for (name, exec) in MODES {
            let mc = MonteCarlo::new(10_000, 1).with_execution(exec);
            g.bench_with_input(BenchmarkId::new(format!("spacing/{name}"), n), &n, |b, &n| {
                b.iter(|| calibrate(n, BaseDistribution::Gaussian, 0.05, Variant::TwoSidedSpacing, &mc).unwrap())
            });
            g.bench_with_input(BenchmarkId::new(format!("variance/{name}"), n), &n, |b, &n| {
                b.iter(|| calibrate_variance(n, BaseDistribution::Gaussian, 0.05, &mc).unwrap())
            });
        }
    }
    g.finish();
}

fn power_grid(c: &mut Criterion) {
    let mut g = c.benchmark_group("power");
    g.sample_size(10);
    let e = PowerExperiment {
        n: 100,
        base: BaseDistribution::Gaussian,
        alpha: 0.05,
        eps_list: vec![0.05, 0.25],
        mu_grid: MuGrid { start: 0.0, stop: 4.0, step: 2.0 },
        tests: TestKind::ALL.to_vec(),
        reps: 2000,
        seed: 1,
        calibration_budget: 2000,
        hc_plugin: Default::default(),
    };
    for (name, exec) in MODES {
        g.bench_function(name, |b| b.iter(|| run_power_experiment(&e, exec).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, calibration, power_grid);
criterion_main!(benches);
