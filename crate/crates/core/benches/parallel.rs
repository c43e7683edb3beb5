use std::f64::consts::{PI, TAU};
use std::hint::black_box;

use combscatter::analysis::{fit_parameters_with, phase_sweep_with, FitData, FitRange};
use combscatter::gaussian::{sample_covariance_with, to_quadrature};
use combscatter::model::{DeviceParams, ModeGrid, PumpScheme};
use combscatter::scattering::{normalize_pump_off_complex, simulate};
use combscatter::Execution;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const STRATEGIES: [(&str, Execution); 2] =
    [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn params() -> DeviceParams {
    DeviceParams::new(TAU * 4.2e9, TAU * 112e6).unwrap()
}

fn scheme(ratio: f64) -> PumpScheme {
    PumpScheme::balanced(&[-4, 0, 4], &[0.0, 0.0, PI], params().strength_for_ratio(ratio)).unwrap()
}

fn sweep(c: &mut Criterion) {
    let grid = ModeGrid::new(TAU * 4.2e9, TAU * 0.1e6, 47).unwrap();
    let mut g = c.benchmark_group("phase_sweep");
    g.sample_size(10);
    for (name, exec) in STRATEGIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| phase_sweep_with(&scheme(0.077), 2, 72, 28, &grid, &params(), exec).unwrap())
        });
    }
    g.finish();
}

fn fit(c: &mut Criterion) {
    let grid = ModeGrid::new(TAU * 4.2e9, TAU * 0.1e6, 20).unwrap();
    let s = scheme(0.1);
    let on = simulate(&grid, &params(), &s).unwrap();
    let off = simulate(&grid, &params(), &s.pump_off()).unwrap();
    let data = FitData::new(&normalize_pump_off_complex(&on, &off).unwrap(), None).unwrap();
    let g0 = params().strength_for_ratio(0.1);
    let gamma0 = params().port_coupling();
    let mut g = c.benchmark_group("fit");
    g.sample_size(10);
    for (name, exec) in STRATEGIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                fit_parameters_with(
                    &data,
                    &s,
                    params().resonance_frequency(),
                    FitRange::new(0.7 * g0, 1.4 * g0).unwrap(),
                    FitRange::new(0.8 * gamma0, 1.25 * gamma0).unwrap(),
                    12,
                    exec,
                )
                .unwrap()
            })
        });
    }
    g.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let grid = ModeGrid::new(TAU * 4.2e9, TAU * 0.1e6, 12).unwrap();
    let sx = to_quadrature(&simulate(&grid, &params(), &scheme(0.077)).unwrap()).unwrap();
    let mut g = c.benchmark_group("sample_covariance");
    g.sample_size(10);
    for (name, exec) in STRATEGIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| sample_covariance_with(black_box(&sx), 20_000, 7, 0.5, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, sweep, fit, monte_carlo);
criterion_main!(benches);
