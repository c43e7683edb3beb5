use std::f64::consts::{PI, TAU};

use combscatter::analysis::{
    fit_parameters_with, phase_sweep, search_phases_with, FitData, FitRange,
};
use combscatter::graphs::{extract_graph, TopologyLabel};
use combscatter::model::{DeviceParams, ModeGrid, PumpScheme};
use combscatter::scattering::{normalize_pump_off, normalize_pump_off_complex, simulate};
use combscatter::{Error, Execution};

fn grid(half_span: u32) -> ModeGrid {
    ModeGrid::new(TAU * 4.2e9, TAU * 0.1e6, half_span).unwrap()
}

fn params() -> DeviceParams {
    DeviceParams::new(TAU * 4.2e9, TAU * 112e6).unwrap()
}

fn three(ratio: f64, phases: [f64; 3]) -> PumpScheme {
    PumpScheme::balanced(&[-4, 0, 4], &phases, params().strength_for_ratio(ratio)).unwrap()
}

#[test]
fn coinciding_product_cancels_at_predicted_phase() {
    // with φ₋₁ = a, φ₀ = b the s+4 product vanishes at φ₁ = 2b − a + π
    let (a, b) = (0.0, PI / 4.0);
    let r = phase_sweep(&three(0.05, [a, b, 0.0]), 2, 72, 10, &grid(30), &params()).unwrap();
    let t = r.track(14, false).unwrap();
    let k = (0..72).min_by(|&x, &y| t.db[x].total_cmp(&t.db[y])).unwrap();
    let expected = (2.0 * b - a + PI).rem_euclid(TAU);
    assert!((r.phases[k] - expected).abs() < 1e-9, "min at {}", r.phases[k]);
}

#[test]
fn product_paths_are_enumerated() {
    let r = phase_sweep(&three(0.05, [0.0; 3]), 2, 24, 10, &grid(30), &params()).unwrap();
    // s + m₁ − m₋₁ has one path, s ± 4 two
    let t = r.track(18, false).unwrap();
    assert_eq!(t.path_count(), 1);
    assert_eq!(r.track(14, false).unwrap().path_count(), 2);
    assert_eq!(r.track(6, false).unwrap().path_count(), 2);
    assert!(t.db.iter().all(|v| v.is_finite()));
}

#[test]
fn search_recovers_square_ladder_phase() {
    let g = grid(47);
    let target_scheme = three(0.077, [0.0, 0.0, PI]);
    let on = simulate(&g, &params(), &target_scheme).unwrap();
    let off = simulate(&g, &params(), &target_scheme.pump_off()).unwrap();
    let target = extract_graph(&normalize_pump_off(&on, &off).unwrap(), -20.0).edge_keys();
    let start = three(0.077, [0.0; 3]);
    let r = search_phases_with(&start, &[2], &target, 8, -20.0, &g, &params(), Execution::default())
        .unwrap();
    assert_eq!(r.objective, 0, "best phase {}", r.best_phases[0]);
    assert!(r.best_phases[0] > 0.0 && r.best_phases[0] <= PI);
    assert!(r.report.labels.iter().all(|&l| l == TopologyLabel::SquareLadder));
}

#[test]
fn search_strategies_agree() {
    let g = grid(12);
    let start = three(0.077, [0.0; 3]);
    let target = [(1, 3), (3, 5)].into_iter().collect();
    let a = search_phases_with(&start, &[0, 2], &target, 4, -20.0, &g, &params(), Execution::Sequential)
        .unwrap();
    let b = search_phases_with(&start, &[0, 2], &target, 4, -20.0, &g, &params(), Execution::Parallel)
        .unwrap();
    assert_eq!(a, b);
}

#[test]
fn fit_round_trip_small_grid() {
    let g = grid(10);
    let shape = three(0.1, [0.0, 0.0, PI]);
    let on = simulate(&g, &params(), &shape).unwrap();
    let off = simulate(&g, &params(), &shape.pump_off()).unwrap();
    let data = FitData::new(&normalize_pump_off_complex(&on, &off).unwrap(), None).unwrap();
    let g0 = params().strength_for_ratio(0.1);
    let gamma0 = params().port_coupling();
    let fit = |exec| {
        fit_parameters_with(
            &data,
            &shape,
            params().resonance_frequency(),
            FitRange::new(0.6 * g0, 1.5 * g0).unwrap(),
            FitRange::new(0.7 * gamma0, 1.4 * gamma0).unwrap(),
            10,
            exec,
        )
        .unwrap()
    };
    let a = fit(Execution::Sequential);
    assert!((a.ridge_ratio - 0.1).abs() < 1e-3, "ridge {}", a.ridge_ratio);
    assert!(a.valley.ratio() < 1e-2);
    assert_eq!(a, fit(Execution::Parallel));
}

#[test]
fn raw_data_needs_reference() {
    let g = grid(4);
    let s = simulate(&g, &params(), &three(0.05, [0.0; 3])).unwrap();
    assert!(matches!(FitData::new(&s, None), Err(Error::InvalidArgument(_))));
    let off = simulate(&g, &params(), &three(0.0, [0.0; 3])).unwrap();
    assert!(FitData::new(&s, Some(&off)).is_ok());
}
