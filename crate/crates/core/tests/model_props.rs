use std::collections::BTreeSet;
use std::f64::consts::TAU;

use combscatter::model::{
    predicted_intermod_indices, resolve_couplings, wrap_phase, DeviceParams, ModeGrid, PumpScheme,
    PumpTone,
};
use combscatter::scattering::simulate;
use proptest::prelude::*;

fn scheme_strategy() -> impl Strategy<Value = PumpScheme> {
    prop::collection::btree_set(-12i64..=12, 1..=4).prop_flat_map(|offsets| {
        let n = offsets.len();
        (
            Just(offsets.into_iter().collect::<Vec<_>>()),
            prop::collection::vec(0.0..TAU, n),
            prop::collection::vec(0.0..3e-3f64, n),
        )
            .prop_map(|(offsets, phases, amps)| {
                let tones = offsets
                    .iter()
                    .zip(&phases)
                    .zip(&amps)
                    .map(|((&m, &p), &a)| PumpTone::new(m, a, p).unwrap())
                    .collect();
                PumpScheme::new(tones).unwrap()
            })
    })
}

proptest! {
    #[test]
    fn phases_wrap_into_one_turn(phase in -1e3..1e3f64) {
        let w = wrap_phase(phase);
        prop_assert!((0.0..TAU).contains(&w));
        prop_assert!(((w - phase) / TAU - ((w - phase) / TAU).round()).abs() < 1e-9);
    }

    #[test]
    fn couplings_conserve_pump_offset(scheme in scheme_strategy(), half_span in 1u32..30) {
        let grid = ModeGrid::new(1.0, 1e-3, half_span).unwrap();
        let params = DeviceParams::new(1.0, 0.05).unwrap();
        let set = resolve_couplings(&grid, &scheme, &params);
        let mut seen = BTreeSet::new();
        for c in set.entries() {
            let m = scheme.tones()[c.tone].offset();
            prop_assert_eq!(c.low + c.high, m);
            prop_assert!(c.low <= c.high);
            prop_assert!(grid.contains(c.low) && grid.contains(c.high));
            prop_assert!(seen.insert((c.tone, c.low)));
            let expected = scheme.tones()[c.tone].strength() * params.resonance_frequency();
            prop_assert!((c.strength - expected).norm() <= 1e-15 * expected.norm().max(1.0));
        }
        // every on-grid pair of every tone appears
        for (k, t) in scheme.tones().iter().enumerate() {
            let count = grid
                .indices()
                .filter(|&i| grid.contains(t.offset() - i) && i <= t.offset() - i)
                .count();
            prop_assert_eq!(set.entries().iter().filter(|c| c.tone == k).count(), count);
        }
    }

    #[test]
    fn intermod_prediction_matches_definition(scheme in scheme_strategy(), signal in -20i64..=20) {
        let grid = ModeGrid::new(1.0, 1e-3, 24).unwrap();
        let p = predicted_intermod_indices(&grid, signal, &scheme).unwrap();
        let offsets = scheme.offsets();
        let second: Vec<i64> = p.second_order.iter().map(|s| s.index).collect();
        let expected_second: Vec<i64> = offsets
            .iter()
            .map(|m| m - signal)
            .filter(|&i| grid.contains(i))
            .collect();
        prop_assert_eq!(second, expected_second);
        for t in &p.third_order {
            prop_assert!(grid.contains(t.index));
            for &(k, l) in &t.paths {
                prop_assert!(k != l);
                prop_assert_eq!(offsets[k] - offsets[l] + signal, t.index);
            }
        }
        prop_assert!(p.third_order.windows(2).all(|w| w[0].index < w[1].index));
        for d in &p.dropped {
            prop_assert!(!grid.contains(*d));
        }
    }

    #[test]
    fn scattering_is_dimensionless(scheme in scheme_strategy(), factor in 0.01..100.0f64) {
        let grid = ModeGrid::new(TAU * 4.2e9, TAU * 0.1e6, 10).unwrap();
        let params = DeviceParams::new(TAU * 4.2e9, TAU * 112e6).unwrap();
        let scaled_grid = grid.scaled(factor).unwrap();
        let scaled_params = DeviceParams::new(
            params.resonance_frequency() * factor,
            params.port_coupling() * factor,
        )
        .unwrap();
        let a = simulate(&grid, &params, &scheme);
        let b = simulate(&scaled_grid, &scaled_params, &scheme);
        if let (Ok(a), Ok(b)) = (a, b) {
            let gap = (a.matrix() - b.matrix()).camax();
            prop_assert!(gap < 1e-9 * a.matrix().camax().max(1.0), "gap {}", gap);
        }
    }
}

#[test]
fn merged_tones_add_strengths() {
    let a = PumpTone::new(4, 1e-3, 0.0).unwrap();
    let b = PumpTone::new(4, 1e-3, std::f64::consts::PI).unwrap();
    let c = PumpTone::new(-4, 2e-3, 1.0).unwrap();
    let s = PumpScheme::merged(&[a, c, b]);
    assert_eq!(s.offsets(), vec![4, -4]);
    assert!(s.tones()[0].amplitude() < 1e-18);
    assert!(PumpScheme::new(vec![a, b]).is_err());
}
