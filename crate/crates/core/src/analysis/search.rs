use std::collections::BTreeSet;

use serde::Serialize;

use crate::graphs::{analyze_topology, extract_graph, CorrelationGraph, TopologyReport};
use crate::model::{DeviceParams, ModeGrid, PumpScheme};
use crate::scattering::{simulate, DbMatrix};
use crate::{Error, Execution, Result};

use super::sweep::phase_grid;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchResult {
    pub swept_tones: Vec<usize>,
    /// Phases of the swept tones at the optimum, tone order.
    pub best_phases: Vec<f64>,
    /// The full scheme at the optimum.
    #[serde(skip)]
    pub scheme: PumpScheme,
    /// Size of the edge symmetric difference with the target.
    pub objective: usize,
    pub missing: Vec<(i64, i64)>,
    pub extra: Vec<(i64, i64)>,
    pub graph: CorrelationGraph,
    pub report: TopologyReport,
    /// Grid points that were above threshold and skipped.
    pub skipped: usize,
}

pub fn search_phases(
    scheme: &PumpScheme,
    swept_tones: &[usize],
    target: &BTreeSet<(i64, i64)>,
    phase_grid_points: usize,
    threshold_db: f64,
    grid: &ModeGrid,
    params: &DeviceParams,
) -> Result<SearchResult> {
    search_phases_with(
        scheme,
        swept_tones,
        target,
        phase_grid_points,
        threshold_db,
        grid,
        params,
        Execution::default(),
    )
}

fn normalize_target(target: &BTreeSet<(i64, i64)>) -> BTreeSet<(i64, i64)> {
    target
        .iter()
        .filter(|(a, b)| a != b)
        .map(|&(a, b)| (a.min(b), a.max(b)))
        .collect()
}

fn decode(mut k: usize, points: usize, dims: usize) -> Vec<usize> {
    let mut digits = vec![0; dims];
    for d in (0..dims).rev() {
        digits[d] = k % points;
        k /= points;
    }
    digits
}

/// Exhaustive search over `phase_grid_points` phases per swept tone for the
/// thresholded graph closest to `target`. Grid points are visited in
/// lexicographic order of the phase vector and only a strict improvement
/// replaces the incumbent, so ties go to the smallest vector.
#[allow(clippy::too_many_arguments)]
pub fn search_phases_with(
    scheme: &PumpScheme,
    swept_tones: &[usize],
    target: &BTreeSet<(i64, i64)>,
    phase_grid_points: usize,
    threshold_db: f64,
    grid: &ModeGrid,
    params: &DeviceParams,
    exec: Execution,
) -> Result<SearchResult> {
    if phase_grid_points < 4 {
        return Err(Error::InvalidArgument(format!(
            "phase search needs at least 4 points, got {phase_grid_points}"
        )));
    }
    if swept_tones.is_empty() {
        return Err(Error::InvalidArgument("no tones to sweep".into()));
    }
    let mut seen = BTreeSet::new();
    for &t in swept_tones {
        if t >= scheme.len() || !seen.insert(t) {
            return Err(Error::InvalidArgument(format!(
                "swept tone {t} is out of range or repeated"
            )));
        }
    }
    let dims = swept_tones.len();
    let total = phase_grid_points
        .checked_pow(dims as u32)
        .filter(|&t| t <= 1 << 20)
        .ok_or_else(|| Error::InvalidArgument("phase grid too large".into()))?;
    let phases = phase_grid(phase_grid_points);
    let target = normalize_target(target);
    let off = simulate(grid, params, &scheme.pump_off())?;

    let build = |k: usize| -> Result<PumpScheme> {
        let mut s = scheme.clone();
        for (d, &digit) in decode(k, phase_grid_points, dims).iter().enumerate() {
            s = s.with_phase(swept_tones[d], phases[digit])?;
        }
        Ok(s)
    };
    let scores: Vec<Result<Option<usize>>> = exec.map(total, |k| {
        let s = build(k)?;
        let on = match simulate(grid, params, &s) {
            Ok(on) => on,
            Err(Error::AboveThreshold { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };
        let db = crate::scattering::normalize_pump_off(&on, &off)?;
        let edges = extract_graph(&db, threshold_db).edge_keys();
        Ok(Some(edges.symmetric_difference(&target).count()))
    });
    let mut best: Option<(usize, usize)> = None;
    let mut skipped = 0;
    for (k, score) in scores.into_iter().enumerate() {
        match score? {
            Some(v) => {
                if best.is_none_or(|(_, b)| v < b) {
                    best = Some((k, v));
                }
            }
            None => skipped += 1,
        }
    }
    let Some((k, objective)) = best else {
        return Err(Error::AboveThreshold {
            condition: f64::NAN,
            margin: f64::NAN,
            phase: None,
        });
    };
    let best_scheme = build(k)?;
    let on = simulate(grid, params, &best_scheme)?;
    let db: DbMatrix = crate::scattering::normalize_pump_off(&on, &off)?;
    let graph = extract_graph(&db, threshold_db);
    let achieved = graph.edge_keys();
    let report = analyze_topology(&graph);
    Ok(SearchResult {
        swept_tones: swept_tones.to_vec(),
        best_phases: decode(k, phase_grid_points, dims)
            .into_iter()
            .map(|d| phases[d])
            .collect(),
        scheme: best_scheme,
        objective,
        missing: target.difference(&achieved).copied().collect(),
        extra: achieved.difference(&target).copied().collect(),
        graph,
        report,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, TAU};

    #[test]
    fn decode_is_lexicographic() {
        assert_eq!(decode(0, 4, 2), vec![0, 0]);
        assert_eq!(decode(1, 4, 2), vec![0, 1]);
        assert_eq!(decode(4, 4, 2), vec![1, 0]);
    }

    #[test]
    fn zero_objective_at_start_point() {
        let grid = ModeGrid::new(TAU * 4.2e9, TAU * 0.1e6, 8).unwrap();
        let params = DeviceParams::new(TAU * 4.2e9, TAU * 112e6).unwrap();
        let g = params.strength_for_ratio(0.077);
        let scheme = PumpScheme::balanced(&[-4, 0, 4], &[0.0, 0.0, PI], g).unwrap();
        let on = simulate(&grid, &params, &scheme).unwrap();
        let off = simulate(&grid, &params, &scheme.pump_off()).unwrap();
        let db = crate::scattering::normalize_pump_off(&on, &off).unwrap();
        let target = extract_graph(&db, -20.0).edge_keys();
        let r = search_phases(&scheme, &[2], &target, 8, -20.0, &grid, &params).unwrap();
        assert_eq!(r.objective, 0);
        assert!(r.missing.is_empty() && r.extra.is_empty());
        assert!(r.best_phases[0] <= PI + 1e-12);
    }
}
