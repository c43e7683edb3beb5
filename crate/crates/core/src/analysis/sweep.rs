use std::f64::consts::TAU;

use serde::Serialize;

use crate::basis::Component;
use crate::model::{predicted_intermod_indices, DeviceParams, ModeGrid, PumpScheme};
use crate::scattering::{pump_off_diagonal, simulate, to_db};
use crate::{Error, Execution, Result};

use super::at_phase;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackKind {
    /// Idler `m_k − s`, read from the `a*` row.
    Second { tone: usize },
    /// Product `m_k − m_l + s`, read from the `a` row, with every contributing pair.
    Third { paths: Vec<(usize, usize)> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Track {
    pub kind: TrackKind,
    pub index: i64,
    /// Pump-off relative magnitude in dB at each phase.
    pub db: Vec<f64>,
}

impl Track {
    /// Column name, e.g. `I2_-32` or `I3_32`.
    pub fn name(&self) -> String {
        match self.kind {
            TrackKind::Second { .. } => format!("I2_{}", self.index),
            TrackKind::Third { .. } => format!("I3_{}", self.index),
        }
    }

    pub fn is_second_order(&self) -> bool {
        matches!(self.kind, TrackKind::Second { .. })
    }

    /// Contributing pump pairs; one for second-order tracks.
    pub fn path_count(&self) -> usize {
        match &self.kind {
            TrackKind::Second { .. } => 1,
            TrackKind::Third { paths } => paths.len(),
        }
    }

    /// `max − min` over the sweep.
    pub fn variation_db(&self) -> f64 {
        let max = self.db.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = self.db.iter().copied().fold(f64::INFINITY, f64::min);
        max - min
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseSweepResult {
    pub swept_tone: usize,
    pub signal_index: i64,
    pub phases: Vec<f64>,
    /// Second-order tracks in tone order, then third-order tracks by index.
    pub tracks: Vec<Track>,
}

impl PhaseSweepResult {
    pub fn track(&self, index: i64, second_order: bool) -> Option<&Track> {
        self.tracks
            .iter()
            .find(|t| t.index == index && t.is_second_order() == second_order)
    }
}

/// `2πk / steps` for `k = 0..steps`.
pub fn phase_grid(steps: usize) -> Vec<f64> {
    (0..steps).map(|k| TAU * k as f64 / steps as f64).collect()
}

pub fn phase_sweep(
    base: &PumpScheme,
    swept_tone: usize,
    steps: usize,
    signal_index: i64,
    grid: &ModeGrid,
    params: &DeviceParams,
) -> Result<PhaseSweepResult> {
    phase_sweep_with(base, swept_tone, steps, signal_index, grid, params, Execution::default())
}

/// Recompute `S` at each phase of one tone and record every intermodulation
/// product of the signal mode.
pub fn phase_sweep_with(
    base: &PumpScheme,
    swept_tone: usize,
    steps: usize,
    signal_index: i64,
    grid: &ModeGrid,
    params: &DeviceParams,
    exec: Execution,
) -> Result<PhaseSweepResult> {
    if steps < 8 {
        return Err(Error::InvalidArgument(format!(
            "sweep needs at least 8 steps, got {steps}"
        )));
    }
    if swept_tone >= base.len() {
        return Err(Error::InvalidArgument(format!(
            "tone {swept_tone} out of range ({} tones)",
            base.len()
        )));
    }
    let prediction = predicted_intermod_indices(grid, signal_index, base)?;
    let mut kinds: Vec<(TrackKind, i64)> = prediction
        .second_order
        .iter()
        .map(|p| (TrackKind::Second { tone: p.tone }, p.index))
        .collect();
    kinds.extend(prediction.third_order.iter().map(|p| {
        (
            TrackKind::Third {
                paths: p.paths.clone(),
            },
            p.index,
        )
    }));

    let phases = phase_grid(steps);
    let reference = pump_off_diagonal(grid, params);
    let signal_pos = grid.position(signal_index).expect("checked by prediction");
    let column = crate::basis::slot(signal_pos, Component::A);
    let norm = reference[column].norm();

    let rows: Vec<Result<Vec<f64>>> = exec.map(steps, |k| {
        let scheme = base.with_phase(swept_tone, phases[k])?;
        let s = simulate(grid, params, &scheme).map_err(|e| at_phase(e, phases[k]))?;
        Ok(kinds
            .iter()
            .map(|(kind, index)| {
                let component = match kind {
                    TrackKind::Second { .. } => Component::Conj,
                    TrackKind::Third { .. } => Component::A,
                };
                let z = s
                    .entry(*index, component, signal_index, Component::A)
                    .expect("predicted index on grid");
                to_db(z.norm() / norm)
            })
            .collect())
    });

    let mut tracks: Vec<Track> = kinds
        .into_iter()
        .map(|(kind, index)| Track {
            kind,
            index,
            db: Vec::with_capacity(steps),
        })
        .collect();
    for row in rows {
        for (t, v) in tracks.iter_mut().zip(row?) {
            t.db.push(v);
        }
    }
    Ok(PhaseSweepResult {
        swept_tone,
        signal_index,
        phases,
        tracks,
    })
}
