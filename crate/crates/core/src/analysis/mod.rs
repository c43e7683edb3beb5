//! Pump-phase sweeps, `(g, γ)` fitting and phase search.

pub mod fit;
pub mod search;
pub mod sweep;

pub use fit::{fit_parameters, fit_parameters_with, FitData, FitRange, FitResult, ValleyStats};
pub use search::{search_phases, search_phases_with, SearchResult};
pub use sweep::{phase_grid, phase_sweep, phase_sweep_with, PhaseSweepResult, Track, TrackKind};

use crate::Error;

/// Attach a phase to an above-threshold error.
pub(crate) fn at_phase(err: Error, phase: f64) -> Error {
    match err {
        Error::AboveThreshold {
            condition, margin, ..
        } => Error::AboveThreshold {
            condition,
            margin,
            phase: Some(phase),
        },
        other => other,
    }
}
