use nalgebra::DMatrix;
use serde::Serialize;

use crate::model::{DeviceParams, ModeGrid, PumpScheme};
use crate::scattering::{
    normalize_pump_off_complex, pump_off_diagonal, simulate, Normalization, ScatteringMatrix,
};
use crate::{Complex, Error, Execution, Result};

/// Closed sampling interval of one fit axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitRange {
    pub min: f64,
    pub max: f64,
}

impl FitRange {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && min > 0.0 && max > min) {
            return Err(Error::InvalidArgument(format!(
                "fit range must satisfy 0 < min < max, got [{min}, {max}]"
            )));
        }
        Ok(Self { min, max })
    }

    /// `points` evenly spaced samples including both ends.
    pub fn samples(&self, points: usize) -> Vec<f64> {
        let h = (self.max - self.min) / (points - 1) as f64;
        (0..points)
            .map(|k| {
                if k + 1 == points {
                    self.max
                } else {
                    self.min + h * k as f64
                }
            })
            .collect()
    }

    fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.min, self.max)
    }
}

/// Measured matrix, normalized to its own pump-off reference.
#[derive(Debug, Clone, PartialEq)]
pub struct FitData {
    normalized: DMatrix<Complex>,
    grid: ModeGrid,
}

impl FitData {
    /// Accept an already pump-off relative matrix, or a raw one together
    /// with its pump-off reference.
    pub fn new(measured: &ScatteringMatrix, reference: Option<&ScatteringMatrix>) -> Result<Self> {
        let normalized = match (measured.normalization(), reference) {
            (Normalization::PumpOffRelative, None) => measured.matrix().clone(),
            (Normalization::PumpOffRelative, Some(_)) => {
                return Err(Error::InvalidArgument(
                    "measured matrix is already pump-off relative; drop the reference".into(),
                ))
            }
            (Normalization::Raw, Some(off)) => {
                normalize_pump_off_complex(measured, off)?.into_matrix()
            }
            (Normalization::Raw, None) => {
                return Err(Error::InvalidArgument(
                    "raw measured matrix needs a pump-off reference".into(),
                ))
            }
        };
        Ok(Self {
            normalized,
            grid: *measured.grid(),
        })
    }

    pub fn matrix(&self) -> &DMatrix<Complex> {
        &self.normalized
    }

    pub fn grid(&self) -> &ModeGrid {
        &self.grid
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValleyStats {
    /// Variance of `d` along `ω₀g/γ = ridge_ratio` over the γ samples.
    pub along_variance: f64,
    /// Variance of `d` over the g samples at the fitted γ.
    pub across_variance: f64,
    /// Samples of the across line that were above threshold and skipped.
    pub across_skipped: usize,
}

impl ValleyStats {
    pub fn ratio(&self) -> f64 {
        self.along_variance / self.across_variance
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub best_g: f64,
    pub best_gamma: f64,
    pub distance: f64,
    pub ridge_ratio: f64,
    pub g_samples: Vec<f64>,
    pub gamma_samples: Vec<f64>,
    /// `surface[i][j] = d(g_i, γ_j)`; above-threshold cells are infinite.
    pub surface: Vec<Vec<f64>>,
    /// Grid minimum before refinement, as `(g, γ, d)`.
    pub grid_best: (f64, f64, f64),
    pub valley: ValleyStats,
}

struct Model<'a> {
    data: &'a FitData,
    shape: &'a PumpScheme,
    resonance: f64,
}

impl Model<'_> {
    /// `d(g, γ)`; `None` above threshold.
    fn distance(&self, g: f64, gamma: f64) -> Result<Option<f64>> {
        let params = DeviceParams::new(self.resonance, gamma)?;
        let scheme = self.shape.with_balanced_strength(g)?;
        let s = match simulate(&self.data.grid, &params, &scheme) {
            Ok(s) => s,
            Err(Error::AboveThreshold { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };
        let off = pump_off_diagonal(&self.data.grid, &params);
        let measured = &self.data.normalized;
        let dim = measured.nrows();
        let model = DMatrix::from_fn(dim, dim, |i, j| s.matrix()[(i, j)] / off[j]);
        let mut overlap = Complex::new(0.0, 0.0);
        for d in 0..dim {
            let (a, b) = (measured[(d, d)], model[(d, d)]);
            if a.norm() > 0.0 && b.norm() > 0.0 {
                overlap += (a / a.norm()) * (b / b.norm()).conj();
            }
        }
        let align = if overlap.norm() > 0.0 {
            overlap / overlap.norm()
        } else {
            Complex::new(1.0, 0.0)
        };
        let sum: f64 = measured
            .iter()
            .zip(model.iter())
            .map(|(m, t)| (m - t * align).norm_sqr())
            .sum();
        Ok(Some(sum.sqrt()))
    }

    fn finite(&self, g: f64, gamma: f64) -> Result<f64> {
        Ok(self.distance(g, gamma)?.unwrap_or(f64::INFINITY))
    }
}

fn variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

/// Grid scan with the default execution strategy.
pub fn fit_parameters(
    data: &FitData,
    shape: &PumpScheme,
    resonance_frequency: f64,
    g_range: FitRange,
    gamma_range: FitRange,
    grid_points: usize,
) -> Result<FitResult> {
    fit_parameters_with(
        data,
        shape,
        resonance_frequency,
        g_range,
        gamma_range,
        grid_points,
        Execution::default(),
    )
}

/// Fit `(g, γ)` by minimizing `d = ‖S_meas − e^{iθ}S_model(g, γ)‖_F`.
///
/// Both matrices are normalized column-wise to their own pump-off
/// reflection; `θ` aligns the mean diagonal phase. The pump `shape` fixes
/// offsets and phases, and every tone gets strength `g`. The surface is
/// sampled on a `grid_points²` lattice, then coordinate descent refines
/// the best cell.
pub fn fit_parameters_with(
    data: &FitData,
    shape: &PumpScheme,
    resonance_frequency: f64,
    g_range: FitRange,
    gamma_range: FitRange,
    grid_points: usize,
    exec: Execution,
) -> Result<FitResult> {
    if grid_points < 4 {
        return Err(Error::InvalidArgument(format!(
            "fit needs at least 4 points per axis, got {grid_points}"
        )));
    }
    if !(resonance_frequency.is_finite() && resonance_frequency > 0.0) {
        return Err(Error::InvalidArgument(
            "resonance frequency must be positive".into(),
        ));
    }
    let model = Model {
        data,
        shape,
        resonance: resonance_frequency,
    };
    let g_samples = g_range.samples(grid_points);
    let gamma_samples = gamma_range.samples(grid_points);
    let cells = exec.map(grid_points * grid_points, |k| {
        model.finite(g_samples[k / grid_points], gamma_samples[k % grid_points])
    });
    let mut surface = vec![Vec::with_capacity(grid_points); grid_points];
    let mut best = (0usize, 0usize, f64::INFINITY);
    for (k, cell) in cells.into_iter().enumerate() {
        let d = cell?;
        let (i, j) = (k / grid_points, k % grid_points);
        if d < best.2 {
            best = (i, j, d);
        }
        surface[i].push(d);
    }
    if !best.2.is_finite() {
        return Err(Error::FitInfeasible);
    }
    let grid_best = (g_samples[best.0], gamma_samples[best.1], best.2);

    let (mut g, mut gamma, mut d) = grid_best;
    let mut hg = (g_range.max - g_range.min) / (grid_points - 1) as f64;
    let mut hgamma = (gamma_range.max - gamma_range.min) / (grid_points - 1) as f64;
    let tol_g = 1e-9 * g_range.max;
    let tol_gamma = 1e-9 * gamma_range.max;
    for _ in 0..200 {
        if hg < tol_g && hgamma < tol_gamma {
            break;
        }
        let mut moved = false;
        for (dg, dgamma) in [(hg, 0.0), (-hg, 0.0), (0.0, hgamma), (0.0, -hgamma)] {
            let cg = g_range.clamp(g + dg);
            let cgamma = gamma_range.clamp(gamma + dgamma);
            let cd = model.finite(cg, cgamma)?;
            if cd < d {
                (g, gamma, d) = (cg, cgamma, cd);
                moved = true;
            }
        }
        if !moved {
            hg *= 0.5;
            hgamma *= 0.5;
        }
    }

    let ridge_ratio = resonance_frequency * g / gamma;
    let along: Vec<f64> = exec
        .map(grid_points, |j| {
            let gj = ridge_ratio * gamma_samples[j] / resonance_frequency;
            model.finite(gj, gamma_samples[j])
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let across_all: Vec<f64> = exec
        .map(grid_points, |i| model.finite(g_samples[i], gamma))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let across: Vec<f64> = across_all.iter().copied().filter(|v| v.is_finite()).collect();
    let valley = ValleyStats {
        along_variance: variance(&along),
        across_variance: if across.len() >= 2 {
            variance(&across)
        } else {
            f64::NAN
        },
        across_skipped: across_all.len() - across.len(),
    };

    Ok(FitResult {
        best_g: g,
        best_gamma: gamma,
        distance: d,
        ridge_ratio,
        g_samples,
        gamma_samples,
        surface,
        grid_best,
        valley,
    })
}
