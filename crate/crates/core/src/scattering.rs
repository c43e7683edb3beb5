//! Harmonic-balance assembly, scattering matrix and pump-off normalization.
//!
//! [`SystemMatrix`] stores the operator `L = −iM` acting on the interleaved
//! amplitude vector, so that `L·ā = √γ·ā_in` reads directly as the linearized
//! equations of motion. Row `a_i` carries `i(ω₀ − ω_i) + γ/2` on the diagonal
//! and `−i·ω₀g_k` in the `a*_j` column of every coupling `(i, j)`; the `a*_i`
//! row is its conjugate mirror. The scattering matrix is
//! `S = iK M⁻¹ K − I = γ·L⁻¹ − I`.

use nalgebra::DMatrix;

use crate::basis::{self, Component};
use crate::model::{resolve_couplings, CouplingSet, DeviceParams, ModeGrid, PumpScheme};
use crate::{Complex, Error, Result};

/// Condition estimate above which the system counts as past oscillation threshold.
pub const DEFAULT_CONDITION_CAP: f64 = 1e12;

/// Magnitudes below this are clamped when converting to dB.
pub const MAGNITUDE_FLOOR: f64 = 1e-12;

/// dB value reported for clamped magnitudes.
pub const DB_FLOOR: f64 = -240.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrix {
    operator: DMatrix<Complex>,
    k_coupling: f64,
    grid: ModeGrid,
}

impl SystemMatrix {
    /// The assembled operator `−iM`.
    pub fn operator(&self) -> &DMatrix<Complex> {
        &self.operator
    }

    /// The harmonic-balance matrix `M = i·operator`.
    pub fn m(&self) -> DMatrix<Complex> {
        self.operator.map(|z| z * Complex::i())
    }

    /// Diagonal entry of `K`, i.e. `√γ`.
    pub fn k_coupling(&self) -> f64 {
        self.k_coupling
    }

    pub fn grid(&self) -> &ModeGrid {
        &self.grid
    }

    pub fn dimension(&self) -> usize {
        self.operator.nrows()
    }
}

pub fn assemble_system(
    grid: &ModeGrid,
    params: &DeviceParams,
    couplings: &CouplingSet,
) -> Result<SystemMatrix> {
    let n = grid.mode_count();
    let dim = 2 * n;
    let half_gamma = params.port_coupling() / 2.0;
    let w0 = params.resonance_frequency();
    let mut op = DMatrix::<Complex>::zeros(dim, dim);

    for (p, index) in grid.indices().enumerate() {
        let detuning = w0 - grid.mode_frequency(index);
        op[(basis::slot(p, Component::A), basis::slot(p, Component::A))] =
            Complex::new(half_gamma, detuning);
        op[(basis::slot(p, Component::Conj), basis::slot(p, Component::Conj))] =
            Complex::new(half_gamma, -detuning);
    }

    let minus_i = Complex::new(0.0, -1.0);
    for c in couplings.entries() {
        let (lo, hi) = match (grid.position(c.low), grid.position(c.high)) {
            (Some(lo), Some(hi)) => (lo, hi),
            _ => {
                return Err(Error::Inconsistent(format!(
                    "coupling ({}, {}) outside grid ±{}",
                    c.low,
                    c.high,
                    grid.half_span()
                )))
            }
        };
        let v = minus_i * c.strength;
        let a_lo = basis::slot(lo, Component::A);
        let b_lo = basis::slot(lo, Component::Conj);
        let a_hi = basis::slot(hi, Component::A);
        let b_hi = basis::slot(hi, Component::Conj);
        op[(a_lo, b_hi)] += v;
        op[(b_lo, a_hi)] += v.conj();
        if lo != hi {
            op[(a_hi, b_lo)] += v;
            op[(b_hi, a_lo)] += v.conj();
        }
    }

    Ok(SystemMatrix {
        operator: op,
        k_coupling: params.port_coupling().sqrt(),
        grid: *grid,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Normalization {
    Raw,
    PumpOffRelative,
}

impl Normalization {
    pub fn tag(self) -> &'static str {
        match self {
            Normalization::Raw => "raw",
            Normalization::PumpOffRelative => "pump_off_relative",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "raw" => Some(Normalization::Raw),
            "pump_off_relative" => Some(Normalization::PumpOffRelative),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringMatrix {
    s: DMatrix<Complex>,
    normalization: Normalization,
    grid: ModeGrid,
    condition: Option<f64>,
}

impl ScatteringMatrix {
    /// Wrap an existing matrix (e.g. loaded from disk) after a shape check.
    pub fn from_parts(
        s: DMatrix<Complex>,
        grid: ModeGrid,
        normalization: Normalization,
    ) -> Result<Self> {
        let dim = 2 * grid.mode_count();
        if s.nrows() != dim || s.ncols() != dim {
            return Err(Error::Format(format!(
                "matrix is {}x{}, grid of {} modes needs {dim}x{dim}",
                s.nrows(),
                s.ncols(),
                grid.mode_count()
            )));
        }
        Ok(Self {
            s,
            normalization,
            grid,
            condition: None,
        })
    }

    pub fn matrix(&self) -> &DMatrix<Complex> {
        &self.s
    }

    pub fn into_matrix(self) -> DMatrix<Complex> {
        self.s
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn grid(&self) -> &ModeGrid {
        &self.grid
    }

    /// 1-norm condition estimate of the system it was solved from.
    pub fn condition(&self) -> Option<f64> {
        self.condition
    }

    pub fn dimension(&self) -> usize {
        self.s.nrows()
    }

    /// Entry for output `(mode, component)` driven by input `(mode, component)`.
    pub fn entry(
        &self,
        out_index: i64,
        out_component: Component,
        in_index: i64,
        in_component: Component,
    ) -> Option<Complex> {
        let r = basis::slot(self.grid.position(out_index)?, out_component);
        let c = basis::slot(self.grid.position(in_index)?, in_component);
        Some(self.s[(r, c)])
    }
}

fn column_one_norm(m: &DMatrix<Complex>) -> f64 {
    m.column_iter()
        .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

impl SystemMatrix {
    /// Slot sets that the operator couples, each ascending, ordered by first slot.
    ///
    /// After permutation the operator is block diagonal over these sets.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let dim = self.dimension();
        let mut parent: Vec<usize> = (0..dim).collect();
        for c in 0..dim {
            for r in 0..dim {
                if r != c && self.operator[(r, c)] != Complex::new(0.0, 0.0) {
                    let (a, b) = (find(&mut parent, r), find(&mut parent, c));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut slot_of_root = vec![usize::MAX; dim];
        for x in 0..dim {
            let root = find(&mut parent, x);
            if slot_of_root[root] == usize::MAX {
                slot_of_root[root] = groups.len();
                groups.push(Vec::new());
            }
            groups[slot_of_root[root]].push(x);
        }
        groups
    }

    /// Smallest real part of the operator spectrum, in units of γ.
    ///
    /// Free modes decay at `γ/2`, giving 1/2 with pumps off; the linear
    /// steady state exists only while the margin stays positive.
    pub fn stability_margin(&self) -> Result<f64> {
        let gamma = self.k_coupling * self.k_coupling;
        let mut worst = f64::INFINITY;
        for block in self.blocks() {
            let sub = self.operator.select_rows(&block).select_columns(&block);
            let re = block_min_real_part(sub)?;
            worst = worst.min(re / gamma);
        }
        Ok(worst)
    }
}

fn block_min_real_part(sub: DMatrix<Complex>) -> Result<f64> {
    if sub.nrows() == 1 {
        return Ok(sub[(0, 0)].re);
    }
    let schur = nalgebra::Schur::try_new(sub, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Inconsistent("eigenvalue iteration did not converge".into()))?;
    let eig = schur
        .eigenvalues()
        .ok_or_else(|| Error::Inconsistent("complex Schur form not triangular".into()))?;
    Ok(eig.iter().map(|z| z.re).fold(f64::INFINITY, f64::min))
}

/// Positive-definite Hermitian part; sufficient for a positive spectrum.
fn hermitian_part_positive(sub: &DMatrix<Complex>) -> bool {
    let n = sub.nrows();
    // real embedding [[A, -B], [B, A]] of H = A + iB; complex Cholesky
    // in nalgebra does not reject indefinite input
    let real = DMatrix::<f64>::from_fn(2 * n, 2 * n, |r, c| {
        let (i, j) = (r % n, c % n);
        let h = (sub[(i, j)] + sub[(j, i)].conj()) * 0.5;
        match (r < n, c < n) {
            (true, true) | (false, false) => h.re,
            (true, false) => -h.im,
            (false, true) => h.im,
        }
    });
    real.cholesky().is_some()
}

pub fn scattering_matrix(sys: &SystemMatrix) -> Result<ScatteringMatrix> {
    scattering_matrix_with_cap(sys, DEFAULT_CONDITION_CAP)
}

/// Solve for `S`.
///
/// Fails with above-threshold when the spectrum reaches the imaginary axis
/// or the 1-norm condition number exceeds `cap`. Each coupled block is
/// factored separately by dense LU with partial pivoting; the condition
/// number is exact for the 1-norm and equals that of the full operator.
pub fn scattering_matrix_with_cap(sys: &SystemMatrix, cap: f64) -> Result<ScatteringMatrix> {
    let dim = sys.dimension();
    let gamma = sys.k_coupling * sys.k_coupling;
    let mut s = DMatrix::<Complex>::zeros(dim, dim);
    let mut norm = 0.0f64;
    let mut inv_norm = 0.0f64;
    let mut margin = f64::INFINITY;
    for block in sys.blocks() {
        let sub = sys.operator.select_rows(&block).select_columns(&block);
        norm = norm.max(column_one_norm(&sub));
        if !hermitian_part_positive(&sub) {
            margin = margin.min(block_min_real_part(sub.clone())? / gamma);
        }
        let inverse = match sub.lu().try_inverse() {
            Some(inv) => inv,
            None => {
                return Err(Error::AboveThreshold {
                    condition: f64::INFINITY,
                    margin: sys.stability_margin()?,
                    phase: None,
                })
            }
        };
        inv_norm = inv_norm.max(column_one_norm(&inverse));
        for (bc, &c) in block.iter().enumerate() {
            for (br, &r) in block.iter().enumerate() {
                s[(r, c)] = inverse[(br, bc)] * gamma;
            }
        }
    }
    let condition = norm * inv_norm;
    if !condition.is_finite() || condition > cap || margin <= 0.0 {
        if margin.is_infinite() {
            margin = sys.stability_margin()?;
        }
        return Err(Error::AboveThreshold {
            condition,
            margin,
            phase: None,
        });
    }
    for d in 0..dim {
        s[(d, d)] -= Complex::new(1.0, 0.0);
    }
    Ok(ScatteringMatrix {
        s,
        normalization: Normalization::Raw,
        grid: sys.grid,
        condition: Some(condition),
    })
}

/// Resolve, assemble and solve in one step.
pub fn simulate(
    grid: &ModeGrid,
    params: &DeviceParams,
    scheme: &PumpScheme,
) -> Result<ScatteringMatrix> {
    simulate_with_cap(grid, params, scheme, DEFAULT_CONDITION_CAP)
}

pub fn simulate_with_cap(
    grid: &ModeGrid,
    params: &DeviceParams,
    scheme: &PumpScheme,
    cap: f64,
) -> Result<ScatteringMatrix> {
    let couplings = resolve_couplings(grid, scheme, params);
    let sys = assemble_system(grid, params, &couplings)?;
    scattering_matrix_with_cap(&sys, cap)
}

/// Pump-off reflection `S_jj` of every slot, computed in closed form.
pub fn pump_off_diagonal(grid: &ModeGrid, params: &DeviceParams) -> Vec<Complex> {
    let half_gamma = params.port_coupling() / 2.0;
    let mut out = Vec::with_capacity(2 * grid.mode_count());
    for index in grid.indices() {
        let detuning = params.resonance_frequency() - grid.mode_frequency(index);
        let a = Complex::new(half_gamma, -detuning) / Complex::new(half_gamma, detuning);
        out.push(a);
        out.push(a.conj());
    }
    out
}

/// Convert a magnitude to dB with the floor applied.
pub fn to_db(magnitude: f64) -> f64 {
    if magnitude < MAGNITUDE_FLOOR {
        DB_FLOOR
    } else {
        20.0 * magnitude.log10()
    }
}

/// Real `2n×2n` dB matrix in the interleaved basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DbMatrix {
    values: DMatrix<f64>,
    grid: ModeGrid,
}

impl DbMatrix {
    pub fn new(values: DMatrix<f64>, grid: ModeGrid) -> Result<Self> {
        let dim = 2 * grid.mode_count();
        if values.nrows() != dim || values.ncols() != dim {
            return Err(Error::Format(format!(
                "dB matrix is {}x{}, expected {dim}x{dim}",
                values.nrows(),
                values.ncols()
            )));
        }
        Ok(Self { values, grid })
    }

    /// dB magnitude of every slot without normalization.
    pub fn from_raw(s: &ScatteringMatrix) -> Self {
        Self {
            values: s.matrix().map(|z| to_db(z.norm())),
            grid: *s.grid(),
        }
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn grid(&self) -> &ModeGrid {
        &self.grid
    }

    /// Per-mode `n×n` reduction (maximum over each 2×2 block).
    pub fn mode_reduced(&self) -> DMatrix<f64> {
        basis::reduce_to_modes(&self.values)
    }

    /// Mode-level dB value for output `row` driven by input `col`.
    pub fn mode_db(&self, row: i64, col: i64) -> Option<f64> {
        let r = self.grid.position(row)?;
        let c = self.grid.position(col)?;
        let v = &self.values;
        let (r, c) = (2 * r, 2 * c);
        Some(
            v[(r, c)]
                .max(v[(r + 1, c)])
                .max(v[(r, c + 1)])
                .max(v[(r + 1, c + 1)]),
        )
    }
}

fn check_same_basis(on: &ScatteringMatrix, off: &ScatteringMatrix) -> Result<()> {
    if on.grid() != off.grid() || on.dimension() != off.dimension() {
        return Err(Error::InvalidArgument(
            "pump-on and pump-off matrices are on different grids".into(),
        ));
    }
    Ok(())
}

fn pump_off_references(on: &ScatteringMatrix, off: &ScatteringMatrix) -> Result<Vec<Complex>> {
    check_same_basis(on, off)?;
    let grid = off.grid();
    (0..off.dimension())
        .map(|j| {
            let d = off.matrix()[(j, j)];
            if d.norm() < MAGNITUDE_FLOOR {
                Err(Error::DegenerateNormalization {
                    mode: grid.index_at(j / 2),
                })
            } else {
                Ok(d)
            }
        })
        .collect()
}

/// `20·log10(|S_on,ij| / |S_off,jj|)`, column-wise.
pub fn normalize_pump_off(on: &ScatteringMatrix, off: &ScatteringMatrix) -> Result<DbMatrix> {
    let refs = pump_off_references(on, off)?;
    let values = DMatrix::from_fn(on.dimension(), on.dimension(), |i, j| {
        to_db(on.matrix()[(i, j)].norm() / refs[j].norm())
    });
    Ok(DbMatrix {
        values,
        grid: *on.grid(),
    })
}

/// Complex column-wise normalization `S_on,ij / S_off,jj`.
pub fn normalize_pump_off_complex(
    on: &ScatteringMatrix,
    off: &ScatteringMatrix,
) -> Result<ScatteringMatrix> {
    let refs = pump_off_references(on, off)?;
    let s = DMatrix::from_fn(on.dimension(), on.dimension(), |i, j| {
        on.matrix()[(i, j)] / refs[j]
    });
    Ok(ScatteringMatrix {
        s,
        normalization: Normalization::PumpOffRelative,
        grid: *on.grid(),
        condition: on.condition,
    })
}
