//! Quadrature-basis scattering, symplectic checks and Gaussian covariances.
//!
//! Per mode, `x = (a + a*)/√2` and `p = (a − a*)/(√2 i)`, so the quadrature
//! matrix is `S_x = U S U†` with `U = ⊕ (1/√2)[[1, 1], [−i, i]]`. Covariances
//! use the same interleaved `(x_j, p_j)` ordering.

use nalgebra::{DMatrix, DVector, Matrix2};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::model::ModeGrid;
use crate::scattering::ScatteringMatrix;
use crate::{Complex, Error, Execution, Result};

/// Largest imaginary part tolerated when taking `Re(U S U†)`.
pub const IMAG_TOLERANCE: f64 = 1e-9;

/// Default vacuum quadrature variance (natural units).
pub const DEFAULT_VACUUM_SCALE: f64 = 0.5;

/// Default relative cut for [`covariance_pattern`] and [`scattering_pattern`].
pub const DEFAULT_PATTERN_RELATIVE: f64 = 1e-2;

/// Samples per Monte Carlo chunk; each chunk owns one generator stream.
pub const SAMPLE_CHUNK: usize = 2048;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureScattering {
    s_x: DMatrix<f64>,
    imag_residual: f64,
}

impl QuadratureScattering {
    /// Wrap a real quadrature matrix directly.
    pub fn from_real(s_x: DMatrix<f64>) -> Result<Self> {
        if s_x.nrows() != s_x.ncols() || s_x.nrows() % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "quadrature matrix must be square with even size, got {}x{}",
                s_x.nrows(),
                s_x.ncols()
            )));
        }
        Ok(Self {
            s_x,
            imag_residual: 0.0,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.s_x
    }

    pub fn imag_residual(&self) -> f64 {
        self.imag_residual
    }

    pub fn dimension(&self) -> usize {
        self.s_x.nrows()
    }

    /// Sub-block on the given grid positions (both quadratures of each).
    pub fn restrict(&self, positions: &[usize]) -> Self {
        let slots = quadrature_slots(positions);
        Self {
            s_x: self.s_x.select_rows(&slots).select_columns(&slots),
            imag_residual: self.imag_residual,
        }
    }
}

fn quadrature_slots(positions: &[usize]) -> Vec<usize> {
    positions.iter().flat_map(|&p| [2 * p, 2 * p + 1]).collect()
}

fn canonical_block() -> Matrix2<Complex> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    Matrix2::new(
        Complex::new(r, 0.0),
        Complex::new(r, 0.0),
        Complex::new(0.0, -r),
        Complex::new(0.0, r),
    )
}

fn to_quadrature_matrix(s: &DMatrix<Complex>) -> Result<QuadratureScattering> {
    let dim = s.nrows();
    if s.ncols() != dim || dim % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "scattering matrix must be square with even size, got {}x{}",
            dim,
            s.ncols()
        )));
    }
    let u = canonical_block();
    let u_dag = u.adjoint();
    let mut s_x = DMatrix::<f64>::zeros(dim, dim);
    let mut residual = 0.0f64;
    for bc in (0..dim).step_by(2) {
        for br in (0..dim).step_by(2) {
            let block: Matrix2<Complex> = s.fixed_view::<2, 2>(br, bc).into_owned();
            let q = u * block * u_dag;
            for (k, z) in q.iter().enumerate() {
                residual = residual.max(z.im.abs());
                s_x[(br + k % 2, bc + k / 2)] = z.re;
            }
        }
    }
    if residual > IMAG_TOLERANCE {
        return Err(Error::BasisInconsistency {
            residual,
            tolerance: IMAG_TOLERANCE,
        });
    }
    Ok(QuadratureScattering {
        s_x,
        imag_residual: residual,
    })
}

/// `Re(U S U†)`, failing when the discarded imaginary part exceeds 1e−9.
pub fn to_quadrature(s: &ScatteringMatrix) -> Result<QuadratureScattering> {
    to_quadrature_matrix(s.matrix())
}

/// Block-diagonal symplectic form with `[[0, 1], [−1, 0]]` per mode.
pub fn symplectic_form(dim: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(dim, dim);
    for k in (0..dim).step_by(2) {
        omega[(k, k + 1)] = 1.0;
        omega[(k + 1, k)] = -1.0;
    }
    omega
}

/// Max-norm of `S_x Ω S_xᵀ − Ω`.
pub fn symplectic_defect(sx: &QuadratureScattering) -> f64 {
    let omega = symplectic_form(sx.dimension());
    let m = &sx.s_x * &omega * sx.s_x.transpose() - omega;
    m.abs().max()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    v: DMatrix<f64>,
    vacuum_scale: f64,
}

impl CovarianceMatrix {
    /// Validate symmetry (1e−12, relative to the largest entry when above 1)
    /// and positive semidefiniteness (eigenvalues ≥ −1e−10, same scaling).
    pub fn new(v: DMatrix<f64>, vacuum_scale: f64) -> Result<Self> {
        if v.nrows() != v.ncols() || v.nrows() % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "covariance must be square with even size, got {}x{}",
                v.nrows(),
                v.ncols()
            )));
        }
        if !(vacuum_scale.is_finite() && vacuum_scale > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "vacuum scale must be positive, got {vacuum_scale}"
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("covariance has non-finite entries".into()));
        }
        let scale = v.abs().max().max(1.0);
        let asym = (&v - v.transpose()).abs().max();
        if asym > 1e-12 * scale {
            return Err(Error::InvalidArgument(format!(
                "covariance is not symmetric (defect {asym:.3e})"
            )));
        }
        let lowest = v.clone().symmetric_eigenvalues().min();
        if lowest < -1e-10 * scale {
            return Err(Error::InvalidArgument(format!(
                "covariance is not positive semidefinite (eigenvalue {lowest:.3e})"
            )));
        }
        Ok(Self { v, vacuum_scale })
    }

    /// `vacuum_scale · I` over `modes` modes.
    pub fn vacuum(modes: usize, vacuum_scale: f64) -> Result<Self> {
        Self::new(DMatrix::identity(2 * modes, 2 * modes) * vacuum_scale, vacuum_scale)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn vacuum_scale(&self) -> f64 {
        self.vacuum_scale
    }

    pub fn dimension(&self) -> usize {
        self.v.nrows()
    }

    /// 2×2 block `⟨q_i q_j⟩` between grid positions `i` and `j`.
    pub fn block(&self, i: usize, j: usize) -> Matrix2<f64> {
        self.v.fixed_view::<2, 2>(2 * i, 2 * j).into_owned()
    }

    pub fn restrict(&self, positions: &[usize]) -> Self {
        let slots = quadrature_slots(positions);
        Self {
            v: self.v.select_rows(&slots).select_columns(&slots),
            vacuum_scale: self.vacuum_scale,
        }
    }
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

/// `V_out = S_x V_in S_xᵀ`, symmetrized.
pub fn propagate_covariance(
    sx: &QuadratureScattering,
    v_in: &CovarianceMatrix,
) -> Result<CovarianceMatrix> {
    if sx.dimension() != v_in.dimension() {
        return Err(Error::InvalidArgument(format!(
            "scattering is {0}x{0} but covariance is {1}x{1}",
            sx.dimension(),
            v_in.dimension()
        )));
    }
    let v = symmetrize(&sx.s_x * &v_in.v * sx.s_x.transpose());
    Ok(CovarianceMatrix {
        v,
        vacuum_scale: v_in.vacuum_scale,
    })
}

struct Moments {
    count: usize,
    mean: DVector<f64>,
    scatter: DMatrix<f64>,
}

impl Moments {
    fn merge(self, other: Moments) -> Moments {
        let n = self.count + other.count;
        let delta = &other.mean - &self.mean;
        let w = (self.count as f64) * (other.count as f64) / n as f64;
        let mean = &self.mean + &delta * (other.count as f64 / n as f64);
        let scatter = self.scatter + other.scatter + &delta * delta.transpose() * w;
        Moments {
            count: n,
            mean,
            scatter,
        }
    }
}

fn chunk_moments(sx: &DMatrix<f64>, seed: u64, chunk: usize, len: usize, sigma: f64) -> Moments {
    let dim = sx.nrows();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    let z = DMatrix::<f64>::from_fn(dim, len, |_, _| {
        let x: f64 = StandardNormal.sample(&mut rng);
        x * sigma
    });
    let mut y = sx * z;
    let mean = y.column_mean();
    for mut col in y.column_iter_mut() {
        col -= &mean;
    }
    let scatter = &y * y.transpose();
    Moments {
        count: len,
        mean,
        scatter,
    }
}

/// Empirical covariance of `sample_count` vacuum draws mapped through `S_x`,
/// using the default vacuum scale and execution strategy.
pub fn sample_covariance(
    sx: &QuadratureScattering,
    sample_count: usize,
    seed: u64,
) -> Result<CovarianceMatrix> {
    sample_covariance_with(sx, sample_count, seed, DEFAULT_VACUUM_SCALE, Execution::default())
}

/// Monte Carlo covariance estimate.
///
/// Samples are generated in chunks of [`SAMPLE_CHUNK`]; chunk `c` draws from
/// ChaCha20 seeded with `seed` on stream `c`, and chunk moments are merged in
/// chunk order. The result is bit-identical for any execution strategy.
pub fn sample_covariance_with(
    sx: &QuadratureScattering,
    sample_count: usize,
    seed: u64,
    vacuum_scale: f64,
    exec: Execution,
) -> Result<CovarianceMatrix> {
    if sample_count < 2 {
        return Err(Error::InvalidArgument(format!(
            "sample count must be at least 2, got {sample_count}"
        )));
    }
    if !(vacuum_scale.is_finite() && vacuum_scale > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "vacuum scale must be positive, got {vacuum_scale}"
        )));
    }
    let sigma = vacuum_scale.sqrt();
    let chunks = sample_count.div_ceil(SAMPLE_CHUNK);
    let parts = exec.map(chunks, |c| {
        let len = SAMPLE_CHUNK.min(sample_count - c * SAMPLE_CHUNK);
        chunk_moments(&sx.s_x, seed, c, len, sigma)
    });
    let total = parts
        .into_iter()
        .reduce(Moments::merge)
        .expect("at least one chunk");
    let v = symmetrize(total.scatter / (sample_count as f64 - 1.0));
    Ok(CovarianceMatrix { v, vacuum_scale })
}

/// Largest absolute entry of each `2×2` mode block, as an `n×n` matrix.
pub fn block_magnitudes(m: &DMatrix<f64>) -> DMatrix<f64> {
    crate::basis::reduce_to_modes(&m.abs())
}

/// Off-diagonal mode pairs `(i, j)`, `i < j`, whose block magnitude is at
/// least `relative` times the largest off-diagonal block magnitude.
pub fn relative_pattern(blocks: &DMatrix<f64>, grid: &ModeGrid, relative: f64) -> Vec<(i64, i64)> {
    let n = blocks.nrows();
    let sym = |i: usize, j: usize| blocks[(i, j)].max(blocks[(j, i)]);
    let mut peak = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            peak = peak.max(sym(i, j));
        }
    }
    if peak == 0.0 {
        return Vec::new();
    }
    let cut = relative * peak;
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if sym(i, j) >= cut {
                out.push((grid.index_at(i), grid.index_at(j)));
            }
        }
    }
    out
}

/// Off-diagonal pattern of a covariance matrix.
pub fn covariance_pattern(v: &CovarianceMatrix, grid: &ModeGrid, relative: f64) -> Vec<(i64, i64)> {
    relative_pattern(&block_magnitudes(&v.v), grid, relative)
}

/// Off-diagonal pattern of `|S|`.
pub fn scattering_pattern(s: &ScatteringMatrix, relative: f64) -> Vec<(i64, i64)> {
    let mags = s.matrix().map(|z| z.norm());
    relative_pattern(&block_magnitudes(&mags), s.grid(), relative)
}
