//! Multi-pump parametric mode scattering in a driven harmonic oscillator.
//!
//! The crate models a parametric oscillator pumped by several tones near twice
//! its resonance, measured on an orthogonal comb of equally spaced modes. From
//! the linearized equation of motion it builds the harmonic-balance system,
//! solves for the multi-mode scattering matrix, and offers the analyses built
//! on top of it:
//!
//! * [`model`]: mode grid, device parameters, pump schemes and coupling resolution
//! * [`scattering`]: system assembly, scattering matrix and pump-off normalization
//! * [`gaussian`]: quadrature transform, symplectic checks, covariance propagation
//!   and Monte Carlo estimation
//! * [`graphs`]: thresholded correlation graphs and topology classification
//! * [`analysis`]: pump-phase sweeps, parameter fitting and phase search
//! * [`io`]: configuration files, matrix containers and report formats
//! * [`cli`]: the `combscatter` command line
//!
//! Batch workloads (sweeps, fit grids, sampling) run on rayon when the
//! `parallel` feature is enabled, and sequentially otherwise. Results are
//! identical either way.

pub mod analysis;
pub mod basis;
pub mod cli;
pub mod error;
pub mod exec;
pub mod gaussian;
pub mod graphs;
pub mod io;
pub mod model;
pub mod scattering;

pub use error::{Error, Result};
pub use exec::Execution;

/// Complex scalar used throughout.
pub type Complex = num_complex::Complex64;

/// Tool version embedded in every output file.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
