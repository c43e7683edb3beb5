use std::fmt;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("internal consistency: {0}")]
    Inconsistent(String),

    #[error(
        "parametric oscillation threshold reached{}: stability margin {margin:.3e}, condition estimate {condition:.3e}",
        phase_note(*.phase)
    )]
    AboveThreshold {
        condition: f64,
        margin: f64,
        phase: Option<f64>,
    },

    #[error("degenerate normalization: pump-off reflection of mode {mode} vanishes")]
    DegenerateNormalization { mode: i64 },

    #[error("basis inconsistency: imaginary residual {residual:.3e} exceeds {tolerance:.1e}")]
    BasisInconsistency { residual: f64, tolerance: f64 },

    #[error("fit infeasible: every grid cell is above threshold")]
    FitInfeasible,

    #[error("{0}")]
    Config(#[from] ConfigErrors),

    #[error("format: {0}")]
    Format(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

fn phase_note(phase: Option<f64>) -> String {
    match phase {
        Some(p) => format!(" at phase {p:.6} rad"),
        None => String::new(),
    }
}

impl Error {
    /// Stable machine-readable kind, used in CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::Inconsistent(_) => "internal-consistency",
            Error::AboveThreshold { .. } => "above-threshold",
            Error::DegenerateNormalization { .. } => "degenerate-normalization",
            Error::BasisInconsistency { .. } => "basis-inconsistency",
            Error::FitInfeasible => "fit-infeasible",
            Error::Config(_) => "config",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
        }
    }

    /// Process exit code: 2 validation, 3 above-threshold, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) => 4,
            Error::AboveThreshold { .. } | Error::FitInfeasible => 3,
            Error::Inconsistent(_) => 1,
            _ => 2,
        }
    }
}

/// One validation problem found in a configuration document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    /// 1-based line number, 0 when the issue has no location.
    pub line: usize,
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(f, "line {}: {}: {}", self.line, self.field, self.message)
        } else {
            write!(f, "{}: {}", self.field, self.message)
        }
    }
}

/// Every problem found while validating a configuration, in line order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<ConfigIssue>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} configuration error(s)", self.0.len())?;
        for issue in &self.0 {
            write!(f, "\n  {issue}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}
