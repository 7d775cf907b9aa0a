//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by model construction, bound evaluation, design solves,
/// and simulation.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// A vector or matrix did not have the expected dimension.
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// Invalid argument or configuration detected before any computation.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An aggregated Fisher information matrix was not positive definite.
    /// `theta_index` identifies the offending grid member when the failure
    /// occurred inside a worst-case evaluation.
    #[error("singular Fisher information matrix{}", match .theta_index {
        Some(l) => format!(" (parameter grid member {l})"),
        None => String::new(),
    })]
    SingularFim { theta_index: Option<usize> },

    /// No strictly feasible, positive-definite starting point exists for the
    /// solver (typically too few informative candidates for the budget).
    #[error("infeasible starting point: {0}")]
    InfeasibleStart(String),

    /// The constraint set is infeasible. `tau` is the smallest uniform cap
    /// relaxation factor found; `tau > 1` certifies that the requested caps
    /// cannot be met within the budget. `worst_param` is the binding
    /// parameter index.
    #[error("infeasible problem: caps require relaxation factor {tau:.3e} (parameter {worst_param})")]
    Infeasible { tau: f64, worst_param: usize },

    /// The iteration cap was reached before the convergence tolerance.
    #[error("solver reached the iteration cap ({iterations} Newton steps)")]
    MaxIterations { iterations: usize },

    /// Exhaustive enumeration was requested for more subsets than the guard
    /// allows.
    #[error("exhaustive search over {subsets} subsets exceeds the guard of {guard}")]
    TooLarge { subsets: u128, guard: u128 },

    /// Every evaluated subset had a singular Fisher information matrix.
    #[error("all evaluated subsets were singular")]
    AllSingular,

    /// An estimation grid was empty along some axis.
    #[error("empty estimation grid")]
    EmptyGrid,

    /// A candidate index was outside the grid.
    #[error("candidate index {index} out of range (grid size {size})")]
    IndexOutOfRange { index: usize, size: usize },

    /// Numerical failure inside a solver (factorization breakdown,
    /// non-finite intermediate).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// File output failed while writing a report.
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
