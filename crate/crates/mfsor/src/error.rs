// SPDX-License-Identifier: MIT

//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors raised by grid construction, assembly, solvers, analysis and the harness.
#[derive(Debug, Error)]
pub enum MfsorError {
    /// Grid construction received invalid node counts, extents or coordinates.
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    /// A decomposition request cannot be satisfied on the given grid.
    #[error("invalid decomposition: {0}")]
    InvalidDecomposition(String),
    /// Problem data violates its invariants (for example a non-positive diffusivity).
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    /// Two arrays that must share a shape do not.
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    /// A relaxation set does not have one factor per sweep direction.
    #[error("invalid relaxation set: {0}")]
    InvalidRelaxation(String),
    /// A small dense system could not be solved because a pivot vanished.
    #[error("singular {size}x{size} system: pivot {pivot:e} at elimination step {step}")]
    SingularSystem { size: usize, step: usize, pivot: f64 },
    /// A multilevel splitting set does not sum to the matrix dimension.
    #[error("multilevel splitting sums to {sum}, matrix dimension is {dim}")]
    SplittingSize { sum: usize, dim: usize },
    /// A dense analysis was requested above the size guard.
    #[error("guard violation: {0}")]
    Guard(String),
    /// Experiment configuration could not be parsed or is inconsistent.
    #[error("configuration error: {0}")]
    Config(String),
    /// Underlying I/O failure while writing results.
    #[error(transparent)]
    Io(#[from] std::io::Error),
    /// CSV serialization failure.
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, MfsorError>;
