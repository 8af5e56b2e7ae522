use thiserror::Error;

use crate::solver::SolveTrace;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Incompatible array shapes.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// An argument outside the domain of an operation (non-positive `mu`,
    /// empty input, out-of-range parameter, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A retraction could not produce a valid manifold point.
    #[error("retraction failed: {0}")]
    Retraction(String),

    /// The nearest-orthogonal projection is not unique (rank-deficient input).
    #[error("projection onto the orthogonal group is not unique: {0}")]
    NonUniqueProjection(String),

    /// The input matrix is not positive semidefinite.
    #[error("matrix is not positive semidefinite: {0}")]
    NotPsd(String),

    /// Requested factorization width below the numerical rank.
    #[error("rank error: {0}")]
    Rank(String),

    /// A search direction with non-negative directional derivative was
    /// handed to the line search.
    #[error("not a descent direction: directional derivative = {0}")]
    NotDescentDirection(f64),

    /// The trust-region loop could not recover finite model values.
    #[error("solver stagnated: {0}")]
    Stagnation(String),

    /// The objective produced a non-finite value; the partial trace of the
    /// outer loop is attached for diagnosis.
    #[error("non-finite objective value: {message}")]
    Numeric {
        message: String,
        trace: Box<SolveTrace>,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed matrix or factor file.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
