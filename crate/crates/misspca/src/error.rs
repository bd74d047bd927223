//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },

    #[error("entry ({i},{j}) breaks symmetry: {upper} vs {lower}")]
    NotSymmetric { i: usize, j: usize, upper: f64, lower: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("observation probability must lie in (0, 1], got {0}")]
    BadDelta(f64),

    #[error("mask contains no observed entries")]
    AllMissing,

    #[error("eigensolver failed to converge for eigenvalue {index} after {iterations} iterations")]
    EigenConvergence { index: usize, iterations: usize },

    #[error("support enumeration needs {needed} submatrix evaluations, budget is {budget}")]
    EnumerationBudget { needed: u128, budget: u64 },

    #[error("leading eigenvalue {sigma1} does not exceed the second eigenvalue {sigma2}")]
    NoSpectralGap { sigma1: f64, sigma2: f64 },

    #[error("estimated spectral gap {gap} is at or below the floor {floor}")]
    GapBelowFloor { gap: f64, floor: f64 },

    #[error("sample too small for a nontrivial sparsity level: delta^2 n / log(e p) = {0} must exceed 2")]
    SampleTooSmall(f64),

    #[error("sparsity bound {sbar} out of range for dimension {p}")]
    BadSparsityBound { sbar: usize, p: usize },

    #[error("penalty level must be nonnegative and finite, got {0}")]
    BadLambda(f64),

    #[error("matrix is not positive semidefinite: smallest eigenvalue {0}")]
    NotPsd(f64),

    #[error("perturbation spectral norm {0} exceeds 1")]
    PerturbationTooLarge(f64),

    #[error("perturbation does not annihilate the spike: |U theta| = {0}")]
    PerturbationNotOrthogonal(f64),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("invalid solver configuration: {0}")]
    BadConfig(String),

    #[error("invalid sparse unit vector: {0}")]
    BadVector(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
