//! Sparse principal component estimation from incomplete observations.
//!
//! The pipeline this crate implements:
//!
//! 1. [`covariance`] builds an unbiased covariance estimate from data whose
//!    entries are revealed independently with probability `delta`, by
//!    reweighting the diagonal and off-diagonal of the naive Gram matrix.
//! 2. [`solver`] maximizes the l0-penalized Rayleigh quotient
//!    `theta' S theta - lambda |theta|_0` over unit vectors, either exactly
//!    (support enumeration) or by truncated power iteration, with
//!    penalty-level rules driven by the spectral gap.
//! 3. [`metrics`] quantifies estimation error (projector loss) and the
//!    sparse restricted deviation of a covariance estimate from its target.
//! 4. [`simulation`] generates spiked-covariance data with Bernoulli
//!    masking and runs seeded Monte Carlo experiments over parameter grids.
//!
//! All randomness flows through explicitly seeded ChaCha streams, so every
//! result in this crate is bit-reproducible given the seeds.

pub mod covariance;
pub mod error;
pub mod metrics;
pub mod simulation;
pub mod solver;

mod config;
mod eigen;
mod seed;

pub use covariance::{MaskedSample, SpectralSummary, SymmetricMatrix};
pub use error::{Error, Result};
pub use metrics::{DeviationProfile, DeviationStudy};
pub use simulation::{ExperimentGrid, ExperimentReport, SpikedModel};
pub use solver::{SolverConfig, SolverResult, SparseUnitVector};
