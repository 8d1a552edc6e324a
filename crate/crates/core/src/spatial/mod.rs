//! Matérn spatial processes for the simulation benchmark.

mod bessel;
mod gp;
mod matern;

use thiserror::Error;

pub use bessel::{bessel_k1, x_bessel_k1};
pub use gp::{sample_gp, CholeskyFactor};
pub use matern::{build_cov, matern_rho, MaternParams};

#[derive(Error, Debug, Clone, PartialEq)]
pub enum SpatialError {
    #[error("K1 is defined for x > 0, got {0}")]
    BesselDomain(f64),
    #[error("Matérn {name} must be positive and finite, got {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("Matérn smoothness {0} is not supported (only 1)")]
    UnsupportedSmoothness(f64),
    #[error("distance must be nonnegative, got {0}")]
    NegativeDistance(f64),
    #[error("covariance is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("covariance matrix is not symmetric")]
    NotSymmetric,
    #[error("mean has length {got}, covariance dimension is {expected}")]
    MeanLength { expected: usize, got: usize },
    #[error("covariance is not positive definite even with diagonal jitter {max_jitter:e}")]
    NotPositiveDefinite { max_jitter: f64 },
}
