//! DSNet: deep spatial regression with functional and scalar predictors.
//!
//! The crate is organised bottom-up:
//!
//! - [`basis`]: Fourier bases on `[0, 1]` and multi-resolution thin-plate
//!   spline (MRTS) bases over planar sites.
//! - [`spatial`]: Matérn correlation, the Bessel function it needs, and
//!   Cholesky-based Gaussian-process sampling.
//! - [`functional`]: least-squares registration of observed curves and the
//!   inner products that feed the network.
//! - [`features`]: the engineered first-layer input vector.
//! - [`nn`]: a small fully connected network with backpropagation and Adam.
//! - [`model`]: the DSNet estimator and its ablation variants.
//! - [`simulation`], [`evaluation`], [`data_io`]: benchmarks, cross-validation
//!   and file formats.

pub mod basis;
pub mod data_io;
pub mod evaluation;
pub mod features;
pub mod functional;
pub mod geometry;
pub mod model;
pub mod nn;
pub mod seed;
pub mod simulation;
pub mod spatial;

mod error;

pub use error::{Error, Result};
pub use geometry::Point;
