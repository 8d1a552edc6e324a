use thiserror::Error;

use crate::basis::BasisError;
use crate::data_io::DataError;
use crate::evaluation::EvalError;
use crate::features::FeatureError;
use crate::functional::FunctionalError;
use crate::model::ModelError;
use crate::nn::NnError;
use crate::simulation::SimulationError;
use crate::spatial::SpatialError;

/// Crate-level error wrapping each module's error type.
#[derive(Error, Debug)]
pub enum Error {
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Spatial(#[from] SpatialError),
    #[error(transparent)]
    Functional(#[from] FunctionalError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
    #[error("{0}")]
    Invalid(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Whether the failure is numerical (factorization, divergence, rank).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Spatial(SpatialError::NotPositiveDefinite { .. }) => true,
            Error::Nn(NnError::Diverged { .. }) => true,
            Error::Basis(BasisError::RankDeficient { .. } | BasisError::Collinear) => true,
            Error::Functional(FunctionalError::IllPosedRegistration { .. }) => true,
            Error::Model(e) => e.is_numerical(),
            Error::Eval(e) => e.is_numerical(),
            Error::Simulation(e) => e.is_numerical(),
            _ => false,
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
