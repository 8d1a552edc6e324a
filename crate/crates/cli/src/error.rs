use std::fmt;
use std::path::Path;

use dsnet::data_io::DataError;
use dsnet::evaluation::EvalError;
use dsnet::model::ModelError;
use dsnet::simulation::SimulationError;

/// Failure classes, each with its own exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Config,
    Data,
    Numerical,
    Io,
}

impl Kind {
    pub fn exit_code(self) -> i32 {
        match self {
            Kind::Config => 2,
            Kind::Data => 3,
            Kind::Numerical => 4,
            Kind::Io => 5,
        }
    }

    fn label(self) -> &'static str {
        match self {
            Kind::Config => "config error",
            Kind::Data => "data error",
            Kind::Numerical => "numerical error",
            Kind::Io => "I/O error",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            kind: Kind::Config,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            kind: Kind::Data,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, err: impl fmt::Display) -> Self {
        Self {
            kind: Kind::Io,
            message: format!("{}: {err}", path.display()),
        }
    }

    fn numerical(message: impl Into<String>) -> Self {
        Self {
            kind: Kind::Numerical,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind.label(), self.message)
    }
}

impl std::error::Error for CliError {}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            _ if e.is_numerical() => CliError::numerical(e.to_string()),
            ModelError::Restriction { .. }
            | ModelError::InvalidHyper { .. }
            | ModelError::InvalidSetting(_)
            | ModelError::UnknownVariant(_)
            | ModelError::UnsupportedVariant { .. }
            | ModelError::Nn(dsnet::nn::NnError::InvalidConfig { .. }) => CliError::config(e.to_string()),
            _ => CliError::data(e.to_string()),
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Io { .. } => Self {
                kind: Kind::Io,
                message: e.to_string(),
            },
            _ => CliError::data(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Model(m) => m.into(),
            EvalError::Data(d) => d.into(),
            EvalError::InvalidFolds { .. } | EvalError::EmptyGrid(_) | EvalError::EmptyRange => {
                CliError::config(e.to_string())
            }
            _ if e.is_numerical() => CliError::numerical(e.to_string()),
            _ => CliError::data(e.to_string()),
        }
    }
}

impl From<SimulationError> for CliError {
    fn from(e: SimulationError) -> Self {
        match e {
            SimulationError::Config { .. } => CliError::config(e.to_string()),
            SimulationError::Data(d) => d.into(),
            _ if e.is_numerical() => CliError::numerical(e.to_string()),
            _ => CliError::data(e.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
