//! County-level inputs, fitted-model files and report bundles.

mod csv_io;
mod dataset;
mod persist;
mod report;

use thiserror::Error;

pub use csv_io::{
    fill_daily, load_dataset, month_of_day, monthly_means, scalar_names, write_dataset, DatasetPaths, CURVE_NAMES,
    DAYS_PER_YEAR, MAX_INTERPOLATED_GAP, MAX_MISSING_DAYS_PER_MONTH, MONTH_LENGTHS, RESPONSE_UNITS,
};
pub use dataset::{DatasetMeta, Record, RecordFlags, SpatialDataset};
pub use persist::{load_model, model_from_json, model_to_json, save_model, MODEL_FORMAT, MODEL_VERSION};
pub use report::{write_metrics, write_predictions, Metrics, PredictionRow, StateMetrics};

#[derive(Error, Debug)]
pub enum DataError {
    #[error("duplicate record for county {county_id}, year {year}")]
    DuplicateKey { county_id: String, year: i32 },
    #[error("inconsistent dataset: {0}")]
    Inconsistent(String),
    #[error("year {0} has no observed responses")]
    EmptyYear(i32),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}: {message}")]
    Csv { file: String, line: usize, message: String },
    #[error("{file}:{line}: column '{column}': {message}")]
    Schema {
        file: String,
        line: usize,
        column: String,
        message: String,
    },
    #[error("{file}:{line}: day 366 is not supported; drop leap days before ingestion")]
    LeapDay { file: String, line: usize },
    #[error("county {county_id} is not listed in the locations file")]
    UnknownCounty { county_id: String },
    #[error("invalid JSON: {0}")]
    Json(String),
    #[error("model file version {found} is not supported (expected {expected})")]
    Version { found: u64, expected: u64 },
    #[error("model file has no version field")]
    VersionMissing,
    #[error("model file is corrupted: checksum mismatch")]
    Checksum,
    #[error("not a model file: {0}")]
    ModelFormat(String),
}
