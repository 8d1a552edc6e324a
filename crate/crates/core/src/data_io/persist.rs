//! Fitted-model files.
//!
//! A model file is one JSON document:
//!
//! ```text
//! { "format": "dsnet-model", "version": 1, "checksum": "<sha256 hex>", "model": { ... } }
//! ```
//!
//! The checksum covers the compact serialization of `model`. Floats are
//! written in shortest round-trip form, so a loaded model predicts
//! bit-identically to the saved one.

use std::fs;
use std::path::Path;

use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use super::DataError;
use crate::model::FittedModel;

pub const MODEL_FORMAT: &str = "dsnet-model";
pub const MODEL_VERSION: u64 = 1;

fn checksum(model: &Value) -> Result<String, DataError> {
    let text = serde_json::to_string(model).map_err(|e| DataError::Json(e.to_string()))?;
    Ok(hex::encode(Sha256::digest(text.as_bytes())))
}

pub fn model_to_json(model: &FittedModel) -> Result<String, DataError> {
    let body = serde_json::to_value(model).map_err(|e| DataError::Json(e.to_string()))?;
    let mut doc = Map::new();
    doc.insert("format".into(), Value::from(MODEL_FORMAT));
    doc.insert("version".into(), Value::from(MODEL_VERSION));
    doc.insert("checksum".into(), Value::from(checksum(&body)?));
    doc.insert("model".into(), body);
    serde_json::to_string_pretty(&Value::Object(doc)).map_err(|e| DataError::Json(e.to_string()))
}

pub fn model_from_json(text: &str) -> Result<FittedModel, DataError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| DataError::Json(e.to_string()))?;
    let obj = doc
        .as_object()
        .ok_or_else(|| DataError::ModelFormat("top level is not an object".into()))?;
    match obj.get("format").and_then(Value::as_str) {
        Some(MODEL_FORMAT) => {}
        Some(other) => return Err(DataError::ModelFormat(format!("format is '{other}'"))),
        None => return Err(DataError::ModelFormat("missing 'format'".into())),
    }
    let version = obj.get("version").ok_or(DataError::VersionMissing)?;
    let version = version
        .as_u64()
        .ok_or_else(|| DataError::ModelFormat("'version' is not an unsigned integer".into()))?;
    if version != MODEL_VERSION {
        return Err(DataError::Version {
            found: version,
            expected: MODEL_VERSION,
        });
    }
    let stored = obj
        .get("checksum")
        .and_then(Value::as_str)
        .ok_or_else(|| DataError::ModelFormat("missing 'checksum'".into()))?;
    let body = obj
        .get("model")
        .ok_or_else(|| DataError::ModelFormat("missing 'model'".into()))?;
    if checksum(body)? != stored {
        return Err(DataError::Checksum);
    }
    serde_json::from_value(body.clone()).map_err(|e| DataError::ModelFormat(e.to_string()))
}

pub fn save_model(model: &FittedModel, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    let text = model_to_json(model)?;
    fs::write(path, text).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_model(path: impl AsRef<Path>) -> Result<FittedModel, DataError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    model_from_json(&text)
}
