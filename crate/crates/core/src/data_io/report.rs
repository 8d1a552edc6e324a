//! Prediction CSVs and metrics JSON.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::DataError;
use crate::evaluation::{mspe, weighted_mspe};

/// One output row of `predict` or a CV fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub county_id: String,
    pub year: i32,
    pub observed: Option<f64>,
    pub predicted: f64,
    pub weight: Option<f64>,
    pub state: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateMetrics {
    pub mspe: f64,
    pub weighted_mspe: Option<f64>,
    pub n_test: usize,
}

/// Error summary over the rows that carry an observed response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mspe: f64,
    /// Present when every scored row has a harvest weight and they are not all zero.
    pub weighted_mspe: Option<f64>,
    pub n_test: usize,
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub per_state: BTreeMap<String, StateMetrics>,
}

fn score(rows: &[&PredictionRow]) -> Option<StateMetrics> {
    let (mut y, mut yhat, mut w) = (Vec::new(), Vec::new(), Vec::new());
    let mut all_weighted = true;
    for r in rows {
        if let Some(obs) = r.observed {
            y.push(obs);
            yhat.push(r.predicted);
            match r.weight {
                Some(v) => w.push(v),
                None => all_weighted = false,
            }
        }
    }
    let mspe = mspe(&y, &yhat).ok()?;
    let weighted_mspe = if all_weighted { weighted_mspe(&y, &yhat, &w).ok() } else { None };
    Some(StateMetrics {
        mspe,
        weighted_mspe,
        n_test: y.len(),
    })
}

impl Metrics {
    /// `None` when no row has an observed response.
    pub fn from_rows(rows: &[PredictionRow]) -> Option<Self> {
        let all: Vec<&PredictionRow> = rows.iter().collect();
        let overall = score(&all)?;
        let mut groups: BTreeMap<&str, Vec<&PredictionRow>> = BTreeMap::new();
        for r in rows {
            if let Some(s) = &r.state {
                groups.entry(s).or_default().push(r);
            }
        }
        let per_state = groups
            .into_iter()
            .filter_map(|(s, g)| score(&g).map(|m| (s.to_string(), m)))
            .collect();
        Some(Self {
            mspe: overall.mspe,
            weighted_mspe: overall.weighted_mspe,
            n_test: overall.n_test,
            per_state,
        })
    }
}

/// Columns: `county_id, year, observed, predicted, harvest_acres, state`.
/// Missing values are empty fields.
pub fn write_predictions<W: Write>(rows: &[PredictionRow], out: W) -> Result<(), DataError> {
    let err = |e: csv::Error| DataError::Csv {
        file: "predictions".into(),
        line: 0,
        message: e.to_string(),
    };
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["county_id", "year", "observed", "predicted", "harvest_acres", "state"])
        .map_err(err)?;
    for r in rows {
        w.write_record([
            r.county_id.clone(),
            r.year.to_string(),
            opt(r.observed),
            r.predicted.to_string(),
            opt(r.weight),
            r.state.clone().unwrap_or_default(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| DataError::Io {
        path: "predictions".into(),
        source: e,
    })
}

pub fn write_metrics<W: Write>(metrics: &Metrics, mut out: W) -> Result<(), DataError> {
    let text = serde_json::to_string_pretty(metrics).map_err(|e| DataError::Json(e.to_string()))?;
    writeln!(out, "{text}").map_err(|e| DataError::Io {
        path: "metrics".into(),
        source: e,
    })
}
