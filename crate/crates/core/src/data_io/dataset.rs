use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::DataError;
use crate::functional::FunctionalSample;
use crate::geometry::Point;

/// Quality flags attached to a record at ingestion.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordFlags {
    /// At least one month of daily precipitation had more than 7 missing days.
    pub incomplete_scalars: bool,
}

/// One (county, year) observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub county_id: String,
    pub year: i32,
    pub location: Point,
    /// `None` when the response is missing; such records are prediction-only.
    pub response: Option<f64>,
    pub curves: Vec<FunctionalSample>,
    pub scalars: Vec<f64>,
    /// Harvested acreage used as the weight in weighted MSPE.
    pub weight: Option<f64>,
    pub state: Option<String>,
    #[serde(default)]
    pub flags: RecordFlags,
}

impl Record {
    /// Whether the record can be used to train a model.
    pub fn is_trainable(&self) -> bool {
        self.response.is_some() && !self.flags.incomplete_scalars
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub response_units: String,
    pub curve_names: Vec<String>,
    pub scalar_names: Vec<String>,
    /// Set when responses are anomalies; `year_means` then inverts them.
    pub anomaly: bool,
    pub year_means: BTreeMap<i32, f64>,
}

/// Records sorted by `(county_id, year)` with unique keys and a common
/// number of curves and scalars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialDataset {
    records: Vec<Record>,
    meta: DatasetMeta,
}

impl SpatialDataset {
    pub fn new(mut records: Vec<Record>, meta: DatasetMeta) -> Result<Self, DataError> {
        records.sort_by(|a, b| a.county_id.cmp(&b.county_id).then(a.year.cmp(&b.year)));
        if let Some(w) = records
            .windows(2)
            .find(|w| w[0].county_id == w[1].county_id && w[0].year == w[1].year)
        {
            return Err(DataError::DuplicateKey {
                county_id: w[0].county_id.clone(),
                year: w[0].year,
            });
        }
        if let Some(first) = records.first() {
            let (k, j) = (first.curves.len(), first.scalars.len());
            for r in &records {
                if r.curves.len() != k || r.scalars.len() != j {
                    return Err(DataError::Inconsistent(format!(
                        "record ({}, {}) has {} curves and {} scalars, expected {k} and {j}",
                        r.county_id,
                        r.year,
                        r.curves.len(),
                        r.scalars.len()
                    )));
                }
                if r.response.is_some_and(|y| !y.is_finite()) {
                    return Err(DataError::Inconsistent(format!(
                        "record ({}, {}) has a non-finite response",
                        r.county_id, r.year
                    )));
                }
            }
        }
        if meta.anomaly {
            for r in &records {
                if r.response.is_some() && !meta.year_means.contains_key(&r.year) {
                    return Err(DataError::Inconsistent(format!(
                        "anomaly dataset lacks the mean for year {}",
                        r.year
                    )));
                }
            }
        }
        Ok(Self { records, meta })
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn meta(&self) -> &DatasetMeta {
        &self.meta
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_curves(&self) -> usize {
        self.records.first().map_or(0, |r| r.curves.len())
    }

    pub fn n_scalars(&self) -> usize {
        self.records.first().map_or(0, |r| r.scalars.len())
    }

    /// Indices of records usable for training.
    pub fn trainable_indices(&self) -> Vec<usize> {
        (0..self.records.len())
            .filter(|&i| self.records[i].is_trainable())
            .collect()
    }

    /// Dataset restricted to `indices` (kept in dataset order).
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut idx = indices.to_vec();
        idx.sort_unstable();
        idx.dedup();
        Self {
            records: idx.iter().map(|&i| self.records[i].clone()).collect(),
            meta: self.meta.clone(),
        }
    }

    /// Apply `f` to every response (used by leakage probes and tests).
    pub fn map_responses(&self, indices: &[usize], f: impl Fn(f64) -> f64) -> Self {
        let set: BTreeSet<usize> = indices.iter().copied().collect();
        let mut out = self.clone();
        for (i, r) in out.records.iter_mut().enumerate() {
            if set.contains(&i) {
                r.response = r.response.map(&f);
            }
        }
        out
    }

    /// Trainable records of counties with at least `min_years` observed
    /// responses.
    pub fn with_min_years(&self, min_years: usize) -> Self {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for r in &self.records {
            if r.response.is_some() {
                *counts.entry(r.county_id.as_str()).or_default() += 1;
            }
        }
        let keep: Vec<usize> = (0..self.records.len())
            .filter(|&i| {
                let r = &self.records[i];
                r.is_trainable() && counts.get(r.county_id.as_str()).copied().unwrap_or(0) >= min_years
            })
            .collect();
        self.subset(&keep)
    }

    /// Replace each response by its deviation from that year's mean over
    /// counties with a response. Year means are stored for inversion.
    pub fn demean_by_year(&self) -> Result<Self, DataError> {
        if self.meta.anomaly {
            return Err(DataError::Inconsistent("dataset already holds anomalies".into()));
        }
        let mut sums: BTreeMap<i32, (f64, usize)> = BTreeMap::new();
        let years: BTreeSet<i32> = self.records.iter().map(|r| r.year).collect();
        for r in &self.records {
            if let Some(y) = r.response {
                let e = sums.entry(r.year).or_insert((0.0, 0));
                e.0 += y;
                e.1 += 1;
            }
        }
        if let Some(year) = years.iter().find(|y| !sums.contains_key(y)) {
            return Err(DataError::EmptyYear(*year));
        }
        let means: BTreeMap<i32, f64> = sums.iter().map(|(y, (s, n))| (*y, s / *n as f64)).collect();
        let mut out = self.clone();
        for r in &mut out.records {
            r.response = r.response.map(|y| y - means[&r.year]);
        }
        out.meta.anomaly = true;
        out.meta.year_means = means;
        Ok(out)
    }

    /// Undo [`SpatialDataset::demean_by_year`].
    pub fn invert_anomalies(&self) -> Result<Self, DataError> {
        if !self.meta.anomaly {
            return Err(DataError::Inconsistent("dataset does not hold anomalies".into()));
        }
        let mut out = self.clone();
        for r in &mut out.records {
            if let Some(y) = r.response {
                r.response = Some(y + self.year_mean(r.year)?);
            }
        }
        out.meta.anomaly = false;
        out.meta.year_means.clear();
        Ok(out)
    }

    pub fn year_mean(&self, year: i32) -> Result<f64, DataError> {
        self.meta
            .year_means
            .get(&year)
            .copied()
            .ok_or(DataError::EmptyYear(year))
    }

    /// Convert a prediction in dataset units back to the original scale.
    pub fn reinflate(&self, year: i32, value: f64) -> Result<f64, DataError> {
        if self.meta.anomaly {
            Ok(value + self.year_mean(year)?)
        } else {
            Ok(value)
        }
    }

    /// Distinct locations, in record order.
    pub fn sites(&self) -> Vec<Point> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for r in &self.records {
            if seen.insert((r.location.x.to_bits(), r.location.y.to_bits())) {
                out.push(r.location);
            }
        }
        out
    }
}
