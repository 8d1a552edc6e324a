//! Prediction error metrics, fold plans, cross-validation and grid search.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data_io::{DataError, PredictionRow, SpatialDataset};
use crate::model::{fit, HyperParams, ModelError, ModelVariant, PipelineSettings};
use crate::nn::TrainConfig;
use crate::seed::{self, Stream};

#[derive(Error, Debug)]
pub enum EvalError {
    #[error("length mismatch: {0} observed vs {1} predicted")]
    LengthMismatch(usize, usize),
    #[error("weights have length {got}, expected {expected}")]
    WeightLength { expected: usize, got: usize },
    #[error("no values to score")]
    Empty,
    #[error("weights must not all be zero")]
    ZeroWeights,
    #[error("weight at position {0} is negative or non-finite")]
    BadWeight(usize),
    #[error("cannot split {n} records into {folds} folds")]
    InvalidFolds { folds: usize, n: usize },
    #[error("fold {fold} leaves {n_train} training records")]
    FoldTooSmall { fold: usize, n_train: usize },
    #[error("hyperparameter grid has no values for {0}")]
    EmptyGrid(&'static str),
    #[error("every grid cell failed; first error: {0}")]
    AllCellsFailed(String),
    #[error("sweep range is empty")]
    EmptyRange,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Data(#[from] DataError),
}

impl EvalError {
    pub fn is_numerical(&self) -> bool {
        match self {
            EvalError::Model(e) => e.is_numerical(),
            EvalError::AllCellsFailed(_) => true,
            _ => false,
        }
    }
}

/// Mean squared prediction error.
pub fn mspe(y_true: &[f64], y_pred: &[f64]) -> Result<f64, EvalError> {
    if y_true.len() != y_pred.len() {
        return Err(EvalError::LengthMismatch(y_true.len(), y_pred.len()));
    }
    if y_true.is_empty() {
        return Err(EvalError::Empty);
    }
    let sum: f64 = y_true.iter().zip(y_pred).map(|(y, p)| (y - p) * (y - p)).sum();
    Ok(sum / y_true.len() as f64)
}

/// `Σ w (y − ŷ)² / Σ w`.
pub fn weighted_mspe(y_true: &[f64], y_pred: &[f64], weights: &[f64]) -> Result<f64, EvalError> {
    if y_true.len() != y_pred.len() {
        return Err(EvalError::LengthMismatch(y_true.len(), y_pred.len()));
    }
    if weights.len() != y_true.len() {
        return Err(EvalError::WeightLength {
            expected: y_true.len(),
            got: weights.len(),
        });
    }
    if y_true.is_empty() {
        return Err(EvalError::Empty);
    }
    if let Some(i) = weights.iter().position(|w| !(*w >= 0.0 && w.is_finite())) {
        return Err(EvalError::BadWeight(i));
    }
    let total: f64 = weights.iter().sum();
    if total == 0.0 {
        return Err(EvalError::ZeroWeights);
    }
    let sum: f64 = y_true
        .iter()
        .zip(y_pred)
        .zip(weights)
        .map(|((y, p), w)| w * (y - p) * (y - p))
        .sum();
    Ok(sum / total)
}

/// Assignment of dataset records to `C` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    folds: usize,
    /// Dataset indices covered by the plan.
    indices: Vec<usize>,
    /// Fold of each entry of `indices`.
    assignment: Vec<usize>,
}

impl FoldPlan {
    /// Seeded random partition of `indices` into `folds` groups whose sizes
    /// differ by at most one.
    pub fn random(indices: &[usize], folds: usize, seed: u64) -> Result<Self, EvalError> {
        if folds < 2 || folds > indices.len() {
            return Err(EvalError::InvalidFolds {
                folds,
                n: indices.len(),
            });
        }
        let mut order: Vec<usize> = (0..indices.len()).collect();
        order.shuffle(&mut seed::rng(seed::derive(seed, Stream::Folds, 0)));
        let mut assignment = vec![0; indices.len()];
        for (rank, &pos) in order.iter().enumerate() {
            assignment[pos] = rank % folds;
        }
        Ok(Self {
            folds,
            indices: indices.to_vec(),
            assignment,
        })
    }

    /// Partition that keeps every record of a group (e.g. a county) in the
    /// same fold. Groups are shuffled and dealt round-robin.
    pub fn blocked(indices: &[usize], groups: &[&str], folds: usize, seed: u64) -> Result<Self, EvalError> {
        assert_eq!(indices.len(), groups.len(), "one group label per index");
        let mut names: Vec<&str> = groups.to_vec();
        names.sort_unstable();
        names.dedup();
        if folds < 2 || folds > names.len() {
            return Err(EvalError::InvalidFolds { folds, n: names.len() });
        }
        names.shuffle(&mut seed::rng(seed::derive(seed, Stream::Folds, 1)));
        let fold_of: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, g)| (*g, i % folds)).collect();
        Ok(Self {
            folds,
            indices: indices.to_vec(),
            assignment: groups.iter().map(|g| fold_of[g]).collect(),
        })
    }

    /// Random plan over the trainable records of `ds`, or county-blocked.
    pub fn for_dataset(ds: &SpatialDataset, folds: usize, seed: u64, county_blocked: bool) -> Result<Self, EvalError> {
        let idx = ds.trainable_indices();
        if county_blocked {
            let groups: Vec<&str> = idx.iter().map(|&i| ds.records()[i].county_id.as_str()).collect();
            Self::blocked(&idx, &groups, folds, seed)
        } else {
            Self::random(&idx, folds, seed)
        }
    }

    pub fn folds(&self) -> usize {
        self.folds
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// Dataset indices held out in fold `f`.
    pub fn test(&self, f: usize) -> Vec<usize> {
        self.select(|a| a == f)
    }

    /// Dataset indices used for training when fold `f` is held out.
    pub fn train(&self, f: usize) -> Vec<usize> {
        self.select(|a| a != f)
    }

    fn select(&self, keep: impl Fn(usize) -> bool) -> Vec<usize> {
        self.indices
            .iter()
            .zip(&self.assignment)
            .filter(|(_, a)| keep(**a))
            .map(|(i, _)| *i)
            .collect()
    }
}

/// Single train/test split: `test_fraction` of `indices`, seeded.
pub fn holdout_split(indices: &[usize], test_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut order = indices.to_vec();
    order.shuffle(&mut seed::rng(seed::derive(seed, Stream::Split, 0)));
    let n_test = ((indices.len() as f64 * test_fraction).round() as usize).min(indices.len());
    let test = order.split_off(indices.len() - n_test);
    order.sort_unstable();
    let mut test = test;
    test.sort_unstable();
    (order, test)
}

/// Options shared by every cross-validated evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvOptions {
    /// Convert responses to yield anomalies inside each fold, using year
    /// means of the training folds only.
    pub demean_by_year: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub mspe: f64,
    pub weighted_mspe: Option<f64>,
    pub best_epoch: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub folds: Vec<FoldResult>,
    pub mean_mspe: f64,
    pub mean_weighted_mspe: Option<f64>,
    /// Held-out predictions of every fold, in response units.
    pub predictions: Vec<PredictionRow>,
}

/// Train on `C − 1` folds and score the held-out fold, for every fold.
///
/// Folds run concurrently. Fold `f` trains with seed
/// `derive(cfg.seed, Fit, f + 1)`; everything fitted (bases, standardizers,
/// early-stopping split, and year means when demeaning) sees only the
/// training folds.
pub fn kfold_evaluate(
    variant: ModelVariant,
    dataset: &SpatialDataset,
    hp: &HyperParams,
    cfg: &TrainConfig,
    settings: &PipelineSettings,
    plan: &FoldPlan,
    options: &CvOptions,
) -> Result<CvResult, EvalError> {
    let per_fold: Vec<(FoldResult, Vec<PredictionRow>)> = (0..plan.folds())
        .into_par_iter()
        .map(|f| evaluate_fold(variant, dataset, hp, cfg, settings, plan, options, f))
        .collect::<Result<_, _>>()?;
    let n = per_fold.len() as f64;
    let mean_mspe = per_fold.iter().map(|(r, _)| r.mspe).sum::<f64>() / n;
    let mean_weighted_mspe = per_fold
        .iter()
        .map(|(r, _)| r.weighted_mspe)
        .sum::<Option<f64>>()
        .map(|s| s / n);
    let mut folds = Vec::with_capacity(per_fold.len());
    let mut predictions = Vec::new();
    for (r, p) in per_fold {
        folds.push(r);
        predictions.extend(p);
    }
    Ok(CvResult {
        folds,
        mean_mspe,
        mean_weighted_mspe,
        predictions,
    })
}

#[allow(clippy::too_many_arguments)]
fn evaluate_fold(
    variant: ModelVariant,
    dataset: &SpatialDataset,
    hp: &HyperParams,
    cfg: &TrainConfig,
    settings: &PipelineSettings,
    plan: &FoldPlan,
    options: &CvOptions,
    f: usize,
) -> Result<(FoldResult, Vec<PredictionRow>), EvalError> {
    let train_idx = plan.train(f);
    let test_idx = plan.test(f);
    if train_idx.len() < 10 {
        return Err(EvalError::FoldTooSmall {
            fold: f,
            n_train: train_idx.len(),
        });
    }
    let mut train_ds = dataset.subset(&train_idx);
    let test_ds = dataset.subset(&test_idx);
    if options.demean_by_year {
        train_ds = train_ds.demean_by_year()?;
    }
    let fold_cfg = TrainConfig {
        seed: seed::derive(cfg.seed, Stream::Fit, f as u64 + 1),
        ..cfg.clone()
    };
    let outcome = fit(variant, &train_ds, hp, &fold_cfg, settings)?;
    let raw = outcome.model.predict(test_ds.records())?;
    let mut rows = Vec::with_capacity(raw.len());
    for (r, p) in test_ds.records().iter().zip(raw) {
        let predicted = if options.demean_by_year {
            p + train_ds.year_mean(r.year)?
        } else {
            p
        };
        rows.push(PredictionRow {
            county_id: r.county_id.clone(),
            year: r.year,
            observed: r.response,
            predicted,
            weight: r.weight,
            state: r.state.clone(),
        });
    }
    let y: Vec<f64> = rows.iter().map(|r| r.observed.expect("plan covers trainable records")).collect();
    let yhat: Vec<f64> = rows.iter().map(|r| r.predicted).collect();
    let weights: Option<Vec<f64>> = rows.iter().map(|r| r.weight).collect();
    let weighted = match weights {
        Some(w) => weighted_mspe(&y, &yhat, &w).ok(),
        None => None,
    };
    Ok((
        FoldResult {
            fold: f,
            n_train: train_idx.len(),
            n_test: test_idx.len(),
            mspe: mspe(&y, &yhat)?,
            weighted_mspe: weighted,
            best_epoch: outcome.log.best_epoch,
            seed: fold_cfg.seed,
        },
        rows,
    ))
}

/// Candidate values for each tuned hyperparameter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperGrid {
    pub m: Vec<usize>,
    pub p: Vec<usize>,
    pub h: Vec<usize>,
    pub layers: Vec<usize>,
    pub width: Vec<usize>,
}

impl Default for HyperGrid {
    fn default() -> Self {
        Self {
            m: vec![5, 7, 9, 11, 13],
            p: vec![5, 7, 10, 12, 15, 20],
            h: vec![100, 130, 150, 180, 200, 250],
            layers: vec![4, 5, 6, 7, 8],
            width: vec![16, 32, 64],
        }
    }
}

/// Tie-break order: smaller `(L, N, P·M, H)` wins.
pub fn architecture_key(hp: &HyperParams) -> (usize, usize, usize, usize) {
    (hp.layers, hp.width, hp.p * hp.m, hp.h)
}

impl HyperGrid {
    pub fn single(hp: HyperParams) -> Self {
        Self {
            m: vec![hp.m],
            p: vec![hp.p],
            h: vec![hp.h],
            layers: vec![hp.layers],
            width: vec![hp.width],
        }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        for (name, v) in [("M", &self.m), ("P", &self.p), ("H", &self.h), ("L", &self.layers), ("N", &self.width)] {
            if v.is_empty() {
                return Err(EvalError::EmptyGrid(name));
            }
        }
        Ok(())
    }

    /// Distinct cells after applying `variant`'s restriction, in tie-break
    /// order.
    pub fn cells(&self, variant: ModelVariant) -> Vec<HyperParams> {
        let mut out = Vec::new();
        for &m in &self.m {
            for &p in &self.p {
                for &h in &self.h {
                    for &layers in &self.layers {
                        for &width in &self.width {
                            out.push(variant.restrict(HyperParams { m, p, h, layers, width }));
                        }
                    }
                }
            }
        }
        out.sort_by_key(|hp| (architecture_key(hp), hp.m, hp.p));
        out.dedup();
        out
    }
}

/// One evaluated grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub hyper: HyperParams,
    pub seed: u64,
    pub mean_mspe: Option<f64>,
    pub mean_weighted_mspe: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub variant: ModelVariant,
    pub rows: Vec<GridRow>,
    pub best: HyperParams,
    pub best_mspe: f64,
}

/// Relative tolerance under which two CV scores count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Seed of a grid cell: depends on the master seed and the cell only.
pub fn cell_seed(master: u64, hp: &HyperParams) -> u64 {
    [hp.m, hp.p, hp.h, hp.layers, hp.width]
        .iter()
        .fold(seed::derive(master, Stream::GridCell, 0), |acc, &v| {
            seed::derive(acc, Stream::GridCell, v as u64)
        })
}

/// Index of the best row: minimal score, ties within [`TIE_TOLERANCE`]
/// broken by [`architecture_key`].
pub fn select_best(rows: &[GridRow]) -> Option<usize> {
    let min = rows
        .iter()
        .filter_map(|r| r.mean_mspe)
        .fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return None;
    }
    let tol = TIE_TOLERANCE * min.abs().max(f64::MIN_POSITIVE);
    rows.iter()
        .enumerate()
        .filter(|(_, r)| r.mean_mspe.is_some_and(|s| s - min <= tol))
        .min_by_key(|(_, r)| architecture_key(&r.hyper))
        .map(|(i, _)| i)
}

/// Cross-validate every cell of `grid` with one shared fold plan. Cells run
/// concurrently; failures are recorded in the table instead of aborting.
#[allow(clippy::too_many_arguments)]
pub fn grid_search(
    variant: ModelVariant,
    dataset: &SpatialDataset,
    grid: &HyperGrid,
    plan: &FoldPlan,
    cfg: &TrainConfig,
    settings: &PipelineSettings,
    options: &CvOptions,
) -> Result<GridResult, EvalError> {
    grid.validate()?;
    let rows: Vec<GridRow> = grid
        .cells(variant)
        .into_par_iter()
        .map(|hp| {
            let cell_cfg = TrainConfig {
                seed: cell_seed(cfg.seed, &hp),
                ..cfg.clone()
            };
            match kfold_evaluate(variant, dataset, &hp, &cell_cfg, settings, plan, options) {
                Ok(r) => GridRow {
                    hyper: hp,
                    seed: cell_cfg.seed,
                    mean_mspe: Some(r.mean_mspe),
                    mean_weighted_mspe: r.mean_weighted_mspe,
                    error: None,
                },
                Err(e) => GridRow {
                    hyper: hp,
                    seed: cell_cfg.seed,
                    mean_mspe: None,
                    mean_weighted_mspe: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let best = select_best(&rows).ok_or_else(|| {
        EvalError::AllCellsFailed(rows.iter().find_map(|r| r.error.clone()).unwrap_or_default())
    })?;
    Ok(GridResult {
        variant,
        best: rows[best].hyper,
        best_mspe: rows[best].mean_mspe.expect("best row is scored"),
        rows,
    })
}

impl GridResult {
    /// Columns: `M, P, H, L, N, seed, mean_mspe, mean_weighted_mspe, error`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["M", "P", "H", "L", "N", "seed", "mean_mspe", "mean_weighted_mspe", "error"])?;
        for r in &self.rows {
            let hp = r.hyper;
            w.write_record([
                hp.m.to_string(),
                hp.p.to_string(),
                hp.h.to_string(),
                hp.layers.to_string(),
                hp.width.to_string(),
                r.seed.to_string(),
                opt(r.mean_mspe),
                opt(r.mean_weighted_mspe),
                r.error.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Quantity varied by [`sensitivity_sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParameter {
    /// Registration basis size.
    B,
    M,
    P,
    H,
}

impl std::str::FromStr for SweepParameter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "B" => Ok(SweepParameter::B),
            "M" => Ok(SweepParameter::M),
            "P" => Ok(SweepParameter::P),
            "H" => Ok(SweepParameter::H),
            _ => Err(format!("unknown sweep parameter '{s}' (expected B, M, P or H)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: usize,
    pub cv_mspe: f64,
}

/// CV error as one setting varies with everything else fixed.
#[allow(clippy::too_many_arguments)]
pub fn sensitivity_sweep(
    parameter: SweepParameter,
    values: &[usize],
    variant: ModelVariant,
    dataset: &SpatialDataset,
    hp: &HyperParams,
    cfg: &TrainConfig,
    settings: &PipelineSettings,
    plan: &FoldPlan,
    options: &CvOptions,
) -> Result<Vec<SweepPoint>, EvalError> {
    if values.is_empty() {
        return Err(EvalError::EmptyRange);
    }
    values
        .par_iter()
        .map(|&value| {
            let mut hp = *hp;
            let mut settings = *settings;
            match parameter {
                SweepParameter::B => settings.registration_size = value,
                SweepParameter::M => hp.m = value,
                SweepParameter::P => hp.p = value,
                SweepParameter::H => hp.h = value,
            }
            let r = kfold_evaluate(variant, dataset, &hp, cfg, &settings, plan, options)?;
            Ok(SweepPoint {
                value,
                cv_mspe: r.mean_mspe,
            })
        })
        .collect()
}
