use std::io::Write;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::mlp::{BackwardScratch, ForwardCache};
use super::{AdamState, MlpParams, NnError};
use crate::seed;

/// Optimizer and early-stopping settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Multiplicative learning-rate decay applied once per epoch.
    pub decay_rate: f64,
    pub validation_fraction: f64,
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            batch_size: 64,
            learning_rate: 1e-3,
            decay_rate: 0.99,
            validation_fraction: 0.2,
            patience: 30,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        let bad = |field: &'static str, value: f64| Err(NnError::InvalidConfig { field, value });
        if self.epochs == 0 {
            return bad("epochs", 0.0);
        }
        if self.batch_size == 0 {
            return bad("batch_size", 0.0);
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate", self.learning_rate);
        }
        if !(self.decay_rate > 0.0 && self.decay_rate <= 1.0) {
            return bad("decay_rate", self.decay_rate);
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction <= 0.5) {
            return bad("validation_fraction", self.validation_fraction);
        }
        if self.patience == 0 {
            return bad("patience", 0.0);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochLog>,
    pub best_epoch: usize,
}

impl TrainingLog {
    pub fn best(&self) -> Option<&EpochLog> {
        self.epochs.iter().find(|e| e.epoch == self.best_epoch)
    }

    /// Multiply every recorded loss by `factor` (unit conversion).
    pub fn rescale(&mut self, factor: f64) {
        for e in &mut self.epochs {
            e.train_mse *= factor;
            e.val_mse *= factor;
        }
    }

    /// CSV with columns `epoch,train_mse,val_mse`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["epoch", "train_mse", "val_mse"])?;
        for e in &self.epochs {
            w.write_record([e.epoch.to_string(), e.train_mse.to_string(), e.val_mse.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: MlpParams,
    pub log: TrainingLog,
    /// Row indices (into the training data) held out for early stopping.
    pub validation_rows: Vec<usize>,
}

/// Mini-batch MSE training with Adam and early stopping.
///
/// A seeded shuffle carves `validation_fraction` of the rows into a
/// validation set. Epoch 0 records the initial losses; each later epoch
/// reshuffles the training rows, takes Adam steps on batch-mean gradients and
/// records full-pass losses. Training stops after `patience` epochs without a
/// strict validation improvement (or at once when the validation loss is
/// exactly zero) and the best-validation snapshot is returned. A batch size
/// larger than the training split is clamped to it.
pub fn train(
    params_init: MlpParams,
    features: &[Vec<f64>],
    targets: &[f64],
    cfg: &TrainConfig,
) -> Result<TrainOutcome, NnError> {
    cfg.validate()?;
    let n = features.len();
    if targets.len() != n {
        return Err(NnError::Shape {
            expected: n,
            got: targets.len(),
        });
    }
    if n < 10 {
        return Err(NnError::TooFewRecords(n));
    }
    let d = params_init.input_dim();
    if let Some(row) = features.iter().find(|r| r.len() != d) {
        return Err(NnError::Shape {
            expected: d,
            got: row.len(),
        });
    }

    let mut rng = seed::rng(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_val = ((n as f64 * cfg.validation_fraction).round() as usize).clamp(1, n - 1);
    let validation_rows = order[n - n_val..].to_vec();
    let mut train_rows = order[..n - n_val].to_vec();
    let batch_size = cfg.batch_size.min(train_rows.len());

    let mut params = params_init;
    let mut cache = ForwardCache::new(&params);
    let mut scratch = BackwardScratch::new(&params);
    let mut grad = params.zeros_like();
    let mut adam = AdamState::new(&params, cfg.learning_rate);

    let mse = |p: &MlpParams, rows: &[usize], cache: &mut ForwardCache| -> f64 {
        rows.iter()
            .map(|&i| {
                let r = p.forward_into(&features[i], cache) - targets[i];
                r * r
            })
            .sum::<f64>()
            / rows.len() as f64
    };

    let mut log = TrainingLog::default();
    let first = EpochLog {
        epoch: 0,
        train_mse: mse(&params, &train_rows, &mut cache),
        val_mse: mse(&params, &validation_rows, &mut cache),
    };
    if !first.train_mse.is_finite() || !first.val_mse.is_finite() {
        return Err(NnError::Diverged { epoch: 0 });
    }
    log.epochs.push(first);
    let mut best = params.clone();
    let mut best_val = first.val_mse;

    for epoch in 1..=cfg.epochs {
        if best_val == 0.0 || epoch - log.best_epoch > cfg.patience {
            break;
        }
        adam.learning_rate = cfg.learning_rate * cfg.decay_rate.powi(epoch as i32 - 1);
        train_rows.shuffle(&mut rng);
        for batch in train_rows.chunks(batch_size) {
            grad.as_mut_slice().iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                params.forward_into(&features[i], &mut cache);
                params.accumulate_gradient(&cache, targets[i], scale, &mut grad, &mut scratch);
            }
            adam.step(&mut params, &grad)?;
        }
        let entry = EpochLog {
            epoch,
            train_mse: mse(&params, &train_rows, &mut cache),
            val_mse: mse(&params, &validation_rows, &mut cache),
        };
        if !entry.train_mse.is_finite() || !entry.val_mse.is_finite() || !params.is_finite() {
            return Err(NnError::Diverged { epoch });
        }
        log.epochs.push(entry);
        if entry.val_mse < best_val {
            best_val = entry.val_mse;
            best.clone_from(&params);
            log.best_epoch = epoch;
        }
    }

    Ok(TrainOutcome {
        params: best,
        log,
        validation_rows,
    })
}
