//! The DSNet estimator and its ablation variants.
//!
//! Every variant runs the same pipeline: register curves on a Fourier basis,
//! embed sites with an MRTS family, build the feature vector, standardize,
//! train an MLP. Variants only restrict the feature blocks:
//!
//! | variant   | spatial weights (P) | random effect (H) |
//! |-----------|---------------------|-------------------|
//! | `FNN`     | 1 (constant ψ)      | 0                 |
//! | `FNN_SVW` | ≥ 2                 | 0                 |
//! | `FNN_SRE` | 1 (constant ψ)      | ≥ 1               |
//! | `DSNET`   | any                 | any               |
//!
//! `DSNET` accepts the restricted settings too, in which case it coincides
//! with the corresponding submodel exactly.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::basis::{BasisError, FourierBasis, KnotLayout, MrtsBasis, POLY_DIM};
use crate::data_io::{Record, SpatialDataset};
use crate::features::{FeatureDims, FeatureError, FeatureIndex, FeatureSpec, FeatureStandardizer, SpatialEmbedding};
use crate::functional::{FunctionalError, RegisteredFunction, Registrar};
use crate::geometry::Point;
use crate::nn::{train, MlpParams, NnError, TrainConfig, TrainingLog};
use crate::seed::{self, Stream};

#[derive(Error, Debug, Clone, PartialEq)]
pub enum ModelError {
    #[error("no trainable records")]
    EmptyDataset,
    #[error("{variant} requires {requirement}")]
    Restriction {
        variant: ModelVariant,
        requirement: &'static str,
    },
    #[error("invalid hyperparameter {field} = {value}")]
    InvalidHyper { field: &'static str, value: usize },
    #[error("invalid pipeline setting: {0}")]
    InvalidSetting(String),
    #[error("{operation} is not available for {variant}")]
    UnsupportedVariant {
        variant: ModelVariant,
        operation: &'static str,
    },
    #[error("unknown model variant '{0}'")]
    UnknownVariant(String),
    #[error("record ({county_id}, {year}): {message}")]
    RecordShape {
        county_id: String,
        year: i32,
        message: String,
    },
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Functional(#[from] FunctionalError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

impl ModelError {
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            ModelError::Nn(NnError::Diverged { .. })
                | ModelError::Basis(BasisError::RankDeficient { .. } | BasisError::Collinear)
                | ModelError::Functional(FunctionalError::IllPosedRegistration { .. })
                | ModelError::Feature(FeatureError::Functional(FunctionalError::IllPosedRegistration { .. }))
        )
    }
}

/// The ablation ladder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelVariant {
    #[serde(rename = "FNN")]
    Fnn,
    #[serde(rename = "FNN_SVW")]
    FnnSvw,
    #[serde(rename = "FNN_SRE")]
    FnnSre,
    #[serde(rename = "DSNET")]
    Dsnet,
}

impl ModelVariant {
    pub const ALL: [ModelVariant; 4] = [ModelVariant::Fnn, ModelVariant::FnnSvw, ModelVariant::FnnSre, ModelVariant::Dsnet];

    pub fn name(&self) -> &'static str {
        match self {
            ModelVariant::Fnn => "FNN",
            ModelVariant::FnnSvw => "FNN_SVW",
            ModelVariant::FnnSre => "FNN_SRE",
            ModelVariant::Dsnet => "DSNET",
        }
    }

    /// Force `hp` into this variant's restriction (P = 1 and/or H = 0).
    pub fn restrict(&self, hp: HyperParams) -> HyperParams {
        match self {
            ModelVariant::Fnn => HyperParams { p: 1, h: 0, ..hp },
            ModelVariant::FnnSvw => HyperParams { h: 0, ..hp },
            ModelVariant::FnnSre => HyperParams { p: 1, ..hp },
            ModelVariant::Dsnet => hp,
        }
    }

    /// Check that `hp` satisfies this variant's restriction.
    pub fn check(&self, hp: &HyperParams) -> Result<(), ModelError> {
        let fail = |requirement| {
            Err(ModelError::Restriction {
                variant: *self,
                requirement,
            })
        };
        match self {
            ModelVariant::Fnn if hp.p != 1 || hp.h != 0 => fail("P = 1 and H = 0"),
            ModelVariant::FnnSvw if hp.p < 2 || hp.h != 0 => fail("P >= 2 and H = 0"),
            ModelVariant::FnnSre if hp.p != 1 || hp.h == 0 => fail("P = 1 and H >= 1"),
            _ => Ok(()),
        }
    }

    /// Whether the first-layer weights vary over space.
    pub fn has_spatial_weights(&self) -> bool {
        matches!(self, ModelVariant::FnnSvw | ModelVariant::Dsnet)
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelVariant {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_uppercase().replace('-', "_");
        match norm.as_str() {
            "FNN" => Ok(ModelVariant::Fnn),
            "FNN_SVW" | "FNN(I)" | "FNN_I" => Ok(ModelVariant::FnnSvw),
            "FNN_SRE" | "FNN(II)" | "FNN_II" => Ok(ModelVariant::FnnSre),
            "DSNET" => Ok(ModelVariant::Dsnet),
            _ => Err(ModelError::UnknownVariant(s.to_string())),
        }
    }
}

/// Tuned hyperparameters: weight basis size `M`, spatial-weight basis size
/// `P`, random-effect basis size `H`, hidden layers `L` and width `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperParams {
    pub m: usize,
    pub p: usize,
    pub h: usize,
    pub layers: usize,
    pub width: usize,
}

impl HyperParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        for (field, value) in [("M", self.m), ("P", self.p), ("L", self.layers), ("N", self.width)] {
            if value == 0 {
                return Err(ModelError::InvalidHyper { field, value });
            }
        }
        Ok(())
    }

    pub fn hidden(&self) -> Vec<usize> {
        vec![self.width; self.layers]
    }

    /// MRTS family size covering both ψ and φ.
    pub fn spatial_basis_size(&self) -> usize {
        self.p.max(self.h).max(POLY_DIM)
    }
}

/// Settings that are fixed per experiment rather than tuned.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSettings {
    /// Fourier functions used to register observed curves (`B`).
    pub registration_size: usize,
    /// Whether the Fourier families start with the constant function.
    pub fourier_constant: bool,
    pub knot_layout: KnotLayout,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        Self {
            registration_size: 21,
            fourier_constant: true,
            knot_layout: KnotLayout::Auto,
        }
    }
}

impl PipelineSettings {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.registration_size == 0 {
            return Err(ModelError::InvalidSetting("registration_size must be at least 1".into()));
        }
        if let KnotLayout::Grid { nx, ny } = self.knot_layout {
            if nx < 2 || ny < 2 {
                return Err(ModelError::InvalidSetting(format!("knot grid {nx}x{ny} must be at least 2x2")));
            }
        }
        Ok(())
    }

    pub fn registration_basis(&self) -> Result<FourierBasis, ModelError> {
        Ok(FourierBasis::new(self.registration_size, self.fourier_constant)?)
    }
}

/// Centring and scaling of the response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetScaler {
    pub mean: f64,
    pub sd: f64,
}

impl TargetScaler {
    pub fn fit(y: &[f64]) -> Self {
        let n = y.len() as f64;
        let mean = y.iter().sum::<f64>() / n;
        let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let sd = var.sqrt();
        Self {
            mean,
            sd: if sd > 0.0 && sd.is_finite() { sd } else { 1.0 },
        }
    }

    pub fn apply(&self, y: f64) -> f64 {
        (y - self.mean) / self.sd
    }

    pub fn invert(&self, z: f64) -> f64 {
        z * self.sd + self.mean
    }
}

/// A sealed model: `predict` depends only on this record and its input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub variant: ModelVariant,
    pub hyper: HyperParams,
    pub settings: PipelineSettings,
    pub train_config: TrainConfig,
    pub spec: FeatureSpec,
    pub standardizer: FeatureStandardizer,
    pub target: TargetScaler,
    pub params: MlpParams,
    /// Number of functional covariates and scalars seen at fit time.
    pub n_curves: usize,
    pub n_scalars: usize,
    /// SHA-256 of the variant, hyperparameters, settings and training config.
    pub config_hash: String,
    pub seed: u64,
    pub crate_version: String,
    /// Year means of the training responses when they were anomalies; used
    /// to re-inflate predictions.
    #[serde(default)]
    pub anomaly_means: Option<BTreeMap<i32, f64>>,
}

/// A fitted model plus its training trace (losses in response units).
#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    pub model: FittedModel,
    pub log: TrainingLog,
    /// Dataset indices used for training proper (early-stopping rows excluded).
    pub train_indices: Vec<usize>,
    /// Dataset indices held out for early stopping.
    pub validation_indices: Vec<usize>,
}

/// Hash of everything that determines a fit besides the data.
pub fn config_hash(
    variant: ModelVariant,
    hp: &HyperParams,
    settings: &PipelineSettings,
    cfg: &TrainConfig,
) -> String {
    let text = serde_json::to_string(&(variant, hp, settings, cfg)).expect("plain structs serialize");
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Registrars keyed by observation grid.
struct RegistrarCache {
    basis: FourierBasis,
    entries: Vec<Registrar>,
}

impl RegistrarCache {
    fn new(basis: FourierBasis) -> Self {
        Self {
            basis,
            entries: Vec::new(),
        }
    }

    fn register(&mut self, sample: &crate::functional::FunctionalSample) -> Result<RegisteredFunction, FunctionalError> {
        if let Some(r) = self.entries.iter().find(|r| r.grid() == sample.grid()) {
            return r.register_values(sample.values());
        }
        let r = Registrar::new(self.basis, sample.grid())?;
        let out = r.register_values(sample.values());
        self.entries.push(r);
        out
    }
}

/// Raw (unstandardized) feature rows for `records`.
fn raw_features(
    spec: &FeatureSpec,
    registration: FourierBasis,
    records: &[&Record],
    n_curves: usize,
    n_scalars: usize,
) -> Result<Vec<Vec<f64>>, ModelError> {
    let mut registrars = RegistrarCache::new(registration);
    let mut embeddings: HashMap<(u64, u64), SpatialEmbedding> = HashMap::new();
    let mut rows = Vec::with_capacity(records.len());
    for r in records {
        if r.curves.len() != n_curves || r.scalars.len() != n_scalars {
            return Err(ModelError::RecordShape {
                county_id: r.county_id.clone(),
                year: r.year,
                message: format!(
                    "{} curves and {} scalars, model expects {n_curves} and {n_scalars}",
                    r.curves.len(),
                    r.scalars.len()
                ),
            });
        }
        let registered = r
            .curves
            .iter()
            .map(|c| registrars.register(c))
            .collect::<Result<Vec<_>, _>>()?;
        let inner = spec.inner_products(&registered)?;
        let key = (r.location.x.to_bits(), r.location.y.to_bits());
        let emb = embeddings.entry(key).or_insert_with(|| spec.embed(&r.location));
        rows.push(spec.assemble(emb, &inner, &r.scalars)?);
    }
    Ok(rows)
}

/// Fit `variant` on the trainable records of `dataset`.
///
/// Bases, the feature standardizer and the target scaler are fitted on those
/// records only. The MRTS family has `max(P, H, 3)` functions on knots laid
/// out over the training sites; ψ takes its first `P` functions and φ its
/// first `H`.
pub fn fit(
    variant: ModelVariant,
    dataset: &SpatialDataset,
    hp: &HyperParams,
    cfg: &TrainConfig,
    settings: &PipelineSettings,
) -> Result<FitOutcome, ModelError> {
    hp.validate()?;
    variant.check(hp)?;
    settings.validate()?;
    cfg.validate()?;
    let idx = dataset.trainable_indices();
    if idx.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let records: Vec<&Record> = idx.iter().map(|&i| &dataset.records()[i]).collect();
    let (n_curves, n_scalars) = (dataset.n_curves(), dataset.n_scalars());

    let registration = settings.registration_basis()?;
    let weight_basis = FourierBasis::new(hp.m, settings.fourier_constant)?;
    let training_sites = dataset.subset(&idx).sites();
    let mrts = MrtsBasis::fit_layout(&training_sites, hp.spatial_basis_size(), settings.knot_layout)?;
    let dims = FeatureDims {
        k: n_curves,
        m: hp.m,
        j: n_scalars,
        p: hp.p,
        h: hp.h,
    };
    let spec = FeatureSpec::new(dims, weight_basis, mrts, None)?;

    let raw = raw_features(&spec, registration, &records, n_curves, n_scalars)?;
    let standardizer = FeatureStandardizer::fit(&raw)?;
    let features = raw
        .iter()
        .map(|r| standardizer.apply(r))
        .collect::<Result<Vec<_>, _>>()?;
    let y: Vec<f64> = records.iter().map(|r| r.response.expect("trainable")).collect();
    let target = TargetScaler::fit(&y);
    let targets: Vec<f64> = y.iter().map(|v| target.apply(*v)).collect();

    let mut init_rng = seed::rng(seed::derive(cfg.seed, Stream::Fit, 0));
    let init = MlpParams::glorot(spec.dimension(), &hp.hidden(), &mut init_rng)?;
    let outcome = train(init, &features, &targets, cfg)?;
    let mut log = outcome.log;
    log.rescale(target.sd * target.sd);
    let mut validation_indices: Vec<usize> = outcome.validation_rows.iter().map(|&v| idx[v]).collect();
    validation_indices.sort_unstable();
    let train_indices: Vec<usize> = idx
        .iter()
        .copied()
        .filter(|i| validation_indices.binary_search(i).is_err())
        .collect();

    Ok(FitOutcome {
        model: FittedModel {
            variant,
            hyper: *hp,
            settings: *settings,
            train_config: cfg.clone(),
            spec,
            standardizer,
            target,
            params: outcome.params,
            n_curves,
            n_scalars,
            config_hash: config_hash(variant, hp, settings, cfg),
            seed: cfg.seed,
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            anomaly_means: dataset.meta().anomaly.then(|| dataset.meta().year_means.clone()),
        },
        log,
        train_indices,
        validation_indices,
    })
}

impl FittedModel {
    /// Standardized feature rows for `records`.
    pub fn design(&self, records: &[&Record]) -> Result<Vec<Vec<f64>>, ModelError> {
        let registration = self.settings.registration_basis()?;
        raw_features(&self.spec, registration, records, self.n_curves, self.n_scalars)?
            .iter()
            .map(|r| self.standardizer.apply(r).map_err(ModelError::from))
            .collect()
    }

    /// Predictions in the units of the training responses.
    pub fn predict(&self, records: &[Record]) -> Result<Vec<f64>, ModelError> {
        let refs: Vec<&Record> = records.iter().collect();
        self.predict_refs(&refs)
    }

    pub fn predict_refs(&self, records: &[&Record]) -> Result<Vec<f64>, ModelError> {
        self.design(records)?
            .iter()
            .map(|x| Ok(self.target.invert(self.params.predict(x)?)))
            .collect()
    }

    /// Predictions for every record of `dataset`, including those without
    /// a response.
    pub fn predict_dataset(&self, dataset: &SpatialDataset) -> Result<Vec<f64>, ModelError> {
        self.predict(dataset.records())
    }

    /// Weight on raw feature slots for hidden neuron `neuron`: the learned
    /// first-layer weight divided by the slot's training standard deviation.
    pub fn effective_weights(&self, neuron: usize) -> Vec<f64> {
        self.params
            .first_layer_row(neuron)
            .iter()
            .enumerate()
            .map(|(i, w)| w * self.standardizer.raw_weight_factor(i))
            .collect()
    }

    /// `β_ik(s;t)` and `ω_ij(s)` for every first-layer neuron `i` over the
    /// given sites and times.
    pub fn export_weight_surfaces(&self, sites: &[Point], times: &[f64]) -> Result<WeightSurfaces, ModelError> {
        if !self.variant.has_spatial_weights() {
            return Err(ModelError::UnsupportedVariant {
                variant: self.variant,
                operation: "spatially varying weight surfaces",
            });
        }
        crate::basis::check_grid(times)?;
        let dims = *self.spec.dims();
        let n_neurons = self.params.sizes()[1];
        let psi: Vec<Vec<f64>> = sites
            .iter()
            .map(|s| self.spec.psi_basis().eval_prefix(s, dims.p))
            .collect();
        let f: Vec<Vec<f64>> = times
            .iter()
            .map(|t| self.spec.weight_basis().eval_all(*t))
            .collect::<Result<_, _>>()?;
        let mut functional = Vec::with_capacity(n_neurons);
        let mut scalar = Vec::with_capacity(n_neurons);
        for i in 0..n_neurons {
            let w = self.effective_weights(i);
            functional.push(
                (0..dims.k)
                    .map(|k| {
                        psi.iter()
                            .map(|ps| f.iter().map(|ft| self.spec.functional_weight_with(&w, k, ps, ft)).collect())
                            .collect()
                    })
                    .collect(),
            );
            scalar.push(
                (0..dims.j)
                    .map(|j| psi.iter().map(|ps| self.spec.scalar_weight_with(&w, j, ps)).collect())
                    .collect(),
            );
        }
        Ok(WeightSurfaces {
            sites: sites.to_vec(),
            times: times.to_vec(),
            functional,
            scalar,
        })
    }

    /// Prediction on the original response scale: adds the training year
    /// mean when the model was fitted on anomalies. `None` if that year was
    /// not seen in training.
    pub fn reinflate(&self, year: i32, prediction: f64) -> Option<f64> {
        match &self.anomaly_means {
            Some(means) => means.get(&year).map(|m| prediction + m),
            None => Some(prediction),
        }
    }

    /// Slot of a feature in the input vector.
    pub fn slot(&self, index: FeatureIndex) -> usize {
        self.spec.slot(index)
    }
}

/// Learned weight functions per first-layer neuron.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSurfaces {
    pub sites: Vec<Point>,
    pub times: Vec<f64>,
    /// `functional[i][k][s][t] = β_ik(s;t)`.
    pub functional: Vec<Vec<Vec<Vec<f64>>>>,
    /// `scalar[i][j][s] = ω_ij(s)`.
    pub scalar: Vec<Vec<Vec<f64>>>,
}

impl WeightSurfaces {
    /// Long format: `neuron, k, x, y, t, beta`.
    pub fn write_functional_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["neuron", "k", "x", "y", "t", "beta"])?;
        for (i, per_k) in self.functional.iter().enumerate() {
            for (k, per_s) in per_k.iter().enumerate() {
                for (s, per_t) in per_s.iter().enumerate() {
                    for (t, v) in per_t.iter().enumerate() {
                        w.write_record([
                            (i + 1).to_string(),
                            (k + 1).to_string(),
                            self.sites[s].x.to_string(),
                            self.sites[s].y.to_string(),
                            self.times[t].to_string(),
                            v.to_string(),
                        ])?;
                    }
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Long format: `neuron, j, x, y, omega`.
    pub fn write_scalar_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["neuron", "j", "x", "y", "omega"])?;
        for (i, per_j) in self.scalar.iter().enumerate() {
            for (j, per_s) in per_j.iter().enumerate() {
                for (s, v) in per_s.iter().enumerate() {
                    w.write_record([
                        (i + 1).to_string(),
                        (j + 1).to_string(),
                        self.sites[s].x.to_string(),
                        self.sites[s].y.to_string(),
                        v.to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hp(p: usize, h: usize) -> HyperParams {
        HyperParams {
            m: 5,
            p,
            h,
            layers: 2,
            width: 8,
        }
    }

    #[test]
    fn restrictions() {
        assert!(ModelVariant::Fnn.check(&hp(1, 0)).is_ok());
        assert!(ModelVariant::Fnn.check(&hp(5, 0)).is_err());
        assert!(ModelVariant::FnnSvw.check(&hp(5, 0)).is_ok());
        assert!(ModelVariant::FnnSvw.check(&hp(5, 3)).is_err());
        assert!(ModelVariant::FnnSre.check(&hp(1, 10)).is_ok());
        assert!(ModelVariant::FnnSre.check(&hp(1, 0)).is_err());
        assert!(ModelVariant::Dsnet.check(&hp(1, 0)).is_ok());
        for v in ModelVariant::ALL {
            assert!(v.check(&v.restrict(hp(5, 10))).is_ok());
        }
    }

    #[test]
    fn variant_names_round_trip() {
        for v in ModelVariant::ALL {
            assert_eq!(v.name().parse::<ModelVariant>().unwrap(), v);
            let json = serde_json::to_string(&v).unwrap();
            assert_eq!(json, format!("\"{}\"", v.name()));
        }
        assert!("svfm".parse::<ModelVariant>().is_err());
    }

    #[test]
    fn target_scaler_round_trip() {
        let s = TargetScaler::fit(&[1.0, 3.0]);
        assert_eq!((s.mean, s.sd), (2.0, 1.0));
        assert_eq!(s.invert(s.apply(7.5)), 7.5);
        assert_eq!(TargetScaler::fit(&[4.0, 4.0]).sd, 1.0);
    }

    #[test]
    fn config_hash_sensitive() {
        let cfg = TrainConfig::default();
        let s = PipelineSettings::default();
        let a = config_hash(ModelVariant::Dsnet, &hp(5, 10), &s, &cfg);
        let b = config_hash(ModelVariant::Dsnet, &hp(5, 11), &s, &cfg);
        assert_ne!(a, b);
        assert_eq!(a, config_hash(ModelVariant::Dsnet, &hp(5, 10), &s, &cfg));
    }
}
