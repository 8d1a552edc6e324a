//! Run configuration: a JSON document (see `docs/config.schema.json`)
//! overridden by command-line flags.

use std::path::{Path, PathBuf};

use dsnet::evaluation::HyperGrid;
use dsnet::model::{HyperParams, ModelVariant, PipelineSettings};
use dsnet::nn::TrainConfig;
use dsnet::simulation::{LinkFunction, MidwestConfig, ScenarioConfig};
use serde::{Deserialize, Serialize};

use crate::cli::{Command, Overrides};
use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    /// Master seed; every random stream of the run derives from it.
    pub seed: u64,
    pub output_dir: PathBuf,
    pub data: DataConfig,
    pub simulation: SimulationConfig,
    pub variant: ModelVariant,
    pub hyper: HyperParams,
    pub grid: HyperGrid,
    pub train: TrainConfig,
    pub pipeline: PipelineSettings,
    pub cv: CvConfig,
    /// Fitted model file, for `predict` and weight-surface dumps.
    pub model: Option<PathBuf>,
    pub basis_dump: BasisDumpConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: 0,
            output_dir: PathBuf::from("dsnet-out"),
            data: DataConfig::default(),
            simulation: SimulationConfig::default(),
            variant: ModelVariant::Dsnet,
            hyper: HyperParams {
                m: 5,
                p: 10,
                h: 30,
                layers: 2,
                width: 32,
            },
            grid: HyperGrid::default(),
            train: TrainConfig::default(),
            pipeline: PipelineSettings::default(),
            cv: CvConfig::default(),
            model: None,
            basis_dump: BasisDumpConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Directory holding `locations.csv`, `yield.csv`, `temperature.csv`
    /// and `precipitation.csv`.
    pub dir: Option<PathBuf>,
    /// A dataset JSON document as written by `simulate` for Scenario 1.
    pub dataset: Option<PathBuf>,
    /// Counties with fewer observed years are left out of training.
    pub min_years: usize,
    /// Model yield anomalies (responses minus the year mean). Defaults to
    /// true for CSV directories and false for dataset documents.
    pub anomalies: Option<bool>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            dir: None,
            dataset: None,
            min_years: 5,
            anomalies: None,
        }
    }
}

impl DataConfig {
    pub fn anomalies(&self) -> bool {
        self.anomalies.unwrap_or(self.dir.is_some())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimulationKind {
    #[default]
    Scenario1,
    Midwest,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub kind: SimulationKind,
    pub scenario1: ScenarioConfig,
    pub midwest: MidwestConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvConfig {
    pub folds: usize,
    /// Keep all years of a county in one fold.
    pub county_blocked: bool,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            folds: 5,
            county_blocked: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DumpKind {
    #[default]
    Fourier,
    Mrts,
    Weights,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BasisDumpConfig {
    pub kind: DumpKind,
    /// Number of basis functions (Fourier or MRTS).
    pub size: usize,
    /// Include the constant Fourier function.
    pub constant: bool,
    /// Uniform time points on `[0, 1]`.
    pub time_points: usize,
    /// Weight surfaces: `n × n` evaluation grid over the model's knot box.
    pub site_grid: usize,
}

impl Default for BasisDumpConfig {
    fn default() -> Self {
        Self {
            kind: DumpKind::Fourier,
            size: 9,
            constant: true,
            time_points: 100,
            site_grid: 20,
        }
    }
}

impl RunConfig {
    /// Read `path`, resolving relative paths inside it against its directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.output_dir);
        cfg.data.dir.as_mut().map(resolve);
        cfg.data.dataset.as_mut().map(resolve);
        cfg.model.as_mut().map(resolve);
        Ok(cfg)
    }

    /// Apply flags on top of the file (flags win).
    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = &o.out {
            self.output_dir = v.clone();
        }
        if let Some(v) = &o.data_dir {
            self.data.dir = Some(v.clone());
            self.data.dataset = None;
        }
        if let Some(v) = &o.dataset {
            self.data.dataset = Some(v.clone());
            self.data.dir = None;
        }
        if let Some(v) = o.min_years {
            self.data.min_years = v;
        }
        if let Some(v) = o.anomalies {
            self.data.anomalies = Some(v);
        }
        if let Some(v) = &o.model {
            self.model = Some(v.clone());
        }
        if let Some(v) = &o.variant {
            self.variant = v.parse().map_err(|e: dsnet::model::ModelError| CliError::config(format!("--variant: {e}")))?;
        }
        let hp = &mut self.hyper;
        for (flag, slot) in [(o.m, &mut hp.m), (o.p, &mut hp.p), (o.h, &mut hp.h), (o.layers, &mut hp.layers), (o.width, &mut hp.width)] {
            if let Some(v) = flag {
                *slot = v;
            }
        }
        if let Some(v) = o.epochs {
            self.train.epochs = v;
        }
        if let Some(v) = o.learning_rate {
            self.train.learning_rate = v;
        }
        if let Some(v) = o.batch_size {
            self.train.batch_size = v;
        }
        if let Some(v) = o.folds {
            self.cv.folds = v;
        }
        if o.county_blocked {
            self.cv.county_blocked = true;
        }
        if let Some(v) = o.registration_size {
            self.pipeline.registration_size = v;
        }
        if let Some(v) = o.simulation {
            self.simulation.kind = v;
        }
        if let Some(v) = o.link {
            self.simulation.scenario1.link = LinkFunction::scenario1(v);
        }
        if let Some(v) = o.dump {
            self.basis_dump.kind = v;
        }
        if let Some(v) = o.size {
            self.basis_dump.size = v;
        }
        Ok(())
    }

    /// The training configuration with the master seed applied.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        }
    }

    /// Check everything `command` needs before any work or output.
    pub fn validate(&self, command: &Command) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::config(format!(
                "schema_version: expected {SCHEMA_VERSION}, got {}",
                self.schema_version
            )));
        }
        if self.output_dir.as_os_str().is_empty() {
            return Err(CliError::config("output_dir: must not be empty"));
        }
        let needs_data = matches!(command, Command::Fit | Command::Predict | Command::Cv | Command::Tune)
            || (matches!(command, Command::BasisDump) && self.basis_dump.kind == DumpKind::Mrts);
        if needs_data && self.data.dir.is_none() && self.data.dataset.is_none() {
            return Err(CliError::config("data: set data.dir or data.dataset (or --data-dir / --dataset)"));
        }
        if self.data.dir.is_some() && self.data.dataset.is_some() {
            return Err(CliError::config("data: data.dir and data.dataset are mutually exclusive"));
        }
        let needs_model = matches!(command, Command::Predict)
            || (matches!(command, Command::BasisDump) && self.basis_dump.kind == DumpKind::Weights);
        if needs_model && self.model.is_none() {
            return Err(CliError::config("model: a fitted model path is required (or --model)"));
        }
        if matches!(command, Command::Fit | Command::Cv | Command::Tune) {
            self.train.validate().map_err(|e| CliError::config(format!("train: {e}")))?;
            self.pipeline.validate().map_err(|e| CliError::config(format!("pipeline: {e}")))?;
        }
        if matches!(command, Command::Fit | Command::Cv) {
            self.hyper.validate().map_err(|e| CliError::config(format!("hyper: {e}")))?;
            self.variant.check(&self.hyper).map_err(|e| CliError::config(format!("hyper: {e}")))?;
        }
        if matches!(command, Command::Cv | Command::Tune) && self.cv.folds < 2 {
            return Err(CliError::config(format!("cv.folds: must be at least 2, got {}", self.cv.folds)));
        }
        if matches!(command, Command::Tune) {
            self.grid.validate().map_err(|e| CliError::config(format!("grid: {e}")))?;
        }
        if matches!(command, Command::Simulate) {
            match self.simulation.kind {
                SimulationKind::Scenario1 => self.simulation.scenario1.validate(),
                SimulationKind::Midwest => self.simulation.midwest.validate(),
            }
            .map_err(|e| CliError::config(format!("simulation: {e}")))?;
        }
        if matches!(command, Command::BasisDump) {
            let d = &self.basis_dump;
            if d.size == 0 || d.time_points < 2 || d.site_grid == 0 {
                return Err(CliError::config(
                    "basis_dump: size and site_grid must be positive and time_points at least 2",
                ));
            }
            if d.kind == DumpKind::Mrts && d.size < 3 {
                return Err(CliError::config("basis_dump.size: an MRTS basis needs at least 3 functions"));
            }
        }
        Ok(())
    }
}
