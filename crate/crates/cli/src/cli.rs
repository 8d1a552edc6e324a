use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use dsnet::simulation::LinkKind;

use crate::config::{DumpKind, SimulationKind};

/// Deep spatial regression with functional and scalar predictors.
///
/// Settings come from an optional JSON config file; flags override it.
/// Exit codes: 0 success, 2 config error, 3 data error, 4 numerical
/// failure, 5 I/O error.
#[derive(Debug, Parser)]
#[command(name = "dsnet", version, about, long_about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Generate a Scenario 1 or midwest-like synthetic dataset.
    Simulate,
    /// Train one model variant and write the model and its training log.
    Fit,
    /// Predict with a fitted model; anomaly models are re-inflated.
    Predict,
    /// K-fold cross-validation of one configuration.
    Cv,
    /// Grid search over hyperparameters by K-fold cross-validation.
    Tune,
    /// Write Fourier or MRTS basis values, or a model's weight surfaces.
    BasisDump,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Fit => "fit",
            Command::Predict => "predict",
            Command::Cv => "cv",
            Command::Tune => "tune",
            Command::BasisDump => "basis-dump",
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// JSON run configuration.
    #[arg(short, long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(short, long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Directory with locations/yield/temperature/precipitation CSVs.
    #[arg(long, global = true, value_name = "DIR")]
    pub data_dir: Option<PathBuf>,
    /// Dataset JSON document (as written by `simulate` for Scenario 1).
    #[arg(long, global = true, value_name = "FILE")]
    pub dataset: Option<PathBuf>,
    /// Minimum observed years for a county to enter training.
    #[arg(long, global = true)]
    pub min_years: Option<usize>,
    /// Model yield anomalies instead of raw responses.
    #[arg(long, global = true, value_name = "BOOL")]
    pub anomalies: Option<bool>,
    /// Fitted model file.
    #[arg(long, global = true, value_name = "FILE")]
    pub model: Option<PathBuf>,
    /// Model variant: FNN, FNN_SVW, FNN_SRE or DSNET.
    #[arg(long, global = true)]
    pub variant: Option<String>,
    /// Number of Fourier weight functions M.
    #[arg(long, global = true)]
    pub m: Option<usize>,
    /// Number of spatial weight functions P.
    #[arg(long, global = true)]
    pub p: Option<usize>,
    /// Number of spatial random-effect functions H.
    #[arg(long, global = true)]
    pub h: Option<usize>,
    /// Hidden layers L.
    #[arg(long, global = true)]
    pub layers: Option<usize>,
    /// Units per hidden layer N.
    #[arg(long, global = true)]
    pub width: Option<usize>,
    /// Maximum training epochs.
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    /// Adam learning rate.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub learning_rate: Option<f64>,
    /// Mini-batch size.
    #[arg(long, global = true)]
    pub batch_size: Option<usize>,
    /// Registration basis size B.
    #[arg(long, global = true)]
    pub registration_size: Option<usize>,
    /// Cross-validation folds.
    #[arg(long, global = true)]
    pub folds: Option<usize>,
    /// Keep every year of a county in the same fold.
    #[arg(long, global = true)]
    pub county_blocked: bool,
    /// Simulation kind: scenario1 or midwest.
    #[arg(long, global = true, value_parser = parse_simulation)]
    pub simulation: Option<SimulationKind>,
    /// Scenario 1 link: linear, double_exponential, sine or piecewise_linear.
    #[arg(long, global = true)]
    pub link: Option<LinkKind>,
    /// basis-dump target: fourier, mrts or weights.
    #[arg(long, global = true, value_parser = parse_dump)]
    pub dump: Option<DumpKind>,
    /// basis-dump: number of basis functions.
    #[arg(long, global = true)]
    pub size: Option<usize>,
}

fn parse_simulation(s: &str) -> Result<SimulationKind, String> {
    match s {
        "scenario1" => Ok(SimulationKind::Scenario1),
        "midwest" => Ok(SimulationKind::Midwest),
        _ => Err(format!("unknown simulation '{s}' (expected scenario1 or midwest)")),
    }
}

fn parse_dump(s: &str) -> Result<DumpKind, String> {
    match s {
        "fourier" => Ok(DumpKind::Fourier),
        "mrts" => Ok(DumpKind::Mrts),
        "weights" => Ok(DumpKind::Weights),
        _ => Err(format!("unknown dump '{s}' (expected fourier, mrts or weights)")),
    }
}
