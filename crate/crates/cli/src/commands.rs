use std::collections::BTreeMap;

use dsnet::basis::{dump_fourier, dump_mrts, inner_grid, uniform_grid, FourierBasis, MrtsBasis};
use dsnet::data_io::{load_dataset, load_model, save_model, write_predictions, DatasetPaths, Metrics, PredictionRow, SpatialDataset};
use dsnet::evaluation::{cell_seed, grid_search, kfold_evaluate, CvOptions, FoldPlan};
use dsnet::geometry::BoundingBox;
use dsnet::model::fit;
use dsnet::seed::{derive, Stream};
use dsnet::simulation::{generate_midwest_like, generate_scenario1, MidwestConfig, ScenarioConfig};
use serde::Serialize;
use serde_json::json;

use crate::cli::{Cli, Command};
use crate::config::{DumpKind, RunConfig, SimulationKind};
use crate::error::{CliError, Result};
use crate::manifest::RunRecord;

pub fn run(cli: &Cli) -> Result<()> {
    let mut cfg = match &cli.overrides.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    cfg.apply(&cli.overrides)?;
    cfg.validate(&cli.command)?;

    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| CliError::io(&cfg.output_dir, e))?;
    let mut rec = RunRecord::new(cfg.output_dir.clone());
    match cli.command {
        Command::Simulate => simulate(&cfg, &mut rec)?,
        Command::Fit => fit_command(&cfg, &mut rec)?,
        Command::Predict => predict(&cfg, &mut rec)?,
        Command::Cv => cv(&cfg, &mut rec)?,
        Command::Tune => tune(&cfg, &mut rec)?,
        Command::BasisDump => basis_dump(&cfg, &mut rec)?,
    }
    rec.finish(cli.command.name(), &cfg)
}

fn csv_bytes(write: impl FnOnce(&mut Vec<u8>) -> csv::Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write(&mut buf).map_err(|e| CliError::data(e.to_string()))?;
    Ok(buf)
}

fn simulate(cfg: &RunConfig, rec: &mut RunRecord) -> Result<()> {
    rec.seed("simulation", cfg.seed);
    match cfg.simulation.kind {
        SimulationKind::Scenario1 => {
            let sim = generate_scenario1(&ScenarioConfig {
                seed: cfg.seed,
                ..cfg.simulation.scenario1.clone()
            })?;
            log::info!("scenario 1: {} records", sim.dataset.len());
            rec.write_json("dataset.json", &sim.dataset)?;
            rec.write_json("truth.json", &sim.truth)?;
        }
        SimulationKind::Midwest => {
            let sim = generate_midwest_like(&MidwestConfig {
                seed: cfg.seed,
                ..cfg.simulation.midwest.clone()
            })?;
            log::info!("midwest-like: {} records", sim.dataset.len());
            let paths = sim.write_csv(&rec.out_dir)?;
            for p in [&paths.locations, &paths.yields, &paths.temperature, &paths.precipitation] {
                rec.written(&p.file_name().expect("file path").to_string_lossy());
            }
            rec.write_json("truth.json", &sim.truth)?;
        }
    }
    Ok(())
}

fn load_data(cfg: &RunConfig, rec: &mut RunRecord) -> Result<SpatialDataset> {
    if let Some(dir) = &cfg.data.dir {
        let paths = DatasetPaths::in_dir(dir);
        rec.inputs.extend([
            paths.locations.clone(),
            paths.yields.clone(),
            paths.temperature.clone(),
            paths.precipitation.clone(),
        ]);
        return Ok(load_dataset(&paths)?);
    }
    let path = cfg.data.dataset.as_ref().expect("validated data source");
    rec.inputs.push(path.clone());
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let raw: SpatialDataset =
        serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    // re-check the dataset invariants that deserialization bypasses
    Ok(SpatialDataset::new(raw.records().to_vec(), raw.meta().clone())?)
}

/// Trainable records of counties with enough years.
fn eligible(cfg: &RunConfig, ds: &SpatialDataset) -> Result<SpatialDataset> {
    let out = ds.with_min_years(cfg.data.min_years);
    if out.is_empty() {
        return Err(CliError::data(format!(
            "no county has at least {} observed years (data.min_years)",
            cfg.data.min_years
        )));
    }
    log::info!("{} of {} records eligible for training", out.len(), ds.len());
    Ok(out)
}

#[derive(Serialize)]
struct FitSummary {
    variant: String,
    hyper: dsnet::model::HyperParams,
    n_train: usize,
    n_validation: usize,
    best_epoch: usize,
    best_train_mse: f64,
    best_validation_mse: f64,
    config_hash: String,
}

fn fit_command(cfg: &RunConfig, rec: &mut RunRecord) -> Result<()> {
    let ds = load_data(cfg, rec)?;
    let mut train_ds = eligible(cfg, &ds)?;
    if cfg.data.anomalies() {
        train_ds = train_ds.demean_by_year()?;
    }
    let train_cfg = cfg.train_config();
    rec.seed("initialization", derive(cfg.seed, Stream::Fit, 0));
    rec.seed("validation_split", train_cfg.seed);
    let out = fit(cfg.variant, &train_ds, &cfg.hyper, &train_cfg, &cfg.pipeline)?;
    let best = *out.log.best().expect("log has epoch 0");
    log::info!(
        "{}: best epoch {} (train {:.4}, validation {:.4})",
        cfg.variant,
        best.epoch,
        best.train_mse,
        best.val_mse
    );
    let model_path = rec.path("model.json");
    save_model(&out.model, &model_path)?;
    rec.written("model.json");
    let log_csv = csv_bytes(|b| out.log.write_csv(b))?;
    rec.write("training_log.csv", &log_csv)?;
    rec.write_json(
        "fit_summary.json",
        &FitSummary {
            variant: cfg.variant.to_string(),
            hyper: out.model.hyper,
            n_train: out.train_indices.len(),
            n_validation: out.validation_indices.len(),
            best_epoch: best.epoch,
            best_train_mse: best.train_mse,
            best_validation_mse: best.val_mse,
            config_hash: out.model.config_hash.clone(),
        },
    )
}

fn predict(cfg: &RunConfig, rec: &mut RunRecord) -> Result<()> {
    let model_path = cfg.model.as_ref().expect("validated model path");
    rec.inputs.push(model_path.clone());
    let model = load_model(model_path)?;
    let ds = load_data(cfg, rec)?;
    let raw = model.predict_dataset(&ds)?;

    // Years unseen in training fall back to the observed mean of the input.
    let mut sums: BTreeMap<i32, (f64, usize)> = BTreeMap::new();
    for r in ds.records() {
        if let Some(y) = r.response {
            let e = sums.entry(r.year).or_default();
            e.0 += y;
            e.1 += 1;
        }
    }
    let mut rows = Vec::with_capacity(raw.len());
    for (r, p) in ds.records().iter().zip(raw) {
        let predicted = match model.reinflate(r.year, p) {
            Some(v) => v,
            None => match sums.get(&r.year) {
                Some((s, n)) => p + s / *n as f64,
                None => {
                    return Err(CliError::data(format!(
                        "record ({}, {}): the model predicts anomalies but year {} has no training mean and no observed yields",
                        r.county_id, r.year, r.year
                    )))
                }
            },
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
    let mut buf = Vec::new();
    write_predictions(&rows, &mut buf)?;
    rec.write("predictions.csv", &buf)?;
    if let Some(metrics) = Metrics::from_rows(&rows) {
        log::info!("MSPE {:.4} on {} records", metrics.mspe, metrics.n_test);
        rec.write_json("metrics.json", &metrics)?;
    }
    Ok(())
}

fn fold_plan(cfg: &RunConfig, ds: &SpatialDataset, rec: &mut RunRecord) -> Result<FoldPlan> {
    rec.seed("folds", cfg.seed);
    Ok(FoldPlan::for_dataset(ds, cfg.cv.folds, cfg.seed, cfg.cv.county_blocked)?)
}

fn cv(cfg: &RunConfig, rec: &mut RunRecord) -> Result<()> {
    let ds = eligible(cfg, &load_data(cfg, rec)?)?;
    let plan = fold_plan(cfg, &ds, rec)?;
    let options = CvOptions {
        demean_by_year: cfg.data.anomalies(),
    };
    let result = kfold_evaluate(cfg.variant, &ds, &cfg.hyper, &cfg.train_config(), &cfg.pipeline, &plan, &options)?;
    log::info!("{}: mean CV MSPE {:.4}", cfg.variant, result.mean_mspe);

    let folds_csv = csv_bytes(|b| {
        let mut w = csv::Writer::from_writer(b);
        w.write_record(["fold", "n_train", "n_test", "mspe", "weighted_mspe", "best_epoch", "seed"])?;
        for f in &result.folds {
            w.write_record([
                f.fold.to_string(),
                f.n_train.to_string(),
                f.n_test.to_string(),
                f.mspe.to_string(),
                f.weighted_mspe.map_or(String::new(), |v| v.to_string()),
                f.best_epoch.to_string(),
                f.seed.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    })?;
    rec.write("cv_folds.csv", &folds_csv)?;
    for f in &result.folds {
        rec.seed(&format!("fold_{}", f.fold), f.seed);
    }
    let mut buf = Vec::new();
    write_predictions(&result.predictions, &mut buf)?;
    rec.write("cv_predictions.csv", &buf)?;
    rec.write_json(
        "metrics.json",
        &json!({
            "variant": cfg.variant,
            "folds": cfg.cv.folds,
            "mean_mspe": result.mean_mspe,
            "mean_weighted_mspe": result.mean_weighted_mspe,
            "pooled": Metrics::from_rows(&result.predictions),
        }),
    )
}

fn tune(cfg: &RunConfig, rec: &mut RunRecord) -> Result<()> {
    let ds = eligible(cfg, &load_data(cfg, rec)?)?;
    let plan = fold_plan(cfg, &ds, rec)?;
    let options = CvOptions {
        demean_by_year: cfg.data.anomalies(),
    };
    let cells = cfg.grid.cells(cfg.variant).len();
    log::info!("{}: {} grid cells, {} folds each", cfg.variant, cells, cfg.cv.folds);
    let result = grid_search(cfg.variant, &ds, &cfg.grid, &plan, &cfg.train_config(), &cfg.pipeline, &options)?;
    log::info!("best {:?} with CV MSPE {:.4}", result.best, result.best_mspe);
    let grid_csv = csv_bytes(|b| result.write_csv(b))?;
    rec.write("grid.csv", &grid_csv)?;
    let failed = result.rows.iter().filter(|r| r.error.is_some()).count();
    rec.seed("best_cell", cell_seed(cfg.seed, &result.best));
    rec.write_json(
        "tune.json",
        &json!({
            "variant": cfg.variant,
            "best": result.best,
            "best_mspe": result.best_mspe,
            "cells": result.rows.len(),
            "failed_cells": failed,
            "folds": cfg.cv.folds,
            "fold_seed": cfg.seed,
        }),
    )
}

fn basis_dump(cfg: &RunConfig, rec: &mut RunRecord) -> Result<()> {
    let d = &cfg.basis_dump;
    let times = uniform_grid(d.time_points);
    match d.kind {
        DumpKind::Fourier => {
            let basis = FourierBasis::new(d.size, d.constant).map_err(|e| CliError::config(format!("basis_dump: {e}")))?;
            let bytes = csv_bytes(|b| dump_fourier(&basis, &times, b))?;
            rec.write("fourier_basis.csv", &bytes)?;
        }
        DumpKind::Mrts => {
            let sites = load_data(cfg, rec)?.sites();
            let basis = MrtsBasis::fit_layout(&sites, d.size, cfg.pipeline.knot_layout)
                .map_err(|e| CliError::config(format!("basis_dump.size: {e}")))?;
            let bytes = csv_bytes(|b| dump_mrts(&basis, &sites, d.size, b))?;
            rec.write("mrts_basis.csv", &bytes)?;
        }
        DumpKind::Weights => {
            let model_path = cfg.model.as_ref().expect("validated model path");
            rec.inputs.push(model_path.clone());
            let model = load_model(model_path)?;
            let extent = if cfg.data.dir.is_some() || cfg.data.dataset.is_some() {
                load_data(cfg, rec)?.sites()
            } else {
                model.spec.psi_basis().knots().to_vec()
            };
            let bb = BoundingBox::of(&extent).ok_or_else(|| CliError::data("no sites to lay the grid over"))?;
            let sites = inner_grid(&bb, d.site_grid, d.site_grid);
            let surfaces = model.export_weight_surfaces(&sites, &times)?;
            let functional = csv_bytes(|b| surfaces.write_functional_csv(b))?;
            rec.write("weight_functional.csv", &functional)?;
            let scalar = csv_bytes(|b| surfaces.write_scalar_csv(b))?;
            rec.write("weight_scalar.csv", &scalar)?;
        }
    }
    Ok(())
}
