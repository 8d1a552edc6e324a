use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dsnet::data_io::load_model;
use dsnet::model::ModelVariant;

fn dsnet(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dsnet"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], cwd: &Path) {
    let out = dsnet(args, cwd);
    assert!(
        out.status.success(),
        "dsnet {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

const SMALL_SCENARIO: &str = r#"{
  "schema_version": 1,
  "seed": 11,
  "output_dir": "sim",
  "simulation": { "kind": "scenario1", "scenario1": { "n_sites": 60, "replicates": 5 } },
  "hyper": { "m": 3, "p": 4, "h": 6, "layers": 1, "width": 8 },
  "train": { "epochs": 20 }
}"#;

#[test]
fn simulate_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.json"), SMALL_SCENARIO).unwrap();
    ok(&["simulate", "-c", "run.json", "--out", "a"], dir.path());
    ok(&["simulate", "-c", "run.json", "--out", "b"], dir.path());
    for kind in [&["--simulation", "scenario1"][..], &["--simulation", "midwest"][..]] {
        let mut a = vec!["simulate", "-c", "run.json", "--out", "c"];
        a.extend_from_slice(kind);
        ok(&a, dir.path());
        let mut b = vec!["simulate", "-c", "run.json", "--out", "d"];
        b.extend_from_slice(kind);
        ok(&b, dir.path());
        for (x, y) in files(&dir.path().join("c")).iter().zip(files(&dir.path().join("d"))) {
            if x.file_name().unwrap() == "manifest.json" {
                continue;
            }
            assert_eq!(fs::read(x).unwrap(), fs::read(&y).unwrap(), "{}", x.display());
        }
        fs::remove_dir_all(dir.path().join("c")).unwrap();
        fs::remove_dir_all(dir.path().join("d")).unwrap();
    }
    assert_eq!(
        fs::read(dir.path().join("a/dataset.json")).unwrap(),
        fs::read(dir.path().join("b/dataset.json")).unwrap()
    );
}

#[test]
fn cli_predictions_match_in_process_predictions() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.json"), SMALL_SCENARIO).unwrap();
    ok(&["simulate", "-c", "run.json"], dir.path());
    ok(&["fit", "-c", "run.json", "--dataset", "sim/dataset.json", "--out", "fit"], dir.path());
    ok(
        &["predict", "-c", "run.json", "--dataset", "sim/dataset.json", "--model", "fit/model.json", "--out", "pred"],
        dir.path(),
    );

    let model = load_model(dir.path().join("fit/model.json")).unwrap();
    assert_eq!(model.variant, ModelVariant::Dsnet);
    assert_eq!(model.hyper.p, 4);
    let text = fs::read_to_string(dir.path().join("sim/dataset.json")).unwrap();
    let ds: dsnet::data_io::SpatialDataset = serde_json::from_str(&text).unwrap();
    let expected = model.predict_dataset(&ds).unwrap();

    let mut reader = csv::Reader::from_path(dir.path().join("pred/predictions.csv")).unwrap();
    let got: Vec<f64> = reader.records().map(|r| r.unwrap()[3].parse().unwrap()).collect();
    assert_eq!(got.len(), expected.len());
    for (a, b) in got.iter().zip(&expected) {
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
    }
    assert!(dir.path().join("pred/metrics.json").exists());
}

#[test]
fn anomaly_models_reinflate_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{
      "seed": 2,
      "simulation": { "kind": "midwest", "midwest": { "n_counties": 30, "n_years": 5 } },
      "hyper": { "m": 3, "p": 3, "h": 5, "layers": 1, "width": 8 },
      "train": { "epochs": 30 }
    }"#;
    fs::write(dir.path().join("run.json"), cfg).unwrap();
    ok(&["simulate", "-c", "run.json", "--out", "mw"], dir.path());
    ok(&["fit", "-c", "run.json", "--data-dir", "mw", "--out", "fit"], dir.path());
    ok(&["predict", "-c", "run.json", "--data-dir", "mw", "--model", "fit/model.json", "--out", "pred"], dir.path());
    let model = load_model(dir.path().join("fit/model.json")).unwrap();
    assert!(model.anomaly_means.is_some());
    let mut reader = csv::Reader::from_path(dir.path().join("pred/predictions.csv")).unwrap();
    let mut sq = 0.0;
    let mut n = 0.0;
    for r in reader.records() {
        let r = r.unwrap();
        if let Ok(obs) = r[2].parse::<f64>() {
            let pred: f64 = r[3].parse().unwrap();
            sq += (obs - pred).powi(2);
            n += 1.0;
        }
    }
    // yields are ~150 bu/ac; un-inflated anomalies would miss by that much
    assert!(sq / n < 1000.0, "MSPE {}", sq / n);
}

#[test]
fn invalid_config_exits_with_config_code_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.json"), r#"{ "output_dir": "out", "train": { "learning_rate": -0.1 } }"#).unwrap();
    fs::write(dir.path().join("data.json"), "{}").unwrap();
    let out = dsnet(&["fit", "-c", "bad.json", "--dataset", "data.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("learning_rate"));
    assert!(!dir.path().join("out").exists());

    fs::write(dir.path().join("typo.json"), r#"{ "trian": {} }"#).unwrap();
    let out = dsnet(&["simulate", "-c", "typo.json", "--out", "x"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("trian"));
    assert!(!dir.path().join("x").exists());

    let out = dsnet(&["fit", "--out", "y"], dir.path());
    assert_eq!(out.status.code(), Some(2), "missing data source");
    let out = dsnet(&["cv", "--dataset", "data.json", "--folds", "1", "--out", "z"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = dsnet(&["fit", "--dataset", "data.json", "--variant", "FNN", "--p", "4", "--out", "w"], dir.path());
    assert_eq!(out.status.code(), Some(2), "FNN restriction");
}

#[test]
fn data_and_io_failures_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dsnet(&["fit", "--data-dir", "missing", "--out", "o1"], dir.path());
    assert_eq!(out.status.code(), Some(5));

    ok(&["simulate", "--simulation", "midwest", "--out", "mw"], dir.path());
    let temp = dir.path().join("mw/temperature.csv");
    let text = fs::read_to_string(&temp).unwrap();
    let broken = text.replacen(",1,", ",366,", 1);
    fs::write(&temp, broken).unwrap();
    let out = dsnet(&["fit", "--data-dir", "mw", "--out", "o2"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("temperature.csv:2"));
}

#[test]
fn manifest_records_config_seeds_and_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.json"), SMALL_SCENARIO).unwrap();
    ok(&["simulate", "-c", "run.json", "--seed", "5"], dir.path());
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("sim/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["command"], "simulate");
    assert_eq!(m["seed"], 5, "flag overrides config");
    assert_eq!(m["config"]["simulation"]["scenario1"]["n_sites"], 60);
    let names: Vec<&str> = m["artifacts"].as_array().unwrap().iter().map(|a| a["path"].as_str().unwrap()).collect();
    assert_eq!(names, ["dataset.json", "truth.json"]);
    assert_eq!(m["artifacts"][0]["sha256"].as_str().unwrap().len(), 64);
    assert!(m["finished_unix"].as_f64().unwrap() >= m["started_unix"].as_f64().unwrap());
}

#[test]
fn tune_and_basis_dump_write_their_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{
      "seed": 1,
      "simulation": { "scenario1": { "n_sites": 40 } },
      "grid": { "m": [3], "p": [1, 4], "h": [0, 4], "layers": [1], "width": [8] },
      "train": { "epochs": 15 },
      "cv": { "folds": 2 }
    }"#;
    fs::write(dir.path().join("run.json"), cfg).unwrap();
    ok(&["simulate", "-c", "run.json", "--out", "sim"], dir.path());
    ok(&["tune", "-c", "run.json", "--dataset", "sim/dataset.json", "--out", "tune"], dir.path());
    let grid = fs::read_to_string(dir.path().join("tune/grid.csv")).unwrap();
    assert_eq!(grid.lines().count(), 1 + 4);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("tune/tune.json")).unwrap()).unwrap();
    assert_eq!(summary["cells"], 4);

    ok(&["basis-dump", "--dump", "fourier", "--size", "5", "--out", "f"], dir.path());
    let fourier = fs::read_to_string(dir.path().join("f/fourier_basis.csv")).unwrap();
    assert_eq!(fourier.lines().next().unwrap(), "t,f1,f2,f3,f4,f5");
    assert_eq!(fourier.lines().count(), 101);
}

#[test]
fn help_lists_every_flag() {
    let dir = tempfile::tempdir().unwrap();
    let out = dsnet(&["--help"], dir.path());
    let help = String::from_utf8_lossy(&out.stdout);
    for flag in [
        "--config", "--seed", "--out", "--data-dir", "--dataset", "--min-years", "--anomalies", "--model",
        "--variant", "--m", "--p", "--h", "--layers", "--width", "--epochs", "--learning-rate", "--batch-size",
        "--registration-size", "--folds", "--county-blocked", "--simulation", "--link", "--dump", "--size",
    ] {
        assert!(help.contains(flag), "{flag} missing from --help");
    }
    for cmd in ["simulate", "fit", "predict", "cv", "tune", "basis-dump"] {
        assert!(help.contains(cmd));
    }
}
