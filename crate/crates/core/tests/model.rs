mod common;

use std::f64::consts::{PI, SQRT_2};

use dsnet::data_io::{load_model, model_from_json, model_to_json, save_model, DataError};
use dsnet::model::{fit, HyperParams, ModelError, ModelVariant, PipelineSettings};
use dsnet::nn::TrainConfig;
use dsnet::Point;
use rand::Rng;

fn quick_cfg(seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: 40,
        batch_size: 32,
        learning_rate: 5e-3,
        seed,
        ..TrainConfig::default()
    }
}

fn hp(m: usize, p: usize, h: usize) -> HyperParams {
    HyperParams {
        m,
        p,
        h,
        layers: 2,
        width: 8,
    }
}

#[test]
fn dsnet_restricted_to_one_constant_psi_is_fnn() {
    let ds = common::toy_dataset(40, 5, 50, 1);
    let settings = PipelineSettings::default();
    let cfg = quick_cfg(9);
    let fnn = fit(ModelVariant::Fnn, &ds, &hp(5, 1, 0), &cfg, &settings).unwrap();
    let dsnet = fit(ModelVariant::Dsnet, &ds, &hp(5, 1, 0), &cfg, &settings).unwrap();
    let held_out = common::toy_dataset(10, 2, 50, 2);
    let a = fnn.model.predict_dataset(&held_out).unwrap();
    let b = dsnet.model.predict_dataset(&held_out).unwrap();
    assert_eq!(a.len(), 20);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.to_bits(), y.to_bits());
    }
    assert_eq!(fnn.model.params, dsnet.model.params);
}

#[test]
fn predictions_are_pure_and_persist_bit_identically() {
    let ds = common::toy_dataset(30, 4, 40, 3);
    let out = fit(ModelVariant::Dsnet, &ds, &hp(4, 5, 6), &quick_cfg(1), &PipelineSettings::default()).unwrap();
    let inputs = common::toy_dataset(25, 4, 40, 4);
    assert_eq!(inputs.len(), 100);
    let first = out.model.predict_dataset(&inputs).unwrap();
    let second = out.model.predict_dataset(&inputs).unwrap();
    assert_eq!(first, second);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    save_model(&out.model, &path).unwrap();
    let loaded = load_model(&path).unwrap();
    let third = loaded.predict_dataset(&inputs).unwrap();
    let max_diff = first.iter().zip(&third).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert_eq!(max_diff, 0.0);
    assert_eq!(loaded, out.model);
}

#[test]
fn corrupted_and_unversioned_files_are_rejected() {
    let ds = common::toy_dataset(20, 3, 30, 5);
    let out = fit(ModelVariant::Fnn, &ds, &hp(3, 1, 0), &quick_cfg(0), &PipelineSettings::default()).unwrap();
    let text = model_to_json(&out.model).unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();

    let mut tampered = doc.clone();
    tampered["model"]["seed"] = serde_json::json!(12345);
    assert!(matches!(model_from_json(&tampered.to_string()), Err(DataError::Checksum)));

    let mut bad_sum = doc.clone();
    bad_sum["checksum"] = serde_json::json!("00");
    assert!(matches!(model_from_json(&bad_sum.to_string()), Err(DataError::Checksum)));

    doc.as_object_mut().unwrap().remove("version");
    assert!(matches!(model_from_json(&doc.to_string()), Err(DataError::VersionMissing)));
}

fn fourier_closed_form(m: usize, t: f64) -> f64 {
    if m == 0 {
        return 1.0;
    }
    let freq = ((m + 1) / 2) as f64;
    if m % 2 == 1 {
        SQRT_2 * (2.0 * PI * freq * t).sin()
    } else {
        SQRT_2 * (2.0 * PI * freq * t).cos()
    }
}

#[test]
fn weight_surfaces_match_brute_force() {
    let ds = common::toy_dataset(30, 4, 40, 6);
    let mut out = fit(ModelVariant::Dsnet, &ds, &hp(4, 5, 3), &quick_cfg(2), &PipelineSettings::default()).unwrap();
    // replace trained weights with arbitrary ones
    let mut r = common::rng(10);
    for w in out.model.params.as_mut_slice() {
        *w = r.random::<f64>() * 2.0 - 1.0;
    }
    let model = &out.model;
    let sites: Vec<Point> = (0..5).map(|i| Point::new(50.0 + 100.0 * i as f64, 30.0 + 60.0 * i as f64)).collect();
    let times: Vec<f64> = (0..10).map(|i| (i as f64 + 0.5) / 10.0).collect();
    let surfaces = model.export_weight_surfaces(&sites, &times).unwrap();
    let (k_n, m_n, j_n, p_n) = (1, 4, 2, 5);
    let d = model.standardizer.dimension();
    for neuron in 0..8 {
        let row = model.params.first_layer_row(neuron);
        let raw: Vec<f64> = (0..d)
            .map(|i| if model.standardizer.is_constant(i) { 0.0 } else { row[i] / model.standardizer.sd()[i] })
            .collect();
        for (si, s) in sites.iter().enumerate() {
            let psi = model.spec.psi_basis().eval_prefix(s, p_n);
            for (ti, t) in times.iter().enumerate() {
                for k in 0..k_n {
                    let mut brute = 0.0;
                    for m in 0..m_n {
                        for p in 0..p_n {
                            brute += raw[k * m_n * p_n + m * p_n + p] * psi[p] * fourier_closed_form(m, *t);
                        }
                    }
                    let got = surfaces.functional[neuron][k][si][ti];
                    assert!((got - brute).abs() < 1e-10, "{got} vs {brute}");
                }
            }
            for j in 0..j_n {
                let brute: f64 = (0..p_n).map(|p| raw[k_n * m_n * p_n + j * p_n + p] * psi[p]).sum();
                assert!((surfaces.scalar[neuron][j][si] - brute).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn surfaces_need_spatial_weights() {
    let ds = common::toy_dataset(20, 3, 30, 7);
    let out = fit(ModelVariant::FnnSre, &ds, &hp(3, 1, 4), &quick_cfg(0), &PipelineSettings::default()).unwrap();
    let err = out.model.export_weight_surfaces(&[Point::new(0.0, 0.0)], &[0.5]).unwrap_err();
    assert!(matches!(err, ModelError::UnsupportedVariant { .. }));
}

#[test]
fn logged_training_loss_is_in_response_units() {
    let ds = common::toy_dataset(30, 4, 40, 8);
    let out = fit(ModelVariant::FnnSvw, &ds, &hp(3, 4, 0), &quick_cfg(3), &PipelineSettings::default()).unwrap();
    let records: Vec<_> = out.train_indices.iter().map(|&i| ds.records()[i].clone()).collect();
    let pred = out.model.predict(&records).unwrap();
    let mse = records
        .iter()
        .zip(&pred)
        .map(|(r, p)| (r.response.unwrap() - p).powi(2))
        .sum::<f64>()
        / records.len() as f64;
    let logged = out.log.best().unwrap().train_mse;
    assert!((mse - logged).abs() <= 1e-9 * logged, "{mse} vs {logged}");
    assert_eq!(out.train_indices.len() + out.validation_indices.len(), ds.len());
}

#[test]
fn variant_restrictions_are_enforced() {
    let ds = common::toy_dataset(20, 3, 30, 9);
    let s = PipelineSettings::default();
    assert!(matches!(
        fit(ModelVariant::Fnn, &ds, &hp(3, 5, 0), &quick_cfg(0), &s),
        Err(ModelError::Restriction { .. })
    ));
    assert!(matches!(
        fit(ModelVariant::FnnSvw, &ds, &hp(3, 5, 2), &quick_cfg(0), &s),
        Err(ModelError::Restriction { .. })
    ));
}
