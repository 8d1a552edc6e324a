mod common;

use std::collections::BTreeSet;

use dsnet::evaluation::{
    grid_search, holdout_split, kfold_evaluate, mspe, sensitivity_sweep, weighted_mspe, CvOptions, FoldPlan,
    HyperGrid, SweepParameter,
};
use dsnet::model::{HyperParams, ModelVariant, PipelineSettings};
use dsnet::nn::TrainConfig;
use dsnet::simulation::{generate_scenario1, ScenarioConfig};
use proptest::prelude::*;
use rand::Rng;

fn cfg(seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: 60,
        batch_size: 32,
        learning_rate: 5e-3,
        seed,
        ..TrainConfig::default()
    }
}

fn hp(p: usize, h: usize) -> HyperParams {
    HyperParams {
        m: 3,
        p,
        h,
        layers: 1,
        width: 8,
    }
}

#[test]
fn metrics_match_brute_force_loops() {
    let mut r = common::rng(1);
    for n in [7, 50, 333] {
        let y: Vec<f64> = (0..n).map(|_| r.random::<f64>() * 200.0).collect();
        let p: Vec<f64> = (0..n).map(|_| r.random::<f64>() * 200.0).collect();
        let w: Vec<f64> = (0..n).map(|_| r.random::<f64>() * 1000.0).collect();
        let a = mspe(&y, &p).unwrap();
        let b = common::mspe_loop(&y, &p);
        assert!((a - b).abs() <= 1e-14 * b.max(1.0));
        let a = weighted_mspe(&y, &p, &w).unwrap();
        let b = common::weighted_loop(&y, &p, &w);
        assert!((a - b).abs() <= 1e-14 * b.max(1.0));
        let uniform = weighted_mspe(&y, &p, &vec![3.5; n]).unwrap();
        assert!((uniform - mspe(&y, &p).unwrap()).abs() <= 1e-14 * b.max(1.0));
    }
}

#[test]
fn fold_plans_partition_and_balance() {
    let idx: Vec<usize> = (0..103).map(|i| 2 * i + 1).collect();
    for c in [2, 5, 10] {
        let plan = FoldPlan::random(&idx, c, 42).unwrap();
        let mut union = BTreeSet::new();
        let mut sizes = Vec::new();
        for f in 0..c {
            let test = plan.test(f);
            let train = plan.train(f);
            assert_eq!(test.len() + train.len(), idx.len());
            assert!(test.iter().all(|i| !train.contains(i)));
            for i in &test {
                assert!(union.insert(*i), "index {i} tested twice");
            }
            sizes.push(test.len());
        }
        assert_eq!(union.into_iter().collect::<Vec<_>>(), idx);
        let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        assert!(hi - lo <= 1);
        assert_eq!(plan, FoldPlan::random(&idx, c, 42).unwrap());
    }
    assert!(FoldPlan::random(&idx, 1, 0).is_err());
}

#[test]
fn county_blocked_plans_keep_counties_together() {
    let ds = common::toy_dataset(20, 4, 30, 2);
    let plan = FoldPlan::for_dataset(&ds, 5, 3, true).unwrap();
    for f in 0..5 {
        let test: BTreeSet<&str> = plan.test(f).iter().map(|&i| ds.records()[i].county_id.as_str()).collect();
        let train: BTreeSet<&str> = plan.train(f).iter().map(|&i| ds.records()[i].county_id.as_str()).collect();
        assert!(test.is_disjoint(&train));
    }
}

#[test]
fn holdout_split_partitions() {
    let idx: Vec<usize> = (0..50).collect();
    let (train, test) = holdout_split(&idx, 0.2, 9);
    assert_eq!(test.len(), 10);
    let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
    all.sort_unstable();
    assert_eq!(all, idx);
}

#[test]
fn held_out_responses_do_not_leak_into_training() {
    let ds = common::toy_dataset(30, 4, 30, 3);
    let plan = FoldPlan::for_dataset(&ds, 3, 5, false).unwrap();
    let probed = ds.map_responses(&plan.test(0), |y| y + 1000.0);
    for demean in [false, true] {
        let options = CvOptions { demean_by_year: demean };
        let a = kfold_evaluate(ModelVariant::Dsnet, &ds, &hp(4, 3), &cfg(1), &PipelineSettings::default(), &plan, &options).unwrap();
        let b = kfold_evaluate(ModelVariant::Dsnet, &probed, &hp(4, 3), &cfg(1), &PipelineSettings::default(), &plan, &options).unwrap();
        let fold0 = |r: &dsnet::evaluation::CvResult| -> Vec<f64> {
            let n = r.folds[0].n_test;
            r.predictions[..n].iter().map(|p| p.predicted).collect()
        };
        assert_eq!(fold0(&a), fold0(&b), "demean={demean}");
        assert!(b.folds[0].mspe > a.folds[0].mspe + 1e5);
        assert_eq!(a.folds[0].best_epoch, b.folds[0].best_epoch);
    }
}

#[test]
fn richer_dsnet_cell_beats_the_fnn_cell_and_selection_is_self_consistent() {
    let ds = common::toy_dataset(40, 5, 30, 4);
    let plan = FoldPlan::for_dataset(&ds, 5, 0, false).unwrap();
    let grid = HyperGrid {
        m: vec![3],
        p: vec![1, 6],
        h: vec![0, 6],
        layers: vec![1],
        width: vec![16],
    };
    let train = TrainConfig {
        epochs: 200,
        ..cfg(7)
    };
    let result = grid_search(ModelVariant::Dsnet, &ds, &grid, &plan, &train, &PipelineSettings::default(), &CvOptions::default()).unwrap();
    let score = |p: usize, h: usize| {
        result
            .rows
            .iter()
            .find(|r| r.hyper.p == p && r.hyper.h == h)
            .and_then(|r| r.mean_mspe)
            .unwrap()
    };
    assert!(score(6, 6) < score(1, 0), "{} vs {}", score(6, 6), score(1, 0));

    // argmin of the persisted table
    let mut buf = Vec::new();
    result.write_csv(&mut buf).unwrap();
    let mut reader = csv::Reader::from_reader(buf.as_slice());
    let mut best: Option<(f64, usize, usize)> = None;
    for row in reader.records() {
        let row = row.unwrap();
        let s: f64 = row[6].parse().unwrap();
        if best.map_or(true, |(b, _, _)| s < b) {
            best = Some((s, row[1].parse().unwrap(), row[2].parse().unwrap()));
        }
    }
    let (s, p, h) = best.unwrap();
    assert_eq!(result.best_mspe, s);
    assert_eq!((result.best.p, result.best.h), (p, h));
}

#[test]
fn single_cell_grid_returns_that_cell() {
    let ds = common::toy_dataset(20, 4, 30, 5);
    let plan = FoldPlan::for_dataset(&ds, 2, 0, false).unwrap();
    let only = hp(3, 2);
    let r = grid_search(ModelVariant::Dsnet, &ds, &HyperGrid::single(only), &plan, &cfg(0), &PipelineSettings::default(), &CvOptions::default()).unwrap();
    assert_eq!(r.rows.len(), 1);
    assert_eq!(r.best, only);
}

#[test]
fn single_value_sweep_is_one_cross_validation() {
    let ds = common::toy_dataset(20, 4, 30, 6);
    let plan = FoldPlan::for_dataset(&ds, 3, 1, false).unwrap();
    let settings = PipelineSettings::default();
    let options = CvOptions::default();
    let points = sensitivity_sweep(SweepParameter::P, &[4], ModelVariant::Dsnet, &ds, &hp(1, 2), &cfg(3), &settings, &plan, &options).unwrap();
    let direct = kfold_evaluate(ModelVariant::Dsnet, &ds, &hp(4, 2), &cfg(3), &settings, &plan, &options).unwrap();
    assert_eq!(points.len(), 1);
    assert_eq!(points[0].value, 4);
    assert_eq!(points[0].cv_mspe, direct.mean_mspe);
    assert!(sensitivity_sweep(SweepParameter::B, &[], ModelVariant::Dsnet, &ds, &hp(4, 2), &cfg(3), &settings, &plan, &options).is_err());
}

#[test]
fn m_sweep_far_beyond_the_truth_does_not_bottom_out_at_the_largest_m() {
    // curves span four Fourier functions; M = 21 only adds noise directions
    let values = [3, 5, 9, 15, 21];
    let seeds = 5;
    let mut curve = [0.0; 5];
    for seed in 0..seeds {
        let sim = generate_scenario1(&ScenarioConfig { n_sites: 150, seed: 200 + seed, ..ScenarioConfig::default() }).unwrap();
        let plan = FoldPlan::for_dataset(&sim.dataset, 3, seed, false).unwrap();
        let train = TrainConfig { seed, ..TrainConfig::default() };
        let fixed = HyperParams { m: 5, p: 5, h: 10, layers: 2, width: 16 };
        let points = sensitivity_sweep(
            SweepParameter::M,
            &values,
            ModelVariant::Dsnet,
            &sim.dataset,
            &fixed,
            &train,
            &PipelineSettings::default(),
            &plan,
            &CvOptions::default(),
        )
        .unwrap();
        for (c, p) in curve.iter_mut().zip(&points) {
            *c += p.cv_mspe / seeds as f64;
        }
    }
    let argmin = (0..values.len()).min_by(|&a, &b| curve[a].total_cmp(&curve[b])).unwrap();
    assert_ne!(argmin, values.len() - 1, "{curve:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weighted_mspe_is_scale_invariant_in_weights(seed in 0u64..10_000, c in 0.01f64..100.0) {
        let mut r = common::rng(seed);
        let y: Vec<f64> = (0..20).map(|_| r.random::<f64>()).collect();
        let p: Vec<f64> = (0..20).map(|_| r.random::<f64>()).collect();
        let w: Vec<f64> = (0..20).map(|_| r.random::<f64>() + 0.1).collect();
        let scaled: Vec<f64> = w.iter().map(|v| v * c).collect();
        let a = weighted_mspe(&y, &p, &w).unwrap();
        let b = weighted_mspe(&y, &p, &scaled).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300));
    }

    #[test]
    fn every_index_is_tested_exactly_once(n in 10usize..200, c in 2usize..10, seed in 0u64..1000) {
        let idx: Vec<usize> = (0..n).collect();
        let plan = FoldPlan::random(&idx, c, seed).unwrap();
        let mut counts = vec![0; n];
        for f in 0..c {
            for i in plan.test(f) {
                counts[i] += 1;
            }
        }
        prop_assert!(counts.iter().all(|&k| k == 1));
    }
}
