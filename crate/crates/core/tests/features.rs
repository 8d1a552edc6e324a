mod common;

use dsnet::basis::{FourierBasis, KnotLayout, MrtsBasis};
use dsnet::features::{FeatureDims, FeatureSpec, FeatureStandardizer};
use dsnet::functional::{register, FunctionalSample, RegisteredFunction};
use dsnet::Point;
use proptest::prelude::*;
use rand::Rng;

struct Fixture {
    spec: FeatureSpec,
    mrts: MrtsBasis,
    fourier: FourierBasis,
    dims: FeatureDims,
}

fn fixture(k: usize, m: usize, j: usize, p: usize, h: usize) -> Fixture {
    let mut r = common::rng(1);
    let sites: Vec<Point> = (0..80)
        .map(|_| Point::new(r.random::<f64>() * 900.0, r.random::<f64>() * 600.0))
        .collect();
    let mrts = MrtsBasis::fit_layout(&sites, p.max(h).max(3), KnotLayout::Auto).unwrap();
    let fourier = FourierBasis::with_constant(m).unwrap();
    let dims = FeatureDims { k, m, j, p, h };
    let spec = FeatureSpec::new(dims, fourier, mrts.clone(), None).unwrap();
    Fixture { spec, mrts, fourier, dims }
}

fn curves(k: usize, seed: u64) -> Vec<RegisteredFunction> {
    let basis = FourierBasis::with_constant(21).unwrap();
    let grid: Vec<f64> = (0..365).map(|i| (i as f64 + 0.5) / 365.0).collect();
    let mut r = common::rng(seed);
    (0..k)
        .map(|_| {
            let v: Vec<f64> = grid.iter().map(|_| r.random::<f64>() * 30.0).collect();
            register(&FunctionalSample::new(grid.clone(), v).unwrap(), &basis).unwrap()
        })
        .collect()
}

#[test]
fn paper_dimension() {
    let f = fixture(2, 5, 12, 5, 100);
    assert_eq!(f.spec.dimension(), 2 * 5 * 5 + 12 * 5 + 100);
}

#[test]
fn feature_vector_matches_block_layout() {
    let f = fixture(2, 4, 3, 5, 7);
    let s = Point::new(410.0, 250.0);
    let x = curves(2, 9);
    let z = [0.3, -1.2, 4.0];
    let v = f.spec.build(&s, &x, &z).unwrap();
    let psi = f.mrts.eval_prefix(&s, 5);
    let FeatureDims { k, m, j, p, h } = f.dims;
    for kk in 0..k {
        for mm in 0..m {
            for pp in 0..p {
                let expected = psi[pp] * x[kk].coeffs()[mm];
                assert!((v[kk * m * p + mm * p + pp] - expected).abs() < 1e-12);
            }
        }
    }
    for jj in 0..j {
        for pp in 0..p {
            assert!((v[k * m * p + jj * p + pp] - psi[pp] * z[jj]).abs() < 1e-12);
        }
    }
    let phi = f.mrts.eval_prefix(&s, h);
    for hh in 0..h {
        assert_eq!(v[k * m * p + j * p + hh], phi[hh]);
    }
}

#[test]
fn weight_surfaces_match_brute_force_double_sum() {
    let f = fixture(2, 5, 3, 6, 4);
    let mut r = common::rng(77);
    let w: Vec<f64> = (0..f.spec.dimension()).map(|_| r.random::<f64>() * 2.0 - 1.0).collect();
    let FeatureDims { m, p, .. } = f.dims;
    for si in 0..5 {
        let s = Point::new(100.0 + 150.0 * si as f64, 80.0 + 100.0 * si as f64);
        let psi = f.mrts.eval_prefix(&s, p);
        for ti in 0..10 {
            let t = ti as f64 / 9.0;
            for k in 0..2 {
                let mut brute = 0.0;
                for mm in 0..m {
                    for pp in 0..p {
                        brute += w[k * m * p + mm * p + pp] * psi[pp] * f.fourier.eval(mm + 1, t).unwrap();
                    }
                }
                assert!((f.spec.functional_weight(&w, k, &s, t) - brute).abs() < 1e-10);
            }
        }
        for jj in 0..3 {
            let brute: f64 = (0..p).map(|pp| w[2 * m * p + jj * p + pp] * psi[pp]).sum();
            assert!((f.spec.scalar_weight(&w, jj, &s) - brute).abs() < 1e-10);
        }
    }
}

#[test]
fn first_layer_dot_is_the_functional_linear_index() {
    // w·x = Σ_k ∫ β_k(s;t) X_k(t) dt + Σ_j ω_j(s) z_j + Σ_h w_h φ_h(s)
    let f = fixture(2, 5, 2, 4, 3);
    let mut r = common::rng(5);
    let w: Vec<f64> = (0..f.spec.dimension()).map(|_| r.random::<f64>() - 0.5).collect();
    let s = Point::new(300.0, 300.0);
    let x = curves(2, 11);
    let z = [1.5, -0.5];
    let feat = f.spec.build(&s, &x, &z).unwrap();
    let dot: f64 = w.iter().zip(&feat).map(|(a, b)| a * b).sum();

    let n = 20_001;
    let mut integral = 0.0;
    for k in 0..2 {
        let vals: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                f.spec.functional_weight(&w, k, &s, t) * x[k].eval(t)
            })
            .collect();
        let grid: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        integral += dsnet::functional::trapezoid(&grid, &vals).unwrap();
    }
    let scalar: f64 = (0..2).map(|j| f.spec.scalar_weight(&w, j, &s) * z[j]).sum();
    let phi = f.mrts.eval_prefix(&s, 3);
    let offset = f.spec.dimension() - 3;
    let random: f64 = (0..3).map(|h| w[offset + h] * phi[h]).sum();
    assert!((dot - (integral + scalar + random)).abs() < 1e-4 * dot.abs().max(1.0));
}

#[test]
fn single_constant_psi_collapses_to_inner_products() {
    let f = fixture(2, 5, 3, 1, 0);
    let x = curves(2, 3);
    let z = [1.0, 2.0, 3.0];
    let c = f.mrts.constant_value();
    let a = f.spec.build(&Point::new(0.0, 0.0), &x, &z).unwrap();
    let b = f.spec.build(&Point::new(800.0, 500.0), &x, &z).unwrap();
    assert_eq!(a, b);
    for k in 0..2 {
        for mm in 0..5 {
            assert!((a[k * 5 + mm] - c * x[k].coeffs()[mm]).abs() < 1e-12);
        }
    }
}

#[test]
fn standardizer_round_trip_on_random_matrix() {
    let mut r = common::rng(8);
    let rows: Vec<Vec<f64>> = (0..100).map(|_| (0..10).map(|c| r.random::<f64>() * (c + 1) as f64).collect()).collect();
    let st = FeatureStandardizer::fit(&rows).unwrap();
    for row in &rows {
        let back = st.invert(&st.apply(row).unwrap()).unwrap();
        for (a, b) in back.iter().zip(row) {
            assert!((a - b).abs() < 1e-10);
        }
    }
    // population convention: standardized columns have mean 0 and variance 1
    for c in 0..10 {
        let col: Vec<f64> = rows.iter().map(|row| st.apply(row).unwrap()[c]).collect();
        let mean = col.iter().sum::<f64>() / 100.0;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 100.0;
        assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn changing_one_scalar_touches_only_its_slots(jj in 0usize..3, delta in -5.0f64..5.0, x0 in 0.0f64..900.0, y0 in 0.0f64..600.0) {
        prop_assume!(delta.abs() > 1e-6);
        let f = fixture(1, 3, 3, 4, 2);
        let x = curves(1, 4);
        let s = Point::new(x0, y0);
        let mut z = vec![0.5, 1.0, -2.0];
        let a = f.spec.build(&s, &x, &z).unwrap();
        z[jj] += delta;
        let b = f.spec.build(&s, &x, &z).unwrap();
        let lo = 3 * 4 + jj * 4;
        for i in 0..a.len() {
            if i < lo || i >= lo + 4 {
                prop_assert_eq!(a[i], b[i]);
            }
        }
    }
}
