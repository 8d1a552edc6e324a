//! Independent oracles shared by the integration and acceptance suites.
#![allow(dead_code)]

use dsnet::data_io::{DatasetMeta, Record, RecordFlags, SpatialDataset};
use dsnet::functional::FunctionalSample;
use dsnet::nn::MlpParams;
use dsnet::Point;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `K₁(x) = ∫₀^∞ exp(−x cosh u) cosh u du` by composite Simpson.
pub fn k1_quadrature(x: f64) -> f64 {
    let upper = (60.0 / x + 1.0).acosh();
    let n = 200_000;
    let h = upper / n as f64;
    let f = |u: f64| (-x * u.cosh()).exp() * u.cosh();
    let mut s = f(0.0) + f(upper);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(i as f64 * h);
    }
    s * h / 3.0
}

/// Thin-plate interpolant of `values` at `knots`, from the dense bordered
/// system `[G X; Xᵀ 0] [c; d] = [v; 0]`, evaluated at `at`.
pub fn tps_interpolate(knots: &[Point], values: &[f64], at: &Point) -> f64 {
    let n = knots.len();
    let g = |r: f64| if r <= 0.0 { 0.0 } else { r * r * r.ln() };
    let mut a = DMatrix::zeros(n + 3, n + 3);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = g(knots[i].distance(&knots[j]));
        }
        let row = [1.0, knots[i].x, knots[i].y];
        for (c, v) in row.iter().enumerate() {
            a[(i, n + c)] = *v;
            a[(n + c, i)] = *v;
        }
    }
    let mut b = DVector::zeros(n + 3);
    for i in 0..n {
        b[i] = values[i];
    }
    let sol = a.lu().solve(&b).expect("nonsingular TPS system");
    let radial: f64 = (0..n).map(|i| sol[i] * g(at.distance(&knots[i]))).sum();
    radial + sol[n] + sol[n + 1] * at.x + sol[n + 2] * at.y
}

pub fn mspe_loop(y: &[f64], p: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..y.len() {
        s += (y[i] - p[i]) * (y[i] - p[i]);
    }
    s / y.len() as f64
}

pub fn weighted_loop(y: &[f64], p: &[f64], w: &[f64]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..y.len() {
        num += w[i] * (y[i] - p[i]) * (y[i] - p[i]);
        den += w[i];
    }
    num / den
}

/// Central difference of `½(ŷ − y)²` with respect to parameter `i`.
pub fn finite_difference(params: &MlpParams, x: &[f64], y: f64, i: usize, step: f64) -> f64 {
    let loss = |p: &MlpParams| {
        let r = p.predict(x).unwrap() - y;
        0.5 * r * r
    };
    let mut plus = params.clone();
    plus.as_mut_slice()[i] += step;
    let mut minus = params.clone();
    minus.as_mut_slice()[i] -= step;
    (loss(&plus) - loss(&minus)) / (2.0 * step)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A small heterogeneous dataset: `n_sites` sites × `n_years`, one curve on
/// `grid_points` uniform points and two scalars, with a spatially varying
/// response.
pub fn toy_dataset(n_sites: usize, n_years: usize, grid_points: usize, seed: u64) -> SpatialDataset {
    let mut r = rng(seed);
    let grid: Vec<f64> = (0..grid_points).map(|i| i as f64 / (grid_points - 1) as f64).collect();
    let sites: Vec<Point> = (0..n_sites)
        .map(|_| Point::new(r.random::<f64>() * 500.0, r.random::<f64>() * 300.0))
        .collect();
    let mut records = Vec::new();
    for (l, s) in sites.iter().enumerate() {
        for y in 0..n_years {
            let a: f64 = r.random::<f64>() * 2.0 - 1.0;
            let b: f64 = r.random::<f64>() * 2.0 - 1.0;
            let values: Vec<f64> = grid
                .iter()
                .map(|t| a * (2.0 * std::f64::consts::PI * t).sin() + b * (2.0 * std::f64::consts::PI * t).cos() + 0.5)
                .collect();
            let z = vec![r.random::<f64>(), r.random::<f64>()];
            let slope = 1.0 + s.x / 250.0;
            let response = slope * a - b * z[0] + s.y / 100.0 + 0.1 * r.random::<f64>();
            records.push(Record {
                county_id: format!("c{l:03}"),
                year: 2000 + y as i32,
                location: *s,
                response: Some(response),
                curves: vec![FunctionalSample::new(grid.clone(), values).unwrap()],
                scalars: z,
                weight: Some(1.0 + r.random::<f64>() * 10.0),
                state: Some(if s.x < 250.0 { "A".into() } else { "B".into() }),
                flags: RecordFlags::default(),
            });
        }
    }
    SpatialDataset::new(records, DatasetMeta::default()).unwrap()
}
