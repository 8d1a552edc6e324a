//! Synthetic benchmarks: the low-rank Scenario 1 generator and a
//! midwest-like dataset in the county CSV schema.

mod midwest;
mod scenario1;

use std::collections::HashMap;

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basis::{BasisError, FourierBasis, KnotLayout, MrtsBasis};
use crate::data_io::DataError;
use crate::functional::FunctionalError;
use crate::geometry::Point;
use crate::seed;
use crate::spatial::{build_cov, CholeskyFactor, MaternParams, SpatialError};

pub use midwest::{generate_midwest_like, MidwestConfig, MidwestTruth, MidwestTruthRecord, SimulatedMidwest};
pub use scenario1::{generate_scenario1, Scenario1Truth, ScenarioConfig, SimulatedDataset, TruthRecord};

#[derive(Error, Debug)]
pub enum SimulationError {
    #[error("invalid simulation setting {field}: {message}")]
    Config { field: &'static str, message: String },
    #[error(transparent)]
    Spatial(#[from] SpatialError),
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Functional(#[from] FunctionalError),
    #[error(transparent)]
    Data(#[from] DataError),
}

impl SimulationError {
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            SimulationError::Spatial(SpatialError::NotPositiveDefinite { .. })
                | SimulationError::Basis(BasisError::RankDeficient { .. } | BasisError::Collinear)
        )
    }
}

pub(crate) fn config_error(field: &'static str, message: impl Into<String>) -> SimulationError {
    SimulationError::Config {
        field,
        message: message.into(),
    }
}

/// Outer nonlinearity `g` applied to the linear predictor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LinkFunction {
    Linear,
    /// `c_d · exp(−|x|/2)`.
    DoubleExponential { c_d: f64 },
    /// `c_s · sin(x)`.
    Sine { c_s: f64 },
    /// Plateau of height `c_p1` on `|x| ≤ c_p2`, falling linearly with slope
    /// `c_p1 / c_p3` on either side.
    PiecewiseLinear { c_p1: f64, c_p2: f64, c_p3: f64 },
}

/// Link families by name, with Scenario 1 constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkKind {
    Linear,
    DoubleExponential,
    Sine,
    PiecewiseLinear,
}

impl std::str::FromStr for LinkKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "linear" => Ok(LinkKind::Linear),
            "double_exponential" | "dexp" => Ok(LinkKind::DoubleExponential),
            "sine" | "sin" => Ok(LinkKind::Sine),
            "piecewise_linear" | "piecewise" => Ok(LinkKind::PiecewiseLinear),
            _ => Err(format!(
                "unknown link '{s}' (expected linear, double_exponential, sine or piecewise_linear)"
            )),
        }
    }
}

impl LinkFunction {
    /// Constants `c_d = 10, c_s = 3, c_p1 = 6, c_p2 = 2, c_p3 = 3`.
    pub fn scenario1(kind: LinkKind) -> Self {
        match kind {
            LinkKind::Linear => LinkFunction::Linear,
            LinkKind::DoubleExponential => LinkFunction::DoubleExponential { c_d: 10.0 },
            LinkKind::Sine => LinkFunction::Sine { c_s: 3.0 },
            LinkKind::PiecewiseLinear => LinkFunction::PiecewiseLinear {
                c_p1: 6.0,
                c_p2: 2.0,
                c_p3: 3.0,
            },
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            LinkFunction::Linear => x,
            LinkFunction::DoubleExponential { c_d } => c_d * (-x.abs() / 2.0).exp(),
            LinkFunction::Sine { c_s } => c_s * x.sin(),
            LinkFunction::PiecewiseLinear { c_p1, c_p2, c_p3 } => {
                if x < -c_p2 {
                    c_p1 * (1.0 + (x + c_p2) / c_p3)
                } else if x > c_p2 {
                    c_p1 * (1.0 - (x - c_p2) / c_p3)
                } else {
                    c_p1
                }
            }
        }
    }

    pub fn validate(&self) -> Result<(), SimulationError> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(config_error("link", format!("{name} must be positive, got {v}")))
            }
        };
        match *self {
            LinkFunction::Linear => Ok(()),
            LinkFunction::DoubleExponential { c_d } => positive("c_d", c_d),
            LinkFunction::Sine { c_s } => positive("c_s", c_s),
            LinkFunction::PiecewiseLinear { c_p1, c_p2, c_p3 } => {
                positive("c_p1", c_p1)?;
                positive("c_p2", c_p2)?;
                positive("c_p3", c_p3)
            }
        }
    }
}

/// `n` seeded uniform sites in `[0, width] × [0, height]` km.
pub fn uniform_sites(n: usize, width: f64, height: f64, seed: u64) -> Vec<Point> {
    let mut rng = seed::rng(seed);
    (0..n)
        .map(|_| Point::new(rng.random::<f64>() * width, rng.random::<f64>() * height))
        .collect()
}

/// Unit-variance Matérn (τ = 1) factors over fixed sites, one per range.
pub(crate) struct FieldSampler {
    sites: Vec<Point>,
    factors: HashMap<u64, CholeskyFactor>,
}

impl FieldSampler {
    pub(crate) fn new(sites: &[Point], ranges: &[f64]) -> Result<Self, SimulationError> {
        let mut factors = HashMap::new();
        for &r in ranges {
            if let std::collections::hash_map::Entry::Vacant(e) = factors.entry(r.to_bits()) {
                let cov = build_cov(sites, &MaternParams::whittle(r, 1.0)?)?;
                e.insert(CholeskyFactor::new(&cov)?);
            }
        }
        Ok(Self {
            sites: sites.to_vec(),
            factors,
        })
    }

    /// One draw from `N(mean·1, variance·Σ(range))`. `range` must have been
    /// passed to [`FieldSampler::new`].
    pub(crate) fn draw<R: Rng + ?Sized>(&self, range: f64, mean: f64, variance: f64, rng: &mut R) -> Vec<f64> {
        let factor = &self.factors[&range.to_bits()];
        let unit = factor.draw(&DVector::zeros(self.sites.len()), rng);
        let sd = variance.sqrt();
        unit.iter().map(|v| mean + sd * v).collect()
    }
}

/// `η(s) = Σ_h υ_h φ_h(s)` with the first `count` MRTS functions scaled by
/// `√n_knots`, so each has unit mean square over the knots.
pub(crate) fn random_effect<R: Rng + ?Sized>(
    sites: &[Point],
    count: usize,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>), SimulationError> {
    if count == 0 {
        return Ok((vec![0.0; sites.len()], Vec::new()));
    }
    let basis = MrtsBasis::fit_layout(sites, count.max(crate::basis::POLY_DIM), KnotLayout::Auto)?;
    let scale = (basis.knots().len() as f64).sqrt();
    let upsilon: Vec<f64> = (0..count).map(|_| rng.sample(rand_distr::StandardNormal)).collect();
    let eta = sites
        .iter()
        .map(|s| {
            basis
                .eval_prefix(s, count)
                .iter()
                .zip(&upsilon)
                .map(|(phi, u)| scale * phi * u)
                .sum()
        })
        .collect();
    Ok((eta, upsilon))
}

/// Population variance.
pub(crate) fn variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n
}

/// Multiplier giving `v` population variance `target`; 1 when `v` is flat.
pub(crate) fn calibration_scale(v: &[f64], target: Option<f64>) -> f64 {
    match target {
        Some(t) => {
            let var = variance(v);
            if var > 0.0 {
                (t / var).sqrt()
            } else {
                1.0
            }
        }
        None => 1.0,
    }
}

/// The four Fourier functions `√2 sin 2πt, √2 cos 2πt, √2 sin 4πt, √2 cos 4πt`.
pub(crate) fn low_rank_basis() -> FourierBasis {
    FourierBasis::new(4, false).expect("nonzero size")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn link_examples() {
        assert_eq!(LinkFunction::scenario1(LinkKind::PiecewiseLinear).eval(0.0), 6.0);
        assert_eq!(LinkFunction::scenario1(LinkKind::Sine).eval(0.0), 0.0);
        assert_eq!(LinkFunction::scenario1(LinkKind::DoubleExponential).eval(0.0), 10.0);
        assert_eq!(LinkFunction::Linear.eval(-3.5), -3.5);
    }

    #[test]
    fn piecewise_branches() {
        let g = LinkFunction::scenario1(LinkKind::PiecewiseLinear);
        // slopes ±c_p1/c_p3 = ±2 beyond the plateau
        assert!((g.eval(3.0) - 4.0).abs() < 1e-15);
        assert!((g.eval(-3.0) - 4.0).abs() < 1e-15);
        assert_eq!(g.eval(2.0), 6.0);
        assert_eq!(g.eval(-2.0), 6.0);
        // continuity at the plateau edges
        assert!((g.eval(2.0 + 1e-12) - 6.0).abs() < 1e-10);
    }

    #[test]
    fn link_names() {
        assert_eq!("sine".parse::<LinkKind>().unwrap(), LinkKind::Sine);
        assert_eq!("piecewise-linear".parse::<LinkKind>().unwrap(), LinkKind::PiecewiseLinear);
        assert!("cubic".parse::<LinkKind>().is_err());
    }

    #[test]
    fn calibration() {
        let v = [1.0, 2.0, 3.0, 4.0];
        let c = calibration_scale(&v, Some(5.0));
        let scaled: Vec<f64> = v.iter().map(|x| x * c).collect();
        assert!((variance(&scaled) - 5.0).abs() < 1e-12);
        assert_eq!(calibration_scale(&[2.0, 2.0], Some(5.0)), 1.0);
        assert_eq!(calibration_scale(&v, None), 1.0);
    }
}
