//! Scenario 1: low-rank functional covariates with stationary spatial
//! dependence.
//!
//! For replicate `k` and site `s`:
//!
//! ```text
//! X_k(s;t) = Σ_r ξ_kr(s) f_r(t),   ξ_kr ~ N(0, λ_r Σ(ζ_r))
//! β(s;t)   = Σ_r ϑ_r(s) f_r(t),    ϑ_r ~ N(μ_r 1, Σ(ζ_r))
//! Y_k(s)   = g(c · {Z_k(s) α(s) + Σ_r ξ_kr(s) ϑ_r(s) + η(s)}) + e
//! ```
//!
//! with `Z ~ U(0, 2)`, `α ~ N(1, Σ(ζ_1))`, `η` a combination of MRTS
//! functions and `c` the signal-variance calibration.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    calibration_scale, config_error, low_rank_basis, random_effect, uniform_sites, FieldSampler, LinkFunction,
    LinkKind, SimulationError,
};
use crate::basis::uniform_grid;
use crate::data_io::{DatasetMeta, Record, RecordFlags, SpatialDataset};
use crate::functional::FunctionalSample;
use crate::geometry::Point;
use crate::seed::{self, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Explicit site coordinates (km); `None` draws `n_sites` uniform sites.
    pub sites: Option<Vec<Point>>,
    pub n_sites: usize,
    /// Extent of the uniform layout, km.
    pub domain: [f64; 2],
    pub replicates: usize,
    pub eigenvalues: [f64; 4],
    pub ranges: [f64; 4],
    pub coefficient_means: [f64; 4],
    pub noise_variance: f64,
    pub link: LinkFunction,
    pub grid_points: usize,
    pub random_effect_functions: usize,
    /// Target population variance of the linear predictor; `None` leaves it
    /// unscaled.
    pub signal_variance: Option<f64>,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            sites: None,
            n_sites: 403,
            domain: [1000.0, 700.0],
            replicates: 5,
            eigenvalues: [4.0, 2.0, 1.0, 0.5],
            ranges: [400.0, 300.0, 200.0, 100.0],
            coefficient_means: [2.0, -2.0, 1.0, -1.0],
            noise_variance: 2.0,
            link: LinkFunction::Linear,
            grid_points: 100,
            random_effect_functions: 10,
            signal_variance: Some(5.0),
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn with_link(kind: LinkKind) -> Self {
        Self {
            link: LinkFunction::scenario1(kind),
            ..Self::default()
        }
    }

    /// Noise variance giving `snr` = signal variance / noise variance.
    pub fn noise_for_snr(&self, snr: f64) -> f64 {
        self.signal_variance.unwrap_or(5.0) / snr
    }

    pub fn validate(&self) -> Result<(), SimulationError> {
        let n = self.sites.as_ref().map_or(self.n_sites, Vec::len);
        if n < 4 {
            return Err(config_error("sites", format!("need at least 4 sites, got {n}")));
        }
        if self.domain.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return Err(config_error("domain", "extent must be positive"));
        }
        if self.replicates == 0 {
            return Err(config_error("replicates", "must be at least 1"));
        }
        if self.eigenvalues.iter().chain(&self.ranges).any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(config_error("eigenvalues/ranges", "must be positive"));
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return Err(config_error("noise_variance", format!("must be nonnegative, got {}", self.noise_variance)));
        }
        if self.grid_points < 2 {
            return Err(config_error("grid_points", "need at least 2"));
        }
        if self.signal_variance.is_some_and(|v| !(v > 0.0 && v.is_finite())) {
            return Err(config_error("signal_variance", "must be positive"));
        }
        self.link.validate()
    }
}

/// Ground truth of one (site, replicate) observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub site: usize,
    pub replicate: usize,
    pub xi: [f64; 4],
    pub z: f64,
    /// Calibrated linear predictor `c · (Zα + Σξϑ + η)`.
    pub linear_predictor: f64,
    pub g_value: f64,
    pub noise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario1Truth {
    pub sites: Vec<Point>,
    pub theta: Vec<[f64; 4]>,
    pub alpha: Vec<f64>,
    pub eta: Vec<f64>,
    pub upsilon: Vec<f64>,
    pub scale: f64,
    pub link: LinkFunction,
    pub noise_variance: f64,
    /// Aligned with the dataset records.
    pub records: Vec<TruthRecord>,
}

/// Dataset plus the components it was built from. Sites are named
/// `S0001, S0002, …` and replicate `k` is stored as year `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedDataset {
    pub dataset: SpatialDataset,
    pub truth: Scenario1Truth,
}

pub fn site_id(l: usize) -> String {
    format!("S{:04}", l + 1)
}

pub fn generate_scenario1(cfg: &ScenarioConfig) -> Result<SimulatedDataset, SimulationError> {
    cfg.validate()?;
    let master = cfg.seed;
    let sites = match &cfg.sites {
        Some(s) => s.clone(),
        None => uniform_sites(cfg.n_sites, cfg.domain[0], cfg.domain[1], seed::derive(master, Stream::Sites, 0)),
    };
    let n = sites.len();
    let sampler = FieldSampler::new(&sites, &cfg.ranges)?;

    let mut coef_rng = seed::rng(seed::derive(master, Stream::Coefficients, 0));
    let theta_cols: Vec<Vec<f64>> = (0..4)
        .map(|r| sampler.draw(cfg.ranges[r], cfg.coefficient_means[r], 1.0, &mut coef_rng))
        .collect();
    let alpha = sampler.draw(cfg.ranges[0], 1.0, 1.0, &mut coef_rng);
    let mut eta_rng = seed::rng(seed::derive(master, Stream::Coefficients, 1));
    let (eta, upsilon) = random_effect(&sites, cfg.random_effect_functions, &mut eta_rng)?;
    let theta: Vec<[f64; 4]> = (0..n)
        .map(|l| [theta_cols[0][l], theta_cols[1][l], theta_cols[2][l], theta_cols[3][l]])
        .collect();

    // Replicates are independent given the site-level fields.
    let draws: Vec<(Vec<Vec<f64>>, Vec<f64>)> = (0..cfg.replicates)
        .into_par_iter()
        .map(|k| {
            let mut rng = seed::rng(seed::derive(master, Stream::Replicate, k as u64));
            let xi: Vec<Vec<f64>> = (0..4)
                .map(|r| sampler.draw(cfg.ranges[r], 0.0, cfg.eigenvalues[r], &mut rng))
                .collect();
            let z: Vec<f64> = (0..n).map(|_| 2.0 * rng.random::<f64>()).collect();
            (xi, z)
        })
        .collect();

    let mut raw = Vec::with_capacity(n * cfg.replicates);
    for l in 0..n {
        for (xi, z) in &draws {
            let inner: f64 = (0..4).map(|r| xi[r][l] * theta[l][r]).sum();
            raw.push(z[l] * alpha[l] + inner + eta[l]);
        }
    }
    let scale = calibration_scale(&raw, cfg.signal_variance);

    let noise: Vec<Vec<f64>> = (0..cfg.replicates)
        .map(|k| {
            let mut rng = seed::rng(seed::derive(master, Stream::Noise, k as u64));
            let sd = cfg.noise_variance.sqrt();
            (0..n).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect()
        })
        .collect();

    let grid = uniform_grid(cfg.grid_points);
    let basis = low_rank_basis();
    let f: Vec<Vec<f64>> = grid.iter().map(|t| basis.eval_all(*t).expect("t in [0, 1]")).collect();

    let mut records = Vec::with_capacity(raw.len());
    let mut truth_records = Vec::with_capacity(raw.len());
    for l in 0..n {
        for (k, (xi, z)) in draws.iter().enumerate() {
            let xi_l = [xi[0][l], xi[1][l], xi[2][l], xi[3][l]];
            let values: Vec<f64> = f
                .iter()
                .map(|fr| fr.iter().zip(&xi_l).map(|(a, b)| a * b).sum())
                .collect();
            let lp = scale * raw[l * cfg.replicates + k];
            let g = cfg.link.eval(lp);
            let e = noise[k][l];
            records.push(Record {
                county_id: site_id(l),
                year: k as i32 + 1,
                location: sites[l],
                response: Some(g + e),
                curves: vec![FunctionalSample::new(grid.clone(), values)?],
                scalars: vec![z[l]],
                weight: None,
                state: None,
                flags: RecordFlags::default(),
            });
            truth_records.push(TruthRecord {
                site: l,
                replicate: k + 1,
                xi: xi_l,
                z: z[l],
                linear_predictor: lp,
                g_value: g,
                noise: e,
            });
        }
    }
    let dataset = SpatialDataset::new(
        records,
        DatasetMeta {
            response_units: "simulated".into(),
            curve_names: vec!["x1".into()],
            scalar_names: vec!["z1".into()],
            anomaly: false,
            year_means: Default::default(),
        },
    )?;
    Ok(SimulatedDataset {
        dataset,
        truth: Scenario1Truth {
            sites,
            theta,
            alpha,
            eta,
            upsilon,
            scale,
            link: cfg.link,
            noise_variance: cfg.noise_variance,
            records: truth_records,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::trapezoid;
    use crate::simulation::variance;

    fn small(seed: u64) -> ScenarioConfig {
        ScenarioConfig {
            n_sites: 60,
            seed,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn noiseless_linear_equals_predictor() {
        let sim = generate_scenario1(&ScenarioConfig {
            noise_variance: 0.0,
            ..small(1)
        })
        .unwrap();
        for (r, t) in sim.dataset.records().iter().zip(&sim.truth.records) {
            assert_eq!(r.response.unwrap(), t.linear_predictor);
        }
    }

    #[test]
    fn records_align_with_truth() {
        let sim = generate_scenario1(&small(2)).unwrap();
        assert_eq!(sim.dataset.len(), 300);
        for (r, t) in sim.dataset.records().iter().zip(&sim.truth.records) {
            assert_eq!(r.county_id, site_id(t.site));
            assert_eq!(r.year as usize, t.replicate);
            assert_eq!(r.response.unwrap(), t.g_value + t.noise);
            assert_eq!(r.curves[0].len(), 100);
        }
        let lp: Vec<f64> = sim.truth.records.iter().map(|t| t.linear_predictor).collect();
        assert!((variance(&lp) - 5.0).abs() < 1e-9);
    }

    #[test]
    fn low_rank_identity() {
        let sim = generate_scenario1(&small(3)).unwrap();
        let basis = low_rank_basis();
        for (r, t) in sim.dataset.records().iter().zip(&sim.truth.records).take(40) {
            let c = &r.curves[0];
            let theta = sim.truth.theta[t.site];
            let prod: Vec<f64> = c
                .grid()
                .iter()
                .zip(c.values())
                .map(|(tt, x)| {
                    let beta: f64 = basis.eval_all(*tt).unwrap().iter().zip(&theta).map(|(f, th)| f * th).sum();
                    x * beta
                })
                .collect();
            let direct: f64 = (0..4).map(|i| t.xi[i] * theta[i]).sum();
            assert!((trapezoid(c.grid(), &prod).unwrap() - direct).abs() < 1e-3);
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(generate_scenario1(&small(4)).unwrap().dataset, generate_scenario1(&small(4)).unwrap().dataset);
        assert_ne!(generate_scenario1(&small(4)).unwrap().dataset, generate_scenario1(&small(5)).unwrap().dataset);
    }

    #[test]
    fn rejects_bad_config() {
        assert!(generate_scenario1(&ScenarioConfig {
            noise_variance: -1.0,
            ..small(0)
        })
        .is_err());
        assert!(generate_scenario1(&ScenarioConfig {
            replicates: 0,
            ..small(0)
        })
        .is_err());
    }
}
