//! A midwest-like county panel in the CSV schema of `data_io`.
//!
//! Sites are uniform in a box and split into three states by longitude.
//! Each (county, year) carries daily maximum and minimum temperature (a
//! seasonal cycle plus spatially correlated low-rank anomalies plus daily
//! noise), twelve monthly precipitation means and a harvest acreage. The
//! response follows a DSNet-style truth with spatially varying functional
//! and scalar weights and a spatial random effect:
//!
//! ```text
//! Y = μ_year + g(c · {Σ_k Σ_r ϑ_kr(s) ξ_kr + Σ_j ω_j(s) p̃_j + η(s)}) + e
//! ```
//!
//! where `ξ_kr` are the anomaly loadings of curve `k` and `p̃_j` the scaled
//! precipitation anomaly of month `j`. Values are rounded to the precision
//! written to disk, so ingesting the CSVs reproduces the dataset exactly.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{
    calibration_scale, config_error, low_rank_basis, random_effect, uniform_sites, FieldSampler, LinkFunction,
    SimulationError,
};
use crate::basis::day_to_time;
use crate::data_io::{
    scalar_names, write_dataset, DatasetMeta, DatasetPaths, Record, RecordFlags, SpatialDataset, CURVE_NAMES,
    DAYS_PER_YEAR, RESPONSE_UNITS,
};
use crate::functional::FunctionalSample;
use crate::geometry::Point;
use crate::seed::{self, Stream};

pub const STATES: [&str; 3] = ["IA", "IL", "IN"];
/// Months whose precipitation enters the truth.
const GROWING_SEASON: std::ops::RangeInclusive<usize> = 5..=8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MidwestConfig {
    pub n_counties: usize,
    pub n_years: usize,
    pub first_year: i32,
    pub domain: [f64; 2],
    /// Variances of the four anomaly loadings of each temperature curve.
    pub eigenvalues: [f64; 4],
    pub ranges: [f64; 4],
    /// Means of the functional weight loadings ϑ_1r.
    pub coefficient_means: [f64; 4],
    /// Spatial variance of the weight loadings around their means.
    pub coefficient_variance: f64,
    pub random_effect_functions: usize,
    /// Population variance of the calibrated linear predictor, (bu/ac)².
    pub signal_variance: f64,
    pub noise_variance: f64,
    pub base_yield: f64,
    pub trend_per_year: f64,
    pub year_effect_sd: f64,
    /// Probability that a yield is missing.
    pub missing_rate: f64,
    pub link: LinkFunction,
    pub seed: u64,
}

impl Default for MidwestConfig {
    fn default() -> Self {
        Self {
            n_counties: 150,
            n_years: 10,
            first_year: 2000,
            domain: [1000.0, 700.0],
            eigenvalues: [4.0, 2.0, 1.0, 0.5],
            ranges: [400.0, 300.0, 200.0, 100.0],
            coefficient_means: [1.0, -1.0, 0.5, -0.5],
            coefficient_variance: 1.0,
            random_effect_functions: 30,
            signal_variance: 150.0,
            noise_variance: 40.0,
            base_yield: 150.0,
            trend_per_year: 2.0,
            year_effect_sd: 10.0,
            missing_rate: 0.05,
            link: LinkFunction::Linear,
            seed: 0,
        }
    }
}

impl MidwestConfig {
    pub fn validate(&self) -> Result<(), SimulationError> {
        if self.n_counties < 4 {
            return Err(config_error("n_counties", "need at least 4 counties"));
        }
        if self.n_years == 0 {
            return Err(config_error("n_years", "must be at least 1"));
        }
        if self.domain.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return Err(config_error("domain", "extent must be positive"));
        }
        if self.eigenvalues.iter().chain(&self.ranges).any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(config_error("eigenvalues/ranges", "must be positive"));
        }
        for (field, v) in [
            ("coefficient_variance", self.coefficient_variance),
            ("noise_variance", self.noise_variance),
            ("year_effect_sd", self.year_effect_sd),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(config_error(field, format!("must be nonnegative, got {v}")));
            }
        }
        if !(self.signal_variance > 0.0 && self.signal_variance.is_finite()) {
            return Err(config_error("signal_variance", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.missing_rate) {
            return Err(config_error("missing_rate", "must lie in [0, 1)"));
        }
        self.link.validate()
    }
}

/// Site-level fields and per-record components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MidwestTruth {
    pub sites: Vec<Point>,
    /// `theta[k][r][site]`.
    pub theta: Vec<Vec<Vec<f64>>>,
    /// `omega[j][site]` for every month (zero outside the growing season).
    pub omega: Vec<Vec<f64>>,
    pub eta: Vec<f64>,
    pub scale: f64,
    pub year_effects: BTreeMap<i32, f64>,
    pub link: LinkFunction,
    pub records: Vec<MidwestTruthRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MidwestTruthRecord {
    pub county_id: String,
    pub year: i32,
    /// `xi[k][r]`.
    pub xi: Vec<[f64; 4]>,
    pub linear_predictor: f64,
    pub g_value: f64,
    pub noise: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedMidwest {
    pub dataset: SpatialDataset,
    pub truth: MidwestTruth,
}

impl SimulatedMidwest {
    pub fn write_csv(&self, dir: impl AsRef<Path>) -> Result<DatasetPaths, SimulationError> {
        let paths = DatasetPaths::in_dir(dir);
        write_dataset(&self.dataset, &paths)?;
        Ok(paths)
    }
}

fn round_to(v: f64, decimals: i32) -> f64 {
    let f = 10f64.powi(decimals);
    (v * f).round() / f
}

/// Seasonal mean of daily max (k = 0) or min (k = 1) temperature, °C.
fn seasonal(k: usize, t: f64, latitude_km: f64) -> f64 {
    let cool = latitude_km / 100.0;
    match k {
        0 => 16.0 - 15.0 * (2.0 * PI * t).cos() - cool,
        _ => 3.0 - 13.0 * (2.0 * PI * t).cos() - cool,
    }
}

/// Climatological monthly precipitation mean, mm.
fn precip_climatology(month: usize) -> f64 {
    70.0 + 30.0 * (2.0 * PI * (month as f64 - 3.0) / 12.0).sin()
}

pub fn county_id(l: usize) -> String {
    format!("C{:04}", l + 1)
}

pub fn generate_midwest_like(cfg: &MidwestConfig) -> Result<SimulatedMidwest, SimulationError> {
    cfg.validate()?;
    let master = cfg.seed;
    let n = cfg.n_counties;
    let sites: Vec<Point> = uniform_sites(n, cfg.domain[0], cfg.domain[1], seed::derive(master, Stream::Sites, 0))
        .into_iter()
        .map(|p| Point::new(round_to(p.x, 3), round_to(p.y, 3)))
        .collect();
    let state_of = |p: &Point| STATES[((p.x / cfg.domain[0] * 3.0) as usize).min(2)];
    let mut ranges = cfg.ranges.to_vec();
    ranges.push(300.0);
    let sampler = FieldSampler::new(&sites, &ranges)?;

    let mut coef_rng = seed::rng(seed::derive(master, Stream::Coefficients, 0));
    let theta: Vec<Vec<Vec<f64>>> = (0..CURVE_NAMES.len())
        .map(|k| {
            (0..4)
                .map(|r| {
                    let mean = if k == 0 { cfg.coefficient_means[r] } else { -0.5 * cfg.coefficient_means[r] };
                    sampler.draw(cfg.ranges[r], mean, cfg.coefficient_variance, &mut coef_rng)
                })
                .collect()
        })
        .collect();
    let season_weight = sampler.draw(300.0, 0.8, cfg.coefficient_variance, &mut coef_rng);
    let omega: Vec<Vec<f64>> = (1..=12)
        .map(|m| {
            if GROWING_SEASON.contains(&m) {
                season_weight.clone()
            } else {
                vec![0.0; n]
            }
        })
        .collect();
    let mut eta_rng = seed::rng(seed::derive(master, Stream::Coefficients, 1));
    let (eta, _) = random_effect(&sites, cfg.random_effect_functions, &mut eta_rng)?;
    let acres: Vec<f64> = (0..n).map(|_| (20_000.0 + 180_000.0 * coef_rng.random::<f64>()).round()).collect();

    let mut year_rng = seed::rng(seed::derive(master, Stream::Coefficients, 2));
    let years: Vec<i32> = (0..cfg.n_years as i32).map(|y| cfg.first_year + y).collect();
    let year_effects: BTreeMap<i32, f64> = years
        .iter()
        .enumerate()
        .map(|(i, y)| {
            let shock: f64 = year_rng.sample(StandardNormal);
            (*y, cfg.base_yield + cfg.trend_per_year * i as f64 + cfg.year_effect_sd * shock)
        })
        .collect();

    let grid: Vec<f64> = (1..=DAYS_PER_YEAR).map(day_to_time).collect();
    let basis = low_rank_basis();
    let f: Vec<Vec<f64>> = grid.iter().map(|t| basis.eval_all(*t).expect("t in [0, 1]")).collect();

    struct Draft {
        l: usize,
        year: i32,
        curves: Vec<Vec<f64>>,
        scalars: Vec<f64>,
        xi: Vec<[f64; 4]>,
        raw: f64,
        weight: f64,
    }
    let mut drafts = Vec::with_capacity(n * years.len());
    let mut per_year = Vec::with_capacity(years.len());
    for (yi, _) in years.iter().enumerate() {
        let mut rng = seed::rng(seed::derive(master, Stream::Covariates, yi as u64));
        let xi: Vec<Vec<Vec<f64>>> = (0..CURVE_NAMES.len())
            .map(|_| (0..4).map(|r| sampler.draw(cfg.ranges[r], 0.0, cfg.eigenvalues[r], &mut rng)).collect())
            .collect();
        let wet = sampler.draw(300.0, 0.0, 1.0, &mut rng);
        per_year.push((xi, wet, rng));
    }
    for l in 0..n {
        for (yi, year) in years.iter().enumerate() {
            let (xi, wet, rng) = &mut per_year[yi];
            let xi_l: Vec<[f64; 4]> = (0..CURVE_NAMES.len())
                .map(|k| [xi[k][0][l], xi[k][1][l], xi[k][2][l], xi[k][3][l]])
                .collect();
            let curves: Vec<Vec<f64>> = (0..CURVE_NAMES.len())
                .map(|k| {
                    grid.iter()
                        .zip(&f)
                        .map(|(t, fr)| {
                            let anomaly: f64 = fr.iter().zip(&xi_l[k]).map(|(a, b)| a * b).sum();
                            let daily: f64 = rng.sample(StandardNormal);
                            round_to(seasonal(k, *t, sites[l].y) + anomaly + daily, 2)
                        })
                        .collect()
                })
                .collect();
            let scalars: Vec<f64> = (1..=12)
                .map(|m| {
                    let e: f64 = rng.sample(StandardNormal);
                    round_to((precip_climatology(m) + 20.0 * wet[l] + 10.0 * e).max(0.0), 1)
                })
                .collect();
            let functional: f64 = (0..CURVE_NAMES.len())
                .map(|k| (0..4).map(|r| theta[k][r][l] * xi_l[k][r]).sum::<f64>())
                .sum();
            let scalar: f64 = (0..12)
                .map(|j| omega[j][l] * (scalars[j] - precip_climatology(j + 1)) / 30.0)
                .sum();
            let jitter = 0.9 + 0.2 * rng.random::<f64>();
            drafts.push(Draft {
                l,
                year: *year,
                curves,
                scalars,
                xi: xi_l,
                raw: functional + scalar + eta[l],
                weight: (acres[l] * jitter).round(),
            });
        }
    }

    let raw: Vec<f64> = drafts.iter().map(|d| d.raw).collect();
    let scale = calibration_scale(&raw, Some(cfg.signal_variance));
    let mut noise_rng = seed::rng(seed::derive(master, Stream::Noise, 0));
    let mut miss_rng = seed::rng(seed::derive(master, Stream::Missingness, 0));
    let sd = cfg.noise_variance.sqrt();

    let mut records = Vec::with_capacity(drafts.len());
    let mut truth_records = Vec::with_capacity(drafts.len());
    for d in drafts {
        let lp = scale * d.raw;
        let g = cfg.link.eval(lp);
        let e = sd * noise_rng.sample::<f64, _>(StandardNormal);
        let missing = miss_rng.random::<f64>() < cfg.missing_rate;
        let y = round_to(year_effects[&d.year] + g + e, 2);
        records.push(Record {
            county_id: county_id(d.l),
            year: d.year,
            location: sites[d.l],
            response: if missing { None } else { Some(y) },
            curves: d
                .curves
                .into_iter()
                .map(|v| FunctionalSample::new(grid.clone(), v))
                .collect::<Result<_, _>>()?,
            scalars: d.scalars,
            weight: Some(d.weight),
            state: Some(state_of(&sites[d.l]).to_string()),
            flags: RecordFlags::default(),
        });
        truth_records.push(MidwestTruthRecord {
            county_id: county_id(d.l),
            year: d.year,
            xi: d.xi,
            linear_predictor: lp,
            g_value: g,
            noise: e,
        });
    }
    let dataset = SpatialDataset::new(
        records,
        DatasetMeta {
            response_units: RESPONSE_UNITS.into(),
            curve_names: CURVE_NAMES.iter().map(|s| s.to_string()).collect(),
            scalar_names: scalar_names(),
            anomaly: false,
            year_means: BTreeMap::new(),
        },
    )?;
    Ok(SimulatedMidwest {
        dataset,
        truth: MidwestTruth {
            sites,
            theta,
            omega,
            eta,
            scale,
            year_effects,
            link: cfg.link,
            records: truth_records,
        },
    })
}
