use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::SpatialError;
use crate::seed;

const MAX_JITTER_ATTEMPTS: usize = 20;

/// Lower-triangular factor of a (possibly jittered) covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor {
    lower: DMatrix<f64>,
    jitter_applied: f64,
}

impl CholeskyFactor {
    /// Factor `cov`, adding diagonal jitter when needed.
    ///
    /// The plain matrix is tried first. On failure the jitter starts at
    /// `1e-10·tr(cov)/n` and doubles, for at most 20 attempts. An all-zero
    /// matrix factors to the zero matrix.
    pub fn new(cov: &DMatrix<f64>) -> Result<Self, SpatialError> {
        let n = cov.nrows();
        if cov.ncols() != n {
            return Err(SpatialError::NotSquare {
                rows: n,
                cols: cov.ncols(),
            });
        }
        if cov.iter().all(|v| *v == 0.0) {
            return Ok(Self {
                lower: DMatrix::zeros(n, n),
                jitter_applied: 0.0,
            });
        }
        if let Some(ch) = cov.clone().cholesky() {
            return Ok(Self {
                lower: ch.l(),
                jitter_applied: 0.0,
            });
        }
        let trace: f64 = cov.diagonal().iter().sum();
        let mut jitter = 1e-10 * trace.abs().max(f64::MIN_POSITIVE) / n as f64;
        for _ in 0..MAX_JITTER_ATTEMPTS {
            let mut jittered = cov.clone();
            for i in 0..n {
                jittered[(i, i)] += jitter;
            }
            if let Some(ch) = jittered.cholesky() {
                return Ok(Self {
                    lower: ch.l(),
                    jitter_applied: jitter,
                });
            }
            jitter *= 2.0;
        }
        Err(SpatialError::NotPositiveDefinite {
            max_jitter: jitter / 2.0,
        })
    }

    pub fn lower(&self) -> &DMatrix<f64> {
        &self.lower
    }

    pub fn jitter_applied(&self) -> f64 {
        self.jitter_applied
    }

    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    /// One draw `mean + L z` with `z` standard normal from `rng`.
    pub fn draw<R: Rng + ?Sized>(&self, mean: &DVector<f64>, rng: &mut R) -> DVector<f64> {
        let n = self.dim();
        let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        mean + &self.lower * z
    }
}

/// `n_draws` seeded draws from `N(mean, cov)`.
pub fn sample_gp(
    cov: &DMatrix<f64>,
    mean: &DVector<f64>,
    n_draws: usize,
    seed: u64,
) -> Result<Vec<DVector<f64>>, SpatialError> {
    if mean.len() != cov.nrows() {
        return Err(SpatialError::MeanLength {
            expected: cov.nrows(),
            got: mean.len(),
        });
    }
    if !is_symmetric(cov) {
        return Err(SpatialError::NotSymmetric);
    }
    let factor = CholeskyFactor::new(cov)?;
    let mut rng = seed::rng(seed);
    Ok((0..n_draws).map(|_| factor.draw(mean, &mut rng)).collect())
}

fn is_symmetric(m: &DMatrix<f64>) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    let scale = m.abs().max().max(f64::MIN_POSITIVE);
    (0..m.nrows()).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= 1e-12 * scale))
}
