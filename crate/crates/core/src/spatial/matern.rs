use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::bessel::x_bessel_k1;
use super::SpatialError;
use crate::geometry::Point;

/// Matérn covariance parameters: smoothness τ, range ζ (km), variance λ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaternParams {
    smoothness: f64,
    range: f64,
    variance: f64,
}

impl MaternParams {
    pub fn new(smoothness: f64, range: f64, variance: f64) -> Result<Self, SpatialError> {
        for (name, v) in [("smoothness", smoothness), ("range", range), ("variance", variance)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SpatialError::InvalidParameter { name, value: v });
            }
        }
        Ok(Self {
            smoothness,
            range,
            variance,
        })
    }

    /// τ = 1, the only smoothness the correlation routines support.
    pub fn whittle(range: f64, variance: f64) -> Result<Self, SpatialError> {
        Self::new(1.0, range, variance)
    }

    pub fn smoothness(&self) -> f64 {
        self.smoothness
    }

    pub fn range(&self) -> f64 {
        self.range
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }
}

/// Matérn correlation at distance `h`. For τ = 1 this is `(h/ζ) K₁(h/ζ)`,
/// with `ρ(0) = 1`.
pub fn matern_rho(h: f64, params: &MaternParams) -> Result<f64, SpatialError> {
    if params.smoothness != 1.0 {
        return Err(SpatialError::UnsupportedSmoothness(params.smoothness));
    }
    if !(h >= 0.0) {
        return Err(SpatialError::NegativeDistance(h));
    }
    x_bessel_k1(h / params.range)
}

/// Covariance matrix `λ·ρ(‖s_i − s_j‖)` over `sites`.
pub fn build_cov(sites: &[Point], params: &MaternParams) -> Result<DMatrix<f64>, SpatialError> {
    let n = sites.len();
    let mut cov = DMatrix::zeros(n, n);
    for i in 0..n {
        cov[(i, i)] = params.variance;
        for j in 0..i {
            let c = params.variance * matern_rho(sites[i].distance(&sites[j]), params)?;
            cov[(i, j)] = c;
            cov[(j, i)] = c;
        }
    }
    Ok(cov)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_nonpositive_params() {
        assert!(MaternParams::new(1.0, 0.0, 1.0).is_err());
        assert!(MaternParams::new(1.0, 400.0, -1.0).is_err());
        assert!(MaternParams::new(f64::NAN, 400.0, 1.0).is_err());
    }

    #[test]
    fn unsupported_smoothness() {
        let p = MaternParams::new(0.5, 100.0, 1.0).unwrap();
        assert!(matches!(matern_rho(1.0, &p), Err(SpatialError::UnsupportedSmoothness(_))));
    }

    #[test]
    fn rho_shape() {
        let p = MaternParams::whittle(400.0, 1.0).unwrap();
        assert_eq!(matern_rho(0.0, &p).unwrap(), 1.0);
        assert!((matern_rho(1e-12 * 400.0, &p).unwrap() - 1.0).abs() <= 1e-6);
        assert!(matern_rho(4000.0, &p).unwrap() < 1e-3);
        let mut prev = 1.0;
        for i in 1..200 {
            let r = matern_rho(i as f64 * 10.0, &p).unwrap();
            assert!(r < prev && r > 0.0);
            prev = r;
        }
    }

    #[test]
    fn cov_structure() {
        let p = MaternParams::whittle(400.0, 4.0).unwrap();
        let one = build_cov(&[Point::new(3.0, 4.0)], &p).unwrap();
        assert_eq!(one, DMatrix::from_element(1, 1, 4.0));
        let s = Point::new(10.0, 10.0);
        let two = build_cov(&[s, s], &p).unwrap();
        assert_eq!(two, DMatrix::from_element(2, 2, 4.0));
    }
}
