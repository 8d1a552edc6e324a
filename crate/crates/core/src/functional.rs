//! Functional covariates: observation, Fourier registration, and the
//! inner products `∫ f_m(t) X(t) dt` consumed by the first network layer.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basis::{check_grid, uniform_grid, BasisError, FourierBasis};

/// Grid size for the trapezoid fallback when the weight basis is not nested
/// in the registration basis.
pub const DEFAULT_QUADRATURE_POINTS: usize = 1000;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum FunctionalError {
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error("grid has {grid} points but values has {values}")]
    LengthMismatch { grid: usize, values: usize },
    #[error("non-finite value at position {0}")]
    NonFinite(usize),
    #[error("registration on {basis} functions is ill-posed with {points} grid points")]
    IllPosedRegistration { basis: usize, points: usize },
    #[error("weight basis ({weight} functions) is not nested in the registration basis ({registration}) and no quadrature fallback was given")]
    BasisMismatch { weight: usize, registration: usize },
    #[error("trapezoid rule needs at least two points")]
    TooFewPoints,
}

/// A discretely observed curve on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalSample {
    grid: Vec<f64>,
    values: Vec<f64>,
}

impl FunctionalSample {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self, FunctionalError> {
        if grid.len() != values.len() {
            return Err(FunctionalError::LengthMismatch {
                grid: grid.len(),
                values: values.len(),
            });
        }
        check_grid(&grid)?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(FunctionalError::NonFinite(i));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }
}

/// A curve compressed to coefficients on a Fourier basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegisteredFunction {
    coeffs: Vec<f64>,
    basis: FourierBasis,
}

impl RegisteredFunction {
    pub fn new(coeffs: Vec<f64>, basis: FourierBasis) -> Result<Self, FunctionalError> {
        if coeffs.len() != basis.size() {
            return Err(FunctionalError::LengthMismatch {
                grid: basis.size(),
                values: coeffs.len(),
            });
        }
        if let Some(i) = coeffs.iter().position(|v| !v.is_finite()) {
            return Err(FunctionalError::NonFinite(i));
        }
        Ok(Self { coeffs, basis })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn basis(&self) -> &FourierBasis {
        &self.basis
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(m, c)| c * self.basis.eval_unchecked(m, t))
            .sum()
    }

    /// Sample the smoothed curve on `grid`.
    pub fn sample(&self, grid: &[f64]) -> Result<FunctionalSample, FunctionalError> {
        check_grid(grid)?;
        FunctionalSample::new(grid.to_vec(), grid.iter().map(|t| self.eval(*t)).collect())
    }

    /// `a·self + b·other`; both must share a basis.
    pub fn linear_combination(&self, a: f64, other: &Self, b: f64) -> Result<Self, FunctionalError> {
        if self.basis != other.basis {
            return Err(FunctionalError::LengthMismatch {
                grid: self.basis.size(),
                values: other.basis.size(),
            });
        }
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Self::new(coeffs, self.basis)
    }
}

/// Least-squares registration onto a fixed basis and grid, with the QR
/// factorization computed once and reused for every curve on that grid.
#[derive(Debug, Clone)]
pub struct Registrar {
    basis: FourierBasis,
    grid: Vec<f64>,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl Registrar {
    pub fn new(basis: FourierBasis, grid: &[f64]) -> Result<Self, FunctionalError> {
        let design = basis.design(grid)?;
        let ill = FunctionalError::IllPosedRegistration {
            basis: basis.size(),
            points: grid.len(),
        };
        if grid.len() < basis.size() {
            return Err(ill);
        }
        let qr = design.qr();
        let r = qr.r();
        let rmax = r.diagonal().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if r.diagonal().iter().any(|v| v.abs() <= 1e-10 * rmax) {
            return Err(ill);
        }
        Ok(Self {
            basis,
            grid: grid.to_vec(),
            q: qr.q(),
            r,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn basis(&self) -> &FourierBasis {
        &self.basis
    }

    pub fn register_values(&self, values: &[f64]) -> Result<RegisteredFunction, FunctionalError> {
        if values.len() != self.grid.len() {
            return Err(FunctionalError::LengthMismatch {
                grid: self.grid.len(),
                values: values.len(),
            });
        }
        let y = DVector::from_column_slice(values);
        let qty = self.q.transpose() * y;
        let coeffs = self
            .r
            .solve_upper_triangular(&qty)
            .ok_or(FunctionalError::IllPosedRegistration {
                basis: self.basis.size(),
                points: self.grid.len(),
            })?;
        RegisteredFunction::new(coeffs.iter().copied().collect(), self.basis)
    }

    pub fn register(&self, sample: &FunctionalSample) -> Result<RegisteredFunction, FunctionalError> {
        if sample.grid() != self.grid.as_slice() {
            return Registrar::new(self.basis, sample.grid())?.register_values(sample.values());
        }
        self.register_values(sample.values())
    }
}

/// Least-squares registration of `sample` on `basis` (QR, not normal equations).
pub fn register(sample: &FunctionalSample, basis: &FourierBasis) -> Result<RegisteredFunction, FunctionalError> {
    Registrar::new(*basis, sample.grid())?.register_values(sample.values())
}

/// `∫ f_m(t) x(t) dt` for every function of `weight_basis`.
///
/// When the weight basis is a prefix of the registration basis the integrals
/// are the leading registration coefficients (orthonormality). Otherwise a
/// composite trapezoid rule on `quadrature_points` uniform points is used, if
/// given.
pub fn inner_products(
    x: &RegisteredFunction,
    weight_basis: &FourierBasis,
    quadrature_points: Option<usize>,
) -> Result<Vec<f64>, FunctionalError> {
    if weight_basis.is_prefix_of(x.basis()) {
        return Ok(x.coeffs()[..weight_basis.size()].to_vec());
    }
    let n = quadrature_points.ok_or(FunctionalError::BasisMismatch {
        weight: weight_basis.size(),
        registration: x.basis().size(),
    })?;
    let grid = uniform_grid(n);
    let xv: Vec<f64> = grid.iter().map(|t| x.eval(*t)).collect();
    (0..weight_basis.size())
        .map(|m| {
            let integrand: Vec<f64> = grid
                .iter()
                .zip(&xv)
                .map(|(t, v)| weight_basis.eval_unchecked(m, *t) * v)
                .collect();
            trapezoid(&grid, &integrand)
        })
        .collect()
}

/// Composite trapezoid estimate of `∫ values dt` over `grid`.
pub fn trapezoid(grid: &[f64], values: &[f64]) -> Result<f64, FunctionalError> {
    if grid.len() != values.len() {
        return Err(FunctionalError::LengthMismatch {
            grid: grid.len(),
            values: values.len(),
        });
    }
    if grid.len() < 2 {
        return Err(FunctionalError::TooFewPoints);
    }
    Ok(grid
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum())
}
