use std::f64::consts::{PI, SQRT_2};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::BasisError;

/// Orthonormal Fourier system on `[0, 1]`.
///
/// In order: the constant `1` (when `include_constant`), then
/// `√2·sin(2πt)`, `√2·cos(2πt)`, `√2·sin(4πt)`, `√2·cos(4πt)`, ...
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FourierBasis {
    size: usize,
    include_constant: bool,
}

impl FourierBasis {
    pub fn new(size: usize, include_constant: bool) -> Result<Self, BasisError> {
        if size == 0 {
            return Err(BasisError::EmptyBasis);
        }
        Ok(Self {
            size,
            include_constant,
        })
    }

    /// Basis with the constant term, the default for functional weights and
    /// for registration.
    pub fn with_constant(size: usize) -> Result<Self, BasisError> {
        Self::new(size, true)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn include_constant(&self) -> bool {
        self.include_constant
    }

    /// Whether the functions of `self` are exactly the first `self.size()`
    /// functions of `other`.
    pub fn is_prefix_of(&self, other: &FourierBasis) -> bool {
        self.include_constant == other.include_constant && self.size <= other.size
    }

    /// Evaluate the `index`-th function (1-based) at `t`.
    pub fn eval(&self, index: usize, t: f64) -> Result<f64, BasisError> {
        if index == 0 || index > self.size {
            return Err(BasisError::IndexOutOfRange {
                index,
                size: self.size,
            });
        }
        check_time(t)?;
        Ok(self.eval_unchecked(index - 1, t))
    }

    /// Zero-based evaluation without range checks.
    pub(crate) fn eval_unchecked(&self, zero_index: usize, t: f64) -> f64 {
        let j = if self.include_constant {
            if zero_index == 0 {
                return 1.0;
            }
            zero_index - 1
        } else {
            zero_index
        };
        let freq = (j / 2 + 1) as f64;
        let arg = 2.0 * PI * freq * t;
        if j % 2 == 0 {
            SQRT_2 * arg.sin()
        } else {
            SQRT_2 * arg.cos()
        }
    }

    /// All function values at `t`.
    pub fn eval_all(&self, t: f64) -> Result<Vec<f64>, BasisError> {
        check_time(t)?;
        Ok((0..self.size).map(|m| self.eval_unchecked(m, t)).collect())
    }

    /// Design matrix with entry `(i, m)` = function `m` at `grid[i]`.
    pub fn design(&self, grid: &[f64]) -> Result<DMatrix<f64>, BasisError> {
        check_grid(grid)?;
        Ok(DMatrix::from_fn(grid.len(), self.size, |i, m| {
            self.eval_unchecked(m, grid[i])
        }))
    }
}

fn check_time(t: f64) -> Result<(), BasisError> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(BasisError::OutsideDomain(t))
    }
}

/// Validate a strictly ascending grid inside `[0, 1]`.
pub fn check_grid(grid: &[f64]) -> Result<(), BasisError> {
    if grid.is_empty() {
        return Err(BasisError::EmptyGrid);
    }
    for t in grid {
        check_time(*t)?;
    }
    if let Some(i) = grid.windows(2).position(|w| w[0] >= w[1]) {
        return Err(BasisError::UnsortedGrid { position: i + 1 });
    }
    Ok(())
}

/// Maps a calendar day `1..=365` onto the unit time domain.
pub fn day_to_time(day: u32) -> f64 {
    (day as f64 - 0.5) / 365.0
}

/// `n` equally spaced points covering `[0, 1]`, endpoints included.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}
