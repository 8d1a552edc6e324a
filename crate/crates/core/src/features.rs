//! The engineered DSNet input vector.
//!
//! For a site `s` with functional covariates `X_1..X_K` and scalars
//! `Z_1..Z_J`, the feature vector has three blocks:
//!
//! 1. `ψ_p(s) · a_km` with `a_km = ∫ f_m(t) X_k(s;t) dt`, slot
//!    `k·M·P + m·P + p`;
//! 2. `ψ_p(s) · z_j`, slot `K·M·P + j·P + p`;
//! 3. `φ_h(s)`, slot `K·M·P + J·P + h`.
//!
//! A first-layer weight row `w` therefore induces the location-specific
//! functional weight `β_k(s;t) = Σ_{m,p} w[k,m,p] ψ_p(s) f_m(t)` and scalar
//! weight `ω_j(s) = Σ_p w[j,p] ψ_p(s)`, which is what
//! [`FeatureSpec::functional_weight`] and [`FeatureSpec::scalar_weight`]
//! reconstruct.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basis::{FourierBasis, MrtsBasis};
use crate::functional::{inner_products, FunctionalError, RegisteredFunction, DEFAULT_QUADRATURE_POINTS};
use crate::geometry::Point;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum FeatureError {
    #[error("expected {expected} {what}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("spatial basis has {available} functions but {requested} are required")]
    SpatialBasisTooSmall { requested: usize, available: usize },
    #[error("P must be at least 1")]
    ZeroP,
    #[error("standardizer needs at least two rows, got {0}")]
    TooFewRows(usize),
    #[error(transparent)]
    Functional(#[from] FunctionalError),
}

/// Position of one slot in the feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureIndex {
    Functional { k: usize, m: usize, p: usize },
    Scalar { j: usize, p: usize },
    RandomEffect { h: usize },
}

/// Block dimensions `K, M, J, P, H`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureDims {
    pub k: usize,
    pub m: usize,
    pub j: usize,
    pub p: usize,
    pub h: usize,
}

impl FeatureDims {
    pub fn functional_width(&self) -> usize {
        self.k * self.m * self.p
    }

    pub fn scalar_width(&self) -> usize {
        self.j * self.p
    }

    /// `D = K·M·P + J·P + H`.
    pub fn total(&self) -> usize {
        self.functional_width() + self.scalar_width() + self.h
    }
}

/// Spatial basis values at one site: `ψ_1..ψ_P` and `φ_1..φ_H`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialEmbedding {
    pub psi: Vec<f64>,
    pub phi: Vec<f64>,
}

/// Everything needed to map (site, curves, scalars) to a feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    dims: FeatureDims,
    weight_basis: FourierBasis,
    psi_basis: MrtsBasis,
    /// Separate random-effect family; `None` shares `psi_basis`.
    phi_basis: Option<MrtsBasis>,
}

impl FeatureSpec {
    pub fn new(
        dims: FeatureDims,
        weight_basis: FourierBasis,
        psi_basis: MrtsBasis,
        phi_basis: Option<MrtsBasis>,
    ) -> Result<Self, FeatureError> {
        if dims.p == 0 {
            return Err(FeatureError::ZeroP);
        }
        if weight_basis.size() != dims.m {
            return Err(FeatureError::Dimension {
                what: "weight basis functions",
                expected: dims.m,
                got: weight_basis.size(),
            });
        }
        if psi_basis.size() < dims.p {
            return Err(FeatureError::SpatialBasisTooSmall {
                requested: dims.p,
                available: psi_basis.size(),
            });
        }
        let phi_size = phi_basis.as_ref().unwrap_or(&psi_basis).size();
        if phi_size < dims.h {
            return Err(FeatureError::SpatialBasisTooSmall {
                requested: dims.h,
                available: phi_size,
            });
        }
        Ok(Self {
            dims,
            weight_basis,
            psi_basis,
            phi_basis,
        })
    }

    pub fn dims(&self) -> &FeatureDims {
        &self.dims
    }

    pub fn dimension(&self) -> usize {
        self.dims.total()
    }

    pub fn weight_basis(&self) -> &FourierBasis {
        &self.weight_basis
    }

    pub fn psi_basis(&self) -> &MrtsBasis {
        &self.psi_basis
    }

    pub fn phi_basis(&self) -> &MrtsBasis {
        self.phi_basis.as_ref().unwrap_or(&self.psi_basis)
    }

    pub fn slot(&self, index: FeatureIndex) -> usize {
        let FeatureDims { m, p, .. } = self.dims;
        match index {
            FeatureIndex::Functional { k, m: mi, p: pi } => k * m * p + mi * p + pi,
            FeatureIndex::Scalar { j, p: pi } => self.dims.functional_width() + j * p + pi,
            FeatureIndex::RandomEffect { h } => {
                self.dims.functional_width() + self.dims.scalar_width() + h
            }
        }
    }

    /// Slot order: the inverse of [`FeatureSpec::slot`].
    pub fn index_map(&self) -> Vec<FeatureIndex> {
        let FeatureDims { k, m, j, p, h } = self.dims;
        let mut out = Vec::with_capacity(self.dimension());
        for ki in 0..k {
            for mi in 0..m {
                for pi in 0..p {
                    out.push(FeatureIndex::Functional { k: ki, m: mi, p: pi });
                }
            }
        }
        for ji in 0..j {
            for pi in 0..p {
                out.push(FeatureIndex::Scalar { j: ji, p: pi });
            }
        }
        for hi in 0..h {
            out.push(FeatureIndex::RandomEffect { h: hi });
        }
        out
    }

    pub fn embed(&self, s: &Point) -> SpatialEmbedding {
        let psi = self.psi_basis.eval_prefix(s, self.dims.p);
        let phi = match (&self.phi_basis, self.dims.h) {
            (_, 0) => Vec::new(),
            (None, h) if h <= self.dims.p => psi[..h].to_vec(),
            (None, h) => self.psi_basis.eval_prefix(s, h),
            (Some(b), h) => b.eval_prefix(s, h),
        };
        SpatialEmbedding { psi, phi }
    }

    /// Inner products `a_km` of each registered curve against the weight basis.
    pub fn inner_products(&self, x: &[RegisteredFunction]) -> Result<Vec<Vec<f64>>, FeatureError> {
        if x.len() != self.dims.k {
            return Err(FeatureError::Dimension {
                what: "functional covariates",
                expected: self.dims.k,
                got: x.len(),
            });
        }
        x.iter()
            .map(|xk| {
                inner_products(xk, &self.weight_basis, Some(DEFAULT_QUADRATURE_POINTS))
                    .map_err(FeatureError::from)
            })
            .collect()
    }

    /// Assemble the feature vector from precomputed pieces.
    pub fn assemble(
        &self,
        embedding: &SpatialEmbedding,
        inner: &[Vec<f64>],
        z: &[f64],
    ) -> Result<Vec<f64>, FeatureError> {
        let FeatureDims { k, m, j, p, h } = self.dims;
        let check = |what, expected, got| {
            if expected == got {
                Ok(())
            } else {
                Err(FeatureError::Dimension { what, expected, got })
            }
        };
        check("functional covariates", k, inner.len())?;
        for a in inner {
            check("inner products", m, a.len())?;
        }
        check("scalar covariates", j, z.len())?;
        check("psi values", p, embedding.psi.len())?;
        check("phi values", h, embedding.phi.len())?;

        let mut out = Vec::with_capacity(self.dimension());
        for a in inner {
            for am in a {
                out.extend(embedding.psi.iter().map(|psi| psi * am));
            }
        }
        for zj in z {
            out.extend(embedding.psi.iter().map(|psi| psi * zj));
        }
        out.extend_from_slice(&embedding.phi);
        Ok(out)
    }

    /// Feature vector for site `s`, registered curves `x` and scalars `z`.
    pub fn build(&self, s: &Point, x: &[RegisteredFunction], z: &[f64]) -> Result<Vec<f64>, FeatureError> {
        let inner = self.inner_products(x)?;
        self.assemble(&self.embed(s), &inner, z)
    }

    /// `β_k(s;t) = Σ_{m,p} w[k,m,p] ψ_p(s) f_m(t)` for one first-layer row.
    pub fn functional_weight(&self, weights: &[f64], k: usize, s: &Point, t: f64) -> f64 {
        let psi = self.psi_basis.eval_prefix(s, self.dims.p);
        let f: Vec<f64> = (0..self.dims.m)
            .map(|mi| self.weight_basis.eval_unchecked(mi, t))
            .collect();
        self.functional_weight_with(weights, k, &psi, &f)
    }

    pub(crate) fn functional_weight_with(&self, weights: &[f64], k: usize, psi: &[f64], f: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (mi, fm) in f.iter().enumerate() {
            for (pi, psip) in psi.iter().enumerate() {
                acc += weights[self.slot(FeatureIndex::Functional { k, m: mi, p: pi })] * psip * fm;
            }
        }
        acc
    }

    /// `ω_j(s) = Σ_p w[j,p] ψ_p(s)` for one first-layer row.
    pub fn scalar_weight(&self, weights: &[f64], j: usize, s: &Point) -> f64 {
        let psi = self.psi_basis.eval_prefix(s, self.dims.p);
        self.scalar_weight_with(weights, j, &psi)
    }

    pub(crate) fn scalar_weight_with(&self, weights: &[f64], j: usize, psi: &[f64]) -> f64 {
        psi.iter()
            .enumerate()
            .map(|(pi, psip)| weights[self.slot(FeatureIndex::Scalar { j, p: pi })] * psip)
            .sum()
    }
}

/// Per-feature centring and scaling fitted on training rows.
///
/// Uses the population standard deviation (divisor `n`). Columns whose
/// spread is at roundoff level (`sd ≤ 1e-12·max(|mean|, 1)`) are flagged
/// constant and only centred.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStandardizer {
    mean: Vec<f64>,
    sd: Vec<f64>,
    constant: Vec<bool>,
}

impl FeatureStandardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self, FeatureError> {
        if rows.len() < 2 {
            return Err(FeatureError::TooFewRows(rows.len()));
        }
        let d = rows[0].len();
        for r in rows {
            if r.len() != d {
                return Err(FeatureError::Dimension {
                    what: "features",
                    expected: d,
                    got: r.len(),
                });
            }
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let sd: Vec<f64> = var.iter().map(|s| (s / n).sqrt()).collect();
        let constant = sd
            .iter()
            .zip(&mean)
            .map(|(s, m)| *s <= 1e-12 * m.abs().max(1.0))
            .collect();
        Ok(Self { mean, sd, constant })
    }

    pub fn dimension(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn sd(&self) -> &[f64] {
        &self.sd
    }

    pub fn is_constant(&self, i: usize) -> bool {
        self.constant[i]
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>, FeatureError> {
        self.check(x)?;
        Ok(x.iter()
            .enumerate()
            .map(|(i, v)| {
                if self.constant[i] {
                    v - self.mean[i]
                } else {
                    (v - self.mean[i]) / self.sd[i]
                }
            })
            .collect())
    }

    pub fn invert(&self, z: &[f64]) -> Result<Vec<f64>, FeatureError> {
        self.check(z)?;
        Ok(z.iter()
            .enumerate()
            .map(|(i, v)| {
                if self.constant[i] {
                    v + self.mean[i]
                } else {
                    v * self.sd[i] + self.mean[i]
                }
            })
            .collect())
    }

    /// Multiplier turning a weight on standardized slot `i` into the
    /// equivalent weight on the raw feature; zero for constant slots.
    pub fn raw_weight_factor(&self, i: usize) -> f64 {
        if self.constant[i] {
            0.0
        } else {
            1.0 / self.sd[i]
        }
    }

    fn check(&self, x: &[f64]) -> Result<(), FeatureError> {
        if x.len() != self.mean.len() {
            return Err(FeatureError::Dimension {
                what: "features",
                expected: self.mean.len(),
                got: x.len(),
            });
        }
        Ok(())
    }
}
