//! Multi-resolution thin-plate spline (MRTS) basis.
//!
//! The basis is built from the thin-plate kernel `g(r) = r² log r` over a set
//! of planar knots. The first three functions span `{1, x, y}`; the remaining
//! ones are eigenvectors of the kernel matrix after projecting out that span,
//! ordered by descending eigenvalue (global to local). Each eigenvector is
//! extended off the knots as the thin-plate interpolant of its knot values,
//!
//! ```text
//! f(s) = Σ_i c_i g(|s - k_i|) + d_0 + d_1 x + d_2 y,   Σ c_i (1, x_i, y_i) = 0,
//! ```
//!
//! which in closed form has `c = v / λ` and `d = -(XᵀX)⁻¹ Xᵀ G v / λ`.
//! Columns evaluated at the knots are orthonormal.
//!
//! Coordinates are centred on the knot centroid and divided by the bounding
//! box extent before any kernel evaluation. The projected kernel only changes
//! by a positive factor under that map, so the basis is unaffected.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::BasisError;
use crate::geometry::{BoundingBox, Point};

/// Number of polynomial functions `{1, x, y}` heading every MRTS basis.
pub const POLY_DIM: usize = 3;

/// Thin-plate radial kernel without the `1/(8π)` factor.
#[inline]
pub fn thin_plate_kernel(r: f64) -> f64 {
    if r <= 0.0 {
        0.0
    } else {
        r * r * r.ln()
    }
}

/// Placement of knots over a site domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KnotLayout {
    /// `nx × ny` equally spaced inner knots over the bounding box.
    Grid { nx: usize, ny: usize },
    /// `⌈√n⌉ × ⌈√n⌉` inner grid for a target of `n` functions.
    Auto,
}

impl Default for KnotLayout {
    fn default() -> Self {
        KnotLayout::Auto
    }
}

impl KnotLayout {
    /// Grid dimensions for a basis of `size_target` functions.
    pub fn dims(&self, size_target: usize) -> (usize, usize) {
        match *self {
            KnotLayout::Grid { nx, ny } => (nx, ny),
            KnotLayout::Auto => {
                let m = (size_target.max(POLY_DIM) as f64).sqrt().ceil() as usize;
                (m, m)
            }
        }
    }

    /// Knots for `size_target` functions over the bounding box of `sites`.
    pub fn place(&self, sites: &[Point], size_target: usize) -> Result<Vec<Point>, BasisError> {
        let bb = BoundingBox::of(sites).ok_or(BasisError::NoSites)?;
        let (nx, ny) = self.dims(size_target);
        Ok(inner_grid(&bb, nx, ny))
    }
}

/// `nx × ny` equally spaced points strictly inside `bb`, row-major in y.
pub fn inner_grid(bb: &BoundingBox, nx: usize, ny: usize) -> Vec<Point> {
    let mut knots = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        let y = bb.min.y + bb.height() * (j + 1) as f64 / (ny + 1) as f64;
        for i in 0..nx {
            let x = bb.min.x + bb.width() * (i + 1) as f64 / (nx + 1) as f64;
            knots.push(Point::new(x, y));
        }
    }
    knots
}

/// A fitted, immutable MRTS basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MrtsBasis {
    knots: Vec<Point>,
    center: Point,
    scale: f64,
    /// Radial coefficients, one row of length `knots.len()` per function.
    /// Rows for the polynomial functions are all zero.
    radial: Vec<Vec<f64>>,
    /// Coefficients on `(1, u, v)` in normalized coordinates.
    poly: Vec<[f64; POLY_DIM]>,
    /// Eigenvalues of the projected kernel for functions `4..=size`, in
    /// normalized coordinates; nonincreasing.
    eigenvalues: Vec<f64>,
}

impl MrtsBasis {
    /// Fit a basis of `size` functions over `knots`.
    pub fn fit(knots: &[Point], size: usize) -> Result<Self, BasisError> {
        let n = knots.len();
        if size < POLY_DIM {
            return Err(BasisError::MrtsTooSmall { size });
        }
        if size > n {
            return Err(BasisError::TooFewKnots { size, knots: n });
        }
        let bb = BoundingBox::of(knots).ok_or(BasisError::NoSites)?;
        let scale = bb.width().max(bb.height());
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(BasisError::Collinear);
        }
        let center = Point::new(
            knots.iter().map(|k| k.x).sum::<f64>() / n as f64,
            knots.iter().map(|k| k.y).sum::<f64>() / n as f64,
        );
        let u: Vec<Point> = knots
            .iter()
            .map(|k| Point::new((k.x - center.x) / scale, (k.y - center.y) / scale))
            .collect();
        check_distinct(&u, knots)?;

        let x = DMatrix::from_fn(n, POLY_DIM, |i, c| poly_term(&u[i], c));
        let qr = x.clone().qr();
        let mut q1 = qr.q();
        let mut r = qr.r();
        // Positive diagonal makes the constant column +1/√n.
        for c in 0..POLY_DIM {
            if r[(c, c)] < 0.0 {
                for j in 0..POLY_DIM {
                    r[(c, j)] = -r[(c, j)];
                }
                for i in 0..n {
                    q1[(i, c)] = -q1[(i, c)];
                }
            }
        }
        let rmax = (0..POLY_DIM).map(|c| r[(c, c)].abs()).fold(0.0, f64::max);
        if (0..POLY_DIM).any(|c| r[(c, c)].abs() <= 1e-10 * rmax) {
            return Err(BasisError::Collinear);
        }
        let r_inv = r.try_inverse().ok_or(BasisError::Collinear)?;

        let g = DMatrix::from_fn(n, n, |i, j| thin_plate_kernel(u[i].distance(&u[j])));
        let proj = DMatrix::identity(n, n) - &q1 * q1.transpose();
        let mut a = &proj * &g * &proj;
        a = (&a + a.transpose()) * 0.5;
        let eig = SymmetricEigen::new(a);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| {
            eig.eigenvalues[j]
                .partial_cmp(&eig.eigenvalues[i])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(i.cmp(&j))
        });

        let mut radial = vec![vec![0.0; n]; POLY_DIM];
        let mut poly: Vec<[f64; POLY_DIM]> = (0..POLY_DIM)
            .map(|c| [r_inv[(0, c)], r_inv[(1, c)], r_inv[(2, c)]])
            .collect();
        let mut eigenvalues = Vec::with_capacity(size - POLY_DIM);
        let lead = eig.eigenvalues[order[0]].max(0.0);
        for &idx in order.iter().take(size - POLY_DIM) {
            let lambda = eig.eigenvalues[idx];
            if !(lambda > 1e-12 * lead) {
                return Err(BasisError::RankDeficient { size });
            }
            let mut v: DVector<f64> = eig.eigenvectors.column(idx).into_owned();
            normalize_sign(&mut v);
            let gv = &g * &v;
            let d = -(&r_inv * (q1.transpose() * gv)) / lambda;
            radial.push(v.iter().map(|vi| vi / lambda).collect());
            poly.push([d[0], d[1], d[2]]);
            eigenvalues.push(lambda);
        }

        Ok(Self {
            knots: knots.to_vec(),
            center,
            scale,
            radial,
            poly,
            eigenvalues,
        })
    }

    /// Fit over knots placed by `layout` on the bounding box of `sites`.
    pub fn fit_layout(sites: &[Point], size: usize, layout: KnotLayout) -> Result<Self, BasisError> {
        let knots = layout.place(sites, size)?;
        Self::fit(&knots, size)
    }

    pub fn size(&self) -> usize {
        self.radial.len()
    }

    pub fn knots(&self) -> &[Point] {
        &self.knots
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    fn normalize(&self, s: &Point) -> Point {
        Point::new((s.x - self.center.x) / self.scale, (s.y - self.center.y) / self.scale)
    }

    /// Evaluate the first `count` functions at `s`. Points outside the knot
    /// hull are extrapolated by the same formula.
    pub fn eval_prefix(&self, s: &Point, count: usize) -> Vec<f64> {
        let count = count.min(self.size());
        let u = self.normalize(s);
        let kernel: Vec<f64> = self
            .knots
            .iter()
            .map(|k| thin_plate_kernel(u.distance(&self.normalize(k))))
            .collect();
        (0..count)
            .map(|j| {
                let p = &self.poly[j];
                let mut acc = p[0] + p[1] * u.x + p[2] * u.y;
                if j >= POLY_DIM {
                    acc += self.radial[j]
                        .iter()
                        .zip(&kernel)
                        .map(|(c, g)| c * g)
                        .sum::<f64>();
                }
                acc
            })
            .collect()
    }

    /// Evaluate every function at `s`.
    pub fn eval(&self, s: &Point) -> Vec<f64> {
        self.eval_prefix(s, self.size())
    }

    /// Basis matrix at the knots (`n_knots × size`).
    pub fn knot_matrix(&self) -> DMatrix<f64> {
        self.matrix_at(&self.knots, self.size())
    }

    /// Matrix of the first `count` functions at each point.
    pub fn matrix_at(&self, points: &[Point], count: usize) -> DMatrix<f64> {
        let count = count.min(self.size());
        let mut m = DMatrix::zeros(points.len(), count);
        for (i, p) in points.iter().enumerate() {
            for (j, v) in self.eval_prefix(p, count).into_iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Value of the constant first function, `1/√n_knots`.
    pub fn constant_value(&self) -> f64 {
        self.poly[0][0]
    }
}

fn poly_term(u: &Point, c: usize) -> f64 {
    match c {
        0 => 1.0,
        1 => u.x,
        _ => u.y,
    }
}

fn check_distinct(normalized: &[Point], original: &[Point]) -> Result<(), BasisError> {
    let mut idx: Vec<usize> = (0..normalized.len()).collect();
    idx.sort_by(|&a, &b| {
        normalized[a]
            .x
            .total_cmp(&normalized[b].x)
            .then(normalized[a].y.total_cmp(&normalized[b].y))
    });
    for w in idx.windows(2) {
        if normalized[w[0]].distance(&normalized[w[1]]) <= 1e-12 {
            let p = original[w[1]];
            return Err(BasisError::DuplicateKnot { x: p.x, y: p.y });
        }
    }
    Ok(())
}

/// Flip `v` so that its largest-magnitude entry is positive.
fn normalize_sign(v: &mut DVector<f64>) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() + 1e-12 {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.neg_mut();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn gram_error(m: &DMatrix<f64>) -> f64 {
        let g = m.transpose() * m;
        (g - DMatrix::identity(m.ncols(), m.ncols())).abs().max()
    }

    fn corners() -> Vec<Point> {
        vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(0.0, 1.0),
            Point::new(1.0, 1.0),
        ]
    }

    #[test]
    fn unit_square_polynomial_block() {
        let basis = MrtsBasis::fit(&corners(), 3).unwrap();
        let b = basis.knot_matrix();
        assert!(gram_error(&b) < 1e-10);
        for i in 0..4 {
            assert_abs_diff_eq!(b[(i, 0)], 0.5, epsilon = 1e-12);
        }
        // Columns 2-3 span the centred coordinates.
        let xs = [-0.5, 0.5, -0.5, 0.5];
        let dot: f64 = (0..4).map(|i| b[(i, 1)] * xs[i]).sum();
        assert_abs_diff_eq!(dot.abs(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn knot_gram_identity_and_ordering_on_grid() {
        let bb = BoundingBox {
            min: Point::new(0.0, 0.0),
            max: Point::new(1000.0, 700.0),
        };
        let knots = inner_grid(&bb, 8, 5);
        assert_eq!(knots.len(), 40);
        let basis = MrtsBasis::fit(&knots, 40).unwrap();
        assert!(gram_error(&basis.knot_matrix()) < 1e-8);
        assert!(basis.eigenvalues().windows(2).all(|w| w[0] >= w[1]));
        assert!(basis.eigenvalues().iter().all(|l| *l > 0.0));
    }

    #[test]
    fn errors() {
        let mut k = corners();
        assert!(matches!(MrtsBasis::fit(&k, 5), Err(BasisError::TooFewKnots { .. })));
        assert!(matches!(MrtsBasis::fit(&k, 2), Err(BasisError::MrtsTooSmall { .. })));
        k.push(Point::new(1.0, 1.0));
        assert!(matches!(MrtsBasis::fit(&k, 3), Err(BasisError::DuplicateKnot { .. })));
        let line: Vec<Point> = (0..6).map(|i| Point::new(i as f64, 2.0 * i as f64)).collect();
        assert!(matches!(MrtsBasis::fit(&line, 3), Err(BasisError::Collinear)));
    }

    #[test]
    fn constant_function_value() {
        let basis = MrtsBasis::fit(&corners(), 4).unwrap();
        assert_abs_diff_eq!(basis.constant_value(), 0.5, epsilon = 1e-14);
        let v = basis.eval(&Point::new(17.0, -3.0));
        assert_abs_diff_eq!(v[0], 0.5, epsilon = 1e-14);
    }

    #[test]
    fn auto_layout_dims() {
        assert_eq!(KnotLayout::Auto.dims(10), (4, 4));
        assert_eq!(KnotLayout::Auto.dims(100), (10, 10));
        assert_eq!(KnotLayout::Auto.dims(1), (2, 2));
        assert_eq!(KnotLayout::Grid { nx: 8, ny: 5 }.dims(10), (8, 5));
    }
}
