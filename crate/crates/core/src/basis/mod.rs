//! Temporal (Fourier) and spatial (MRTS) basis families.

mod fourier;
mod mrts;

use std::io::Write;

use thiserror::Error;

pub use fourier::{check_grid, day_to_time, uniform_grid, FourierBasis};
pub use mrts::{inner_grid, thin_plate_kernel, KnotLayout, MrtsBasis, POLY_DIM};

use crate::geometry::Point;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum BasisError {
    #[error("basis must contain at least one function")]
    EmptyBasis,
    #[error("basis function index {index} is outside 1..={size}")]
    IndexOutOfRange { index: usize, size: usize },
    #[error("time {0} lies outside the domain [0, 1]")]
    OutsideDomain(f64),
    #[error("evaluation grid is empty")]
    EmptyGrid,
    #[error("evaluation grid is not strictly ascending at position {position}")]
    UnsortedGrid { position: usize },
    #[error("MRTS basis needs at least {} functions, got {size}", POLY_DIM)]
    MrtsTooSmall { size: usize },
    #[error("MRTS basis of size {size} needs at least as many knots, got {knots}")]
    TooFewKnots { size: usize, knots: usize },
    #[error("duplicate knot at ({x}, {y})")]
    DuplicateKnot { x: f64, y: f64 },
    #[error("knots are collinear; the polynomial block {{1, x, y}} is rank deficient")]
    Collinear,
    #[error("projected thin-plate kernel has fewer than {size} usable eigenvalues")]
    RankDeficient { size: usize },
    #[error("no sites to place knots over")]
    NoSites,
}

/// Write Fourier basis values on `grid` as CSV: `t, f1, f2, ...`.
pub fn dump_fourier<W: Write>(basis: &FourierBasis, grid: &[f64], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((1..=basis.size()).map(|m| format!("f{m}")));
    w.write_record(&header)?;
    for &t in grid {
        let mut row = vec![t.to_string()];
        row.extend((0..basis.size()).map(|m| basis.eval_unchecked(m, t).to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Write the first `count` MRTS functions at `points` as CSV:
/// `x, y, phi1, phi2, ...`.
pub fn dump_mrts<W: Write>(basis: &MrtsBasis, points: &[Point], count: usize, out: W) -> csv::Result<()> {
    let count = count.min(basis.size());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["x".to_string(), "y".to_string()];
    header.extend((1..=count).map(|h| format!("phi{h}")));
    w.write_record(&header)?;
    for p in points {
        let mut row = vec![p.x.to_string(), p.y.to_string()];
        row.extend(basis.eval_prefix(p, count).iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
