//! Directional edge maps and gray-level co-occurrence statistics.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

use super::quantize;

pub const GLCM_LEVELS: usize = 16;

/// Offsets `(dx, dy)` used for every edge map: right, down, down-right, up-right.
pub const GLCM_OFFSETS: [(isize, isize); 4] = [(1, 0), (0, 1), (1, 1), (1, -1)];

/// Number of scalar statistics per co-occurrence matrix.
pub const GLCM_STAT_COUNT: usize = 6;

/// Absolute forward differences along four directions.
///
/// Each map is anchored at the top-left pixel of the pair:
/// horizontal `|p(r,c+1)-p(r,c)|`, vertical `|p(r+1,c)-p(r,c)|`,
/// diagonal `|p(r+1,c+1)-p(r,c)|`, anti-diagonal `|p(r+1,c)-p(r,c+1)|`.
/// Cells without a partner copy the nearest computed cell, so the final
/// row and/or column replicate the one before it.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeMaps {
    pub horizontal: Matrix<u8>,
    pub vertical: Matrix<u8>,
    pub diagonal: Matrix<u8>,
    pub anti_diagonal: Matrix<u8>,
}

impl EdgeMaps {
    pub fn as_array(&self) -> [&Matrix<u8>; 4] {
        [&self.horizontal, &self.vertical, &self.diagonal, &self.anti_diagonal]
    }
}

fn abs_diff(a: u8, b: u8) -> u8 {
    a.abs_diff(b)
}

pub fn edge_images(pixels: &Matrix<u8>) -> Result<EdgeMaps> {
    let (rows, cols) = pixels.shape();
    if rows < 2 || cols < 2 {
        return Err(Error::Shape(format!(
            "edge maps need at least 2x2 pixels, got {rows}x{cols}"
        )));
    }
    let p = |r: usize, c: usize| pixels[(r, c)];
    let horizontal = Matrix::from_fn(rows, cols, |r, c| {
        let c = c.min(cols - 2);
        abs_diff(p(r, c + 1), p(r, c))
    });
    let vertical = Matrix::from_fn(rows, cols, |r, c| {
        let r = r.min(rows - 2);
        abs_diff(p(r + 1, c), p(r, c))
    });
    let diagonal = Matrix::from_fn(rows, cols, |r, c| {
        let (r, c) = (r.min(rows - 2), c.min(cols - 2));
        abs_diff(p(r + 1, c + 1), p(r, c))
    });
    let anti_diagonal = Matrix::from_fn(rows, cols, |r, c| {
        let (r, c) = (r.min(rows - 2), c.min(cols - 2));
        abs_diff(p(r + 1, c), p(r, c + 1))
    });
    Ok(EdgeMaps {
        horizontal,
        vertical,
        diagonal,
        anti_diagonal,
    })
}

/// Directed (non-symmetric) co-occurrence matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Glcm<T> {
    pub levels: usize,
    pub offset: (isize, isize),
    /// `counts[(a, b)]`: pairs with value `a` at `p` and `b` at `p + offset`.
    pub counts: Matrix<u64>,
    pub normalized: Matrix<T>,
}

impl<T> Glcm<T> {
    pub fn total(&self) -> u64 {
        self.counts.as_slice().iter().sum()
    }
}

/// Counts pairs `(value(r, c), value(r + dy, c + dx))` with both ends in bounds.
pub fn glcm<T: Scalar>(matrix: &Matrix<u8>, levels: usize, offset: (isize, isize)) -> Result<Glcm<T>> {
    if levels < 2 {
        return Err(Error::InvalidParameter(format!("GLCM needs >= 2 levels, got {levels}")));
    }
    let (dx, dy) = offset;
    if dx == 0 && dy == 0 {
        return Err(Error::InvalidParameter("GLCM offset must be nonzero".into()));
    }
    let (rows, cols) = matrix.shape();
    if let Some(&bad) = matrix.as_slice().iter().find(|&&v| v as usize >= levels) {
        return Err(Error::Level {
            value: bad as usize,
            levels,
        });
    }
    let row_span = (rows as isize) - dy.abs();
    let col_span = (cols as isize) - dx.abs();
    if row_span <= 0 || col_span <= 0 {
        return Err(Error::EmptyPairs { dx, dy, rows, cols });
    }
    let r0 = (-dy).max(0) as usize;
    let c0 = (-dx).max(0) as usize;
    let mut counts = Matrix::filled(levels, levels, 0u64);
    for r in r0..r0 + row_span as usize {
        for c in c0..c0 + col_span as usize {
            let a = matrix[(r, c)] as usize;
            let b = matrix[((r as isize + dy) as usize, (c as isize + dx) as usize)] as usize;
            counts[(a, b)] += 1;
        }
    }
    let total: u64 = counts.as_slice().iter().sum();
    let norm = T::from_u64(total).unwrap();
    let normalized = counts.map(|&n| T::from_u64(n).unwrap() / norm);
    Ok(Glcm {
        levels,
        offset,
        counts,
        normalized,
    })
}

/// Haralick-style statistics of a normalized co-occurrence matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GlcmStats<T> {
    pub contrast: T,
    pub correlation: T,
    /// Angular second moment, `sum p^2`.
    pub energy: T,
    pub homogeneity: T,
    /// Natural-log entropy.
    pub entropy: T,
    pub dissimilarity: T,
}

impl<T: Scalar> GlcmStats<T> {
    pub fn to_array(self) -> [T; GLCM_STAT_COUNT] {
        [
            self.contrast,
            self.correlation,
            self.energy,
            self.homogeneity,
            self.entropy,
            self.dissimilarity,
        ]
    }
}

/// Correlation is 0 when either marginal has zero variance.
pub fn glcm_stats<T: Scalar>(p: &Matrix<T>) -> GlcmStats<T> {
    let n = p.rows();
    let idx = |i: usize| T::from_usize_lossy(i);
    let (mut mu_i, mut mu_j) = (T::zero(), T::zero());
    for i in 0..n {
        for j in 0..n {
            mu_i += idx(i) * p[(i, j)];
            mu_j += idx(j) * p[(i, j)];
        }
    }
    let mut s = GlcmStats {
        contrast: T::zero(),
        correlation: T::zero(),
        energy: T::zero(),
        homogeneity: T::zero(),
        entropy: T::zero(),
        dissimilarity: T::zero(),
    };
    let (mut var_i, mut var_j, mut cov) = (T::zero(), T::zero(), T::zero());
    for i in 0..n {
        for j in 0..n {
            let v = p[(i, j)];
            if v == T::zero() {
                continue;
            }
            let d = idx(i) - idx(j);
            s.contrast += d * d * v;
            s.dissimilarity += d.abs() * v;
            s.homogeneity += v / (T::one() + d * d);
            s.energy += v * v;
            s.entropy -= v * v.ln();
            let (di, dj) = (idx(i) - mu_i, idx(j) - mu_j);
            var_i += di * di * v;
            var_j += dj * dj * v;
            cov += di * dj * v;
        }
    }
    let denom = (var_i * var_j).sqrt();
    if denom > T::zero() {
        s.correlation = cov / denom;
    }
    // -0.0 from a single occupied cell
    s.entropy = s.entropy.max(T::zero());
    s
}

pub fn glcm_edge_arity() -> usize {
    4 * GLCM_OFFSETS.len() * GLCM_STAT_COUNT
}

/// For each edge map (horizontal, vertical, diagonal, anti-diagonal) quantized
/// to 16 levels, for each offset in [`GLCM_OFFSETS`], the six statistics in
/// [`GlcmStats::to_array`] order.
pub fn glcm_edge_statistics<T: Scalar>(pixels: &Matrix<u8>) -> Result<Vec<T>> {
    let maps = edge_images(pixels)?;
    let mut out = Vec::with_capacity(glcm_edge_arity());
    for map in maps.as_array() {
        let q = quantize(map, GLCM_LEVELS);
        for offset in GLCM_OFFSETS {
            let g = glcm::<T>(&q, GLCM_LEVELS, offset)?;
            out.extend(glcm_stats(&g.normalized).to_array());
        }
    }
    Ok(out)
}
