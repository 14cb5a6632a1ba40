//! Orthonormal 2-D Haar pyramid and subband magnitude statistics.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Subbands produced by one analysis step.
///
/// For each 2x2 cell `[[a, b], [c, d]]`:
/// `ll = (a+b+c+d)/2`, `lh = (a+b-c-d)/2`, `hl = (a-b+c-d)/2`, `hh = (a-b-c+d)/2`.
#[derive(Clone, Debug, PartialEq)]
pub struct HaarLevel<T> {
    pub ll: Matrix<T>,
    pub lh: Matrix<T>,
    pub hl: Matrix<T>,
    pub hh: Matrix<T>,
}

/// `levels[0]` is the finest level. Every level keeps its approximation
/// band; the deepest one is the pyramid's LL.
#[derive(Clone, Debug, PartialEq)]
pub struct HaarPyramid<T> {
    pub levels: Vec<HaarLevel<T>>,
}

impl<T: Scalar> HaarPyramid<T> {
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// Coefficients of the non-redundant representation: deepest LL plus all details.
    pub fn coefficient_count(&self) -> usize {
        let details: usize = self
            .levels
            .iter()
            .map(|l| l.lh.as_slice().len() + l.hl.as_slice().len() + l.hh.as_slice().len())
            .sum();
        details + self.levels.last().map_or(0, |l| l.ll.as_slice().len())
    }
}

fn analysis_step<T: Scalar>(m: &Matrix<T>) -> HaarLevel<T> {
    let half = T::lit(0.5);
    let (rows, cols) = (m.rows() / 2, m.cols() / 2);
    let cell = |r: usize, c: usize| {
        (
            m[(2 * r, 2 * c)],
            m[(2 * r, 2 * c + 1)],
            m[(2 * r + 1, 2 * c)],
            m[(2 * r + 1, 2 * c + 1)],
        )
    };
    HaarLevel {
        ll: Matrix::from_fn(rows, cols, |r, c| {
            let (a, b, x, d) = cell(r, c);
            (a + b + x + d) * half
        }),
        lh: Matrix::from_fn(rows, cols, |r, c| {
            let (a, b, x, d) = cell(r, c);
            (a + b - x - d) * half
        }),
        hl: Matrix::from_fn(rows, cols, |r, c| {
            let (a, b, x, d) = cell(r, c);
            (a - b + x - d) * half
        }),
        hh: Matrix::from_fn(rows, cols, |r, c| {
            let (a, b, x, d) = cell(r, c);
            (a - b - x + d) * half
        }),
    }
}

fn synthesis_step<T: Scalar>(ll: &Matrix<T>, lh: &Matrix<T>, hl: &Matrix<T>, hh: &Matrix<T>) -> Matrix<T> {
    let half = T::lit(0.5);
    let mut out = Matrix::filled(ll.rows() * 2, ll.cols() * 2, T::zero());
    for r in 0..ll.rows() {
        for c in 0..ll.cols() {
            let (s, v, h, d) = (ll[(r, c)], lh[(r, c)], hl[(r, c)], hh[(r, c)]);
            out[(2 * r, 2 * c)] = (s + v + h + d) * half;
            out[(2 * r, 2 * c + 1)] = (s + v - h - d) * half;
            out[(2 * r + 1, 2 * c)] = (s - v + h - d) * half;
            out[(2 * r + 1, 2 * c + 1)] = (s - v - h + d) * half;
        }
    }
    out
}

/// Multi-level orthonormal Haar analysis.
pub fn haar_dwt2<T: Scalar>(m: &Matrix<T>, levels: usize) -> Result<HaarPyramid<T>> {
    if levels == 0 {
        return Err(Error::Shape("at least one decomposition level is required".into()));
    }
    let block = 1usize << levels;
    if m.rows() == 0 || !m.rows().is_multiple_of(block) || !m.cols().is_multiple_of(block) {
        return Err(Error::Shape(format!(
            "{}x{} is not divisible by 2^{levels}",
            m.rows(),
            m.cols()
        )));
    }
    let mut out = Vec::with_capacity(levels);
    let mut current = m.clone();
    for _ in 0..levels {
        let level = analysis_step(&current);
        current = level.ll.clone();
        out.push(level);
    }
    Ok(HaarPyramid { levels: out })
}

/// Inverse transform from the deepest LL and the detail bands.
pub fn haar_idwt2<T: Scalar>(p: &HaarPyramid<T>) -> Result<Matrix<T>> {
    let deepest = p.levels.last().ok_or_else(|| Error::Shape("empty pyramid".into()))?;
    let mut current = deepest.ll.clone();
    for level in p.levels.iter().rev() {
        if current.shape() != level.lh.shape() {
            return Err(Error::Shape("inconsistent subband sizes".into()));
        }
        current = synthesis_step(&current, &level.lh, &level.hl, &level.hh);
    }
    Ok(current)
}

/// Pixel minus the mean of its 4-neighbours, with replicated borders.
pub fn prediction_error<T: Scalar>(pixels: &Matrix<u8>) -> Matrix<T> {
    let (rows, cols) = pixels.shape();
    let at = |r: isize, c: isize| {
        let r = r.clamp(0, rows as isize - 1) as usize;
        let c = c.clamp(0, cols as isize - 1) as usize;
        T::from_u8(pixels[(r, c)]).unwrap()
    };
    let quarter = T::lit(0.25);
    Matrix::from_fn(rows, cols, |r, c| {
        let (r, c) = (r as isize, c as isize);
        at(r, c) - (at(r - 1, c) + at(r + 1, c) + at(r, c - 1) + at(r, c + 1)) * quarter
    })
}

/// Mean and population standard deviation of |coefficient|.
pub fn magnitude_stats<T: Scalar>(band: &Matrix<T>) -> (T, T) {
    let values = band.as_slice();
    if values.is_empty() {
        return (T::zero(), T::zero());
    }
    let n = T::from_usize_lossy(values.len());
    let mean = values.iter().map(|v| v.abs()).sum::<T>() / n;
    let var = values
        .iter()
        .map(|v| {
            let d = v.abs() - mean;
            d * d
        })
        .sum::<T>()
        / n;
    (mean, var.sqrt())
}

/// Number of values produced by [`wavelet_statistics`] for a pyramid depth.
pub fn wavelet_arity(levels: usize) -> usize {
    16 * levels
}

/// Subband statistics of the pixel image followed by those of its
/// prediction-error image.
///
/// Per image, for level j = 1..=levels in order, subbands LL_j, LH_j, HL_j,
/// HH_j each contribute (mean |c|, std |c|).
pub fn wavelet_statistics<T: Scalar>(pixels: &Matrix<u8>, levels: usize) -> Result<Vec<T>> {
    let source: Matrix<T> = pixels.map(|&p| T::from_u8(p).unwrap());
    let residual = prediction_error::<T>(pixels);
    let mut out = Vec::with_capacity(wavelet_arity(levels));
    for image in [&source, &residual] {
        let pyramid = haar_dwt2(image, levels)?;
        for level in &pyramid.levels {
            for band in [&level.ll, &level.lh, &level.hl, &level.hh] {
                let (mean, std) = magnitude_stats(band);
                out.push(mean);
                out.push(std);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_matrix_has_zero_detail() {
        let m = Matrix::filled(4, 4, 8.0f64);
        let p = haar_dwt2(&m, 1).unwrap();
        let l = &p.levels[0];
        assert!(l.ll.as_slice().iter().all(|&v| v == 16.0));
        for band in [&l.lh, &l.hl, &l.hh] {
            assert!(band.as_slice().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn block_sized_pyramid_preserves_count() {
        let m = Matrix::from_fn(128, 128, |r, c| ((r * 7 + c * 13) % 256) as f64);
        let p = haar_dwt2(&m, 3).unwrap();
        assert_eq!(p.coefficient_count(), 128 * 128);
    }

    #[test]
    fn indivisible_shape_is_rejected() {
        let m = Matrix::filled(12, 12, 0.0f64);
        assert!(haar_dwt2(&m, 3).is_err());
        assert!(haar_dwt2(&m, 2).is_ok());
    }

    #[test]
    fn energy_is_preserved() {
        let m = Matrix::from_fn(8, 8, |r, c| ((r * 31 + c * 17) % 11) as f64 - 5.0);
        let p = haar_dwt2(&m, 2).unwrap();
        let energy = |x: &Matrix<f64>| x.as_slice().iter().map(|v| v * v).sum::<f64>();
        let mut total = energy(&p.levels[1].ll);
        for l in &p.levels {
            total += energy(&l.lh) + energy(&l.hl) + energy(&l.hh);
        }
        assert!((total - energy(&m)).abs() < 1e-9);
    }

    #[test]
    fn prediction_error_of_constant_is_zero() {
        let px = Matrix::filled(6, 6, 100u8);
        let e = prediction_error::<f64>(&px);
        assert!(e.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn works_in_single_precision() {
        let px = Matrix::from_fn(8, 8, |r, c| (r * 8 + c) as u8);
        let stats = wavelet_statistics::<f32>(&px, 2).unwrap();
        assert_eq!(stats.len(), wavelet_arity(2));
        assert!(stats.iter().all(|v| v.is_finite()));
    }
}
