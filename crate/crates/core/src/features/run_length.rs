//! Gray-level run-length matrices and their classical statistics.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

use super::glcm::edge_images;
use super::quantize;

pub const RUN_LENGTH_LEVELS: usize = 16;
pub const RUN_STAT_COUNT: usize = 11;
pub const HISTOGRAM_AGGREGATES: usize = 11;
pub const HISTOGRAM_MOMENTS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    /// Along rows, left to right.
    Deg0,
    /// Along anti-diagonals (`r + c` constant), bottom-left to top-right.
    Deg45,
    /// Along columns, top to bottom.
    Deg90,
    /// Along diagonals (`c - r` constant), top-left to bottom-right.
    Deg135,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::Deg0, Direction::Deg45, Direction::Deg90, Direction::Deg135];

    /// Pixel coordinates of every scan line, in traversal order.
    pub fn scan_lines(self, rows: usize, cols: usize) -> Vec<Vec<(usize, usize)>> {
        match self {
            Direction::Deg0 => (0..rows).map(|r| (0..cols).map(|c| (r, c)).collect()).collect(),
            Direction::Deg90 => (0..cols).map(|c| (0..rows).map(|r| (r, c)).collect()).collect(),
            Direction::Deg45 => (0..rows + cols - 1)
                .map(|s| {
                    (0..rows)
                        .rev()
                        .filter_map(|r| s.checked_sub(r).filter(|&c| c < cols).map(|c| (r, c)))
                        .collect()
                })
                .collect(),
            Direction::Deg135 => (0..rows + cols - 1)
                .map(|k| {
                    // c - r = k - (rows - 1)
                    let shift = k as isize - (rows as isize - 1);
                    (0..rows)
                        .filter_map(|r| {
                            let c = r as isize + shift;
                            (c >= 0 && (c as usize) < cols).then_some((r, c as usize))
                        })
                        .collect()
                })
                .collect(),
        }
    }
}

/// `counts[(g, l - 1)]` is the number of maximal runs of level `g` and length `l`.
#[derive(Clone, Debug, PartialEq)]
pub struct RunLengthMatrix {
    pub levels: usize,
    pub direction: Direction,
    pub counts: Matrix<u64>,
}

impl RunLengthMatrix {
    pub fn max_run(&self) -> usize {
        self.counts.cols()
    }

    pub fn get(&self, level: usize, length: usize) -> u64 {
        if length == 0 {
            return 0;
        }
        self.counts.get(level, length - 1).copied().unwrap_or(0)
    }

    pub fn total_runs(&self) -> u64 {
        self.counts.as_slice().iter().sum()
    }

    /// Sum of `l * r(g, l)`; equals the pixel count.
    pub fn covered_pixels(&self) -> u64 {
        let mut total = 0;
        for g in 0..self.levels {
            for l in 1..=self.max_run() {
                total += l as u64 * self.get(g, l);
            }
        }
        total
    }

    /// Runs of each length, summed over gray levels.
    pub fn length_histogram(&self) -> Vec<u64> {
        (1..=self.max_run())
            .map(|l| (0..self.levels).map(|g| self.get(g, l)).sum())
            .collect()
    }
}

pub fn run_length_matrix(matrix: &Matrix<u8>, levels: usize, direction: Direction) -> Result<RunLengthMatrix> {
    if levels == 0 {
        return Err(Error::InvalidParameter("run-length matrix needs >= 1 level".into()));
    }
    if let Some(&bad) = matrix.as_slice().iter().find(|&&v| v as usize >= levels) {
        return Err(Error::Level {
            value: bad as usize,
            levels,
        });
    }
    let (rows, cols) = matrix.shape();
    let max_run = rows.max(cols).max(1);
    let mut counts = Matrix::filled(levels, max_run, 0u64);
    if rows == 0 || cols == 0 {
        return Ok(RunLengthMatrix {
            levels,
            direction,
            counts,
        });
    }
    for line in direction.scan_lines(rows, cols) {
        let mut iter = line.iter().map(|&rc| matrix[rc]);
        let Some(mut current) = iter.next() else { continue };
        let mut len = 1usize;
        for v in iter {
            if v == current {
                len += 1;
            } else {
                counts[(current as usize, len - 1)] += 1;
                current = v;
                len = 1;
            }
        }
        counts[(current as usize, len - 1)] += 1;
    }
    Ok(RunLengthMatrix {
        levels,
        direction,
        counts,
    })
}

/// The eleven classical statistics, in this order: SRE, LRE, GLN, RLN, RP,
/// LGRE, HGRE, SRLGE, SRHGE, LRLGE, LRHGE.
///
/// Gray levels are weighted as `g + 1` so level 0 stays usable in the
/// low-gray-level emphases. Every statistic is 0 when there are no runs.
pub fn run_length_stats<T: Scalar>(m: &RunLengthMatrix, pixel_count: usize) -> [T; RUN_STAT_COUNT] {
    let total = m.total_runs();
    let mut out = [T::zero(); RUN_STAT_COUNT];
    if total == 0 || pixel_count == 0 {
        return out;
    }
    let nr = T::from_u64(total).unwrap();
    let mut level_sums = vec![T::zero(); m.levels];
    let mut length_sums = vec![T::zero(); m.max_run()];
    for (g, level_sum) in level_sums.iter_mut().enumerate() {
        let i = T::from_usize_lossy(g + 1);
        let i2 = i * i;
        for l in 1..=m.max_run() {
            let count = m.get(g, l);
            if count == 0 {
                continue;
            }
            let r = T::from_u64(count).unwrap();
            let lf = T::from_usize_lossy(l);
            let l2 = lf * lf;
            out[0] += r / l2;
            out[1] += r * l2;
            out[5] += r / i2;
            out[6] += r * i2;
            out[7] += r / (i2 * l2);
            out[8] += r * i2 / l2;
            out[9] += r * l2 / i2;
            out[10] += r * i2 * l2;
            *level_sum += r;
            length_sums[l - 1] += r;
        }
    }
    out[2] = level_sums.iter().map(|&s| s * s).sum();
    out[3] = length_sums.iter().map(|&s| s * s).sum();
    for (k, v) in out.iter_mut().enumerate() {
        if k != 4 {
            *v /= nr;
        }
    }
    out[4] = nr / T::from_usize_lossy(pixel_count);
    out
}

/// Mean, variance, skewness and kurtosis of run length under a histogram.
///
/// Skewness and kurtosis are standardized moments; both are 0 when the
/// variance is 0, and all four are 0 for an empty histogram.
pub fn histogram_moments<T: Scalar>(hist: &[u64]) -> [T; HISTOGRAM_MOMENTS] {
    let total: u64 = hist.iter().sum();
    if total == 0 {
        return [T::zero(); HISTOGRAM_MOMENTS];
    }
    let n = T::from_u64(total).unwrap();
    let weighted = || {
        hist.iter()
            .enumerate()
            .filter(|(_, &h)| h > 0)
            .map(|(i, &h)| (T::from_usize_lossy(i + 1), T::from_u64(h).unwrap()))
    };
    let mean = weighted().map(|(l, w)| l * w).sum::<T>() / n;
    let central = |p: i32| weighted().map(|(l, w)| (l - mean).powi(p) * w).sum::<T>() / n;
    let var = central(2);
    if var <= T::zero() {
        return [mean, T::zero(), T::zero(), T::zero()];
    }
    let sd = var.sqrt();
    [mean, var, central(3) / (sd * var), central(4) / (var * var)]
}

pub fn run_length_arity() -> usize {
    4 * Direction::ALL.len() * RUN_STAT_COUNT + HISTOGRAM_AGGREGATES * HISTOGRAM_MOMENTS
}

/// Run-length descriptor of a block.
///
/// Sources, in order: the 16-level quantized image, then its horizontal,
/// vertical and diagonal absolute-difference images (same quantization).
/// For each source and each direction in [`Direction::ALL`] the eleven
/// [`run_length_stats`] follow. The tail holds [`histogram_moments`] of
/// eleven aggregated run-length histograms:
/// each source summed over directions (4), each direction summed over
/// sources (4), the axis-aligned directions of all sources, the diagonal
/// directions of all sources, and everything.
pub fn run_length_statistics<T: Scalar>(pixels: &Matrix<u8>) -> Result<Vec<T>> {
    let edges = edge_images(pixels)?;
    let sources = [
        quantize(pixels, RUN_LENGTH_LEVELS),
        quantize(&edges.horizontal, RUN_LENGTH_LEVELS),
        quantize(&edges.vertical, RUN_LENGTH_LEVELS),
        quantize(&edges.diagonal, RUN_LENGTH_LEVELS),
    ];
    let pixel_count = pixels.rows() * pixels.cols();
    let max_run = pixels.rows().max(pixels.cols());
    let mut out = Vec::with_capacity(run_length_arity());
    // hists[source][direction]
    let mut hists = vec![vec![Vec::new(); Direction::ALL.len()]; sources.len()];
    for (s, src) in sources.iter().enumerate() {
        for (d, &dir) in Direction::ALL.iter().enumerate() {
            let m = run_length_matrix(src, RUN_LENGTH_LEVELS, dir)?;
            out.extend(run_length_stats::<T>(&m, pixel_count));
            hists[s][d] = m.length_histogram();
        }
    }
    let sum_of = |cells: &[(usize, usize)]| {
        let mut acc = vec![0u64; max_run];
        for &(s, d) in cells {
            for (a, v) in acc.iter_mut().zip(&hists[s][d]) {
                *a += v;
            }
        }
        acc
    };
    let all_cells: Vec<(usize, usize)> = (0..4).flat_map(|s| (0..4).map(move |d| (s, d))).collect();
    let mut aggregates = Vec::with_capacity(HISTOGRAM_AGGREGATES);
    for s in 0..4 {
        aggregates.push(sum_of(&(0..4).map(|d| (s, d)).collect::<Vec<_>>()));
    }
    for d in 0..4 {
        aggregates.push(sum_of(&(0..4).map(|s| (s, d)).collect::<Vec<_>>()));
    }
    // Direction::ALL order is 0, 45, 90, 135
    let axis: Vec<_> = all_cells.iter().copied().filter(|&(_, d)| d % 2 == 0).collect();
    let diag: Vec<_> = all_cells.iter().copied().filter(|&(_, d)| d % 2 == 1).collect();
    aggregates.push(sum_of(&axis));
    aggregates.push(sum_of(&diag));
    aggregates.push(sum_of(&all_cells));
    for h in &aggregates {
        out.extend(histogram_moments::<T>(h));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_row_example() {
        let m = Matrix::from_rows(vec![vec![1u8, 1, 2, 2, 2]]).unwrap();
        let r = run_length_matrix(&m, 3, Direction::Deg0).unwrap();
        assert_eq!(r.get(1, 2), 1);
        assert_eq!(r.get(2, 3), 1);
        assert_eq!(r.total_runs(), 2);
    }

    #[test]
    fn constant_block_rows_are_single_runs() {
        let m = Matrix::filled(128, 128, 9u8);
        let r = run_length_matrix(&m, 16, Direction::Deg0).unwrap();
        assert_eq!(r.get(9, 128), 128);
        assert_eq!(r.total_runs(), 128);
        assert_eq!(r.covered_pixels(), 16384);
    }

    #[test]
    fn scan_lines_cover_every_pixel_once() {
        for dir in Direction::ALL {
            let lines = dir.scan_lines(3, 5);
            let mut seen: Vec<_> = lines.into_iter().flatten().collect();
            seen.sort();
            seen.dedup();
            assert_eq!(seen.len(), 15, "{dir:?}");
        }
    }

    #[test]
    fn diagonal_directions_follow_their_lines() {
        let lines = Direction::Deg45.scan_lines(2, 2);
        assert_eq!(lines, vec![vec![(0, 0)], vec![(1, 0), (0, 1)], vec![(1, 1)]]);
        let lines = Direction::Deg135.scan_lines(2, 2);
        assert_eq!(lines, vec![vec![(1, 0)], vec![(0, 0), (1, 1)], vec![(0, 1)]]);
    }

    #[test]
    fn out_of_range_level_rejected() {
        let m = Matrix::filled(2, 2, 4u8);
        assert!(run_length_matrix(&m, 4, Direction::Deg0).is_err());
    }

    #[test]
    fn empty_matrix_has_zero_stats() {
        let m = RunLengthMatrix {
            levels: 2,
            direction: Direction::Deg0,
            counts: Matrix::filled(2, 3, 0),
        };
        assert_eq!(run_length_stats::<f64>(&m, 0), [0.0; RUN_STAT_COUNT]);
    }

    #[test]
    fn moments_of_point_mass() {
        let m = histogram_moments::<f64>(&[0, 0, 5]);
        assert_eq!(m, [3.0, 0.0, 0.0, 0.0]);
        assert_eq!(histogram_moments::<f64>(&[0, 0]), [0.0; 4]);
    }

    #[test]
    fn moments_of_symmetric_histogram() {
        let m = histogram_moments::<f64>(&[1, 0, 1]);
        assert_eq!(m[0], 2.0);
        assert_eq!(m[1], 1.0);
        assert_eq!(m[2], 0.0);
        assert_eq!(m[3], 1.0);
    }
}
