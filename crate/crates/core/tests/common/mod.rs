//! Brute-force reference implementations shared by the integration tests.
//! None of these call into the library's numeric code.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use splicefuse::anfis::AnfisModel;
use splicefuse::Label;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_levels(rng: &mut impl Rng, rows: usize, cols: usize, levels: u8) -> Vec<Vec<u8>> {
    (0..rows)
        .map(|_| (0..cols).map(|_| rng.gen_range(0..levels)).collect())
        .collect()
}

/// Co-occurrence counts by enumerating every ordered pixel pair.
pub fn brute_glcm(m: &[Vec<u8>], levels: usize, (dx, dy): (isize, isize)) -> Vec<Vec<u64>> {
    let mut out = vec![vec![0u64; levels]; levels];
    let (rows, cols) = (m.len() as isize, m[0].len() as isize);
    for r1 in 0..rows {
        for c1 in 0..cols {
            for r2 in 0..rows {
                for c2 in 0..cols {
                    if r2 - r1 == dy && c2 - c1 == dx {
                        out[m[r1 as usize][c1 as usize] as usize][m[r2 as usize][c2 as usize] as usize] += 1;
                    }
                }
            }
        }
    }
    out
}

/// Run counts `[level][length - 1]`: a run starts wherever the previous pixel
/// along `step` is outside the image or differs, and is walked to its end.
pub fn brute_runs(m: &[Vec<u8>], levels: usize, (dr, dc): (isize, isize)) -> Vec<Vec<u64>> {
    let (rows, cols) = (m.len() as isize, m[0].len() as isize);
    let max_run = rows.max(cols) as usize;
    let mut out = vec![vec![0u64; max_run]; levels];
    let inside = |r: isize, c: isize| r >= 0 && c >= 0 && r < rows && c < cols;
    let at = |r: isize, c: isize| m[r as usize][c as usize];
    for r in 0..rows {
        for c in 0..cols {
            let v = at(r, c);
            let (pr, pc) = (r - dr, c - dc);
            if inside(pr, pc) && at(pr, pc) == v {
                continue;
            }
            let mut len = 0;
            let (mut cr, mut cc) = (r, c);
            while inside(cr, cc) && at(cr, cc) == v {
                len += 1;
                cr += dr;
                cc += dc;
            }
            out[v as usize][len - 1] += 1;
        }
    }
    out
}

/// Orthonormal Haar analysis matrix: averages in the top half, differences
/// in the bottom half.
fn haar_matrix(n: usize) -> Vec<Vec<f64>> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut w = vec![vec![0.0; n]; n];
    for i in 0..n / 2 {
        w[i][2 * i] = s;
        w[i][2 * i + 1] = s;
        w[n / 2 + i][2 * i] = s;
        w[n / 2 + i][2 * i + 1] = -s;
    }
    w
}

fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    (0..n)
        .map(|i| (0..m).map(|j| (0..k).map(|t| a[i][t] * b[t][j]).sum()).collect())
        .collect()
}

fn transpose(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..a[0].len()).map(|j| a.iter().map(|row| row[j]).collect()).collect()
}

fn quadrant(y: &[Vec<f64>], top: bool, left: bool) -> Vec<Vec<f64>> {
    let (h, w) = (y.len() / 2, y[0].len() / 2);
    let (r0, c0) = (if top { 0 } else { h }, if left { 0 } else { w });
    (r0..r0 + h).map(|r| y[r][c0..c0 + w].to_vec()).collect()
}

/// Per level `[LL, LH, HL, HH]`, where LH is low-pass along rows and
/// high-pass along columns, computed as `W_r X W_c^T`.
pub fn haar_oracle(x: &[Vec<f64>], levels: usize) -> Vec<[Vec<Vec<f64>>; 4]> {
    let mut out = Vec::new();
    let mut current = x.to_vec();
    for _ in 0..levels {
        let wr = haar_matrix(current.len());
        let wc = haar_matrix(current[0].len());
        let y = matmul(&matmul(&wr, &current), &transpose(&wc));
        let ll = quadrant(&y, true, true);
        out.push([
            ll.clone(),
            quadrant(&y, false, true),
            quadrant(&y, true, false),
            quadrant(&y, false, false),
        ]);
        current = ll;
    }
    out
}

/// Layer-by-layer neuro-fuzzy evaluation: memberships, product firing,
/// normalization, weighted consequents, sum.
pub fn naive_fis(model: &AnfisModel<f64>, x: &[f64]) -> f64 {
    let memberships: Vec<Vec<f64>> = model
        .rules
        .iter()
        .map(|r| {
            r.premises
                .iter()
                .zip(x)
                .map(|(mf, &v)| (-(v - mf.center).powi(2) / (2.0 * mf.sigma * mf.sigma)).exp())
                .collect()
        })
        .collect();
    let firing: Vec<f64> = memberships.iter().map(|m| m.iter().product()).collect();
    let total: f64 = firing.iter().sum();
    let normalized: Vec<f64> = firing.iter().map(|w| w / total).collect();
    let outputs: Vec<f64> = model
        .rules
        .iter()
        .map(|r| {
            let mut o = r.consequent[0];
            for (p, v) in r.consequent.iter().skip(1).zip(x) {
                o += p * v;
            }
            o
        })
        .collect();
    normalized.iter().zip(&outputs).map(|(w, o)| w * o).sum()
}

pub fn naive_rmse(model: &AnfisModel<f64>, xs: &[Vec<f64>], targets: &[f64]) -> f64 {
    let sse: f64 = xs
        .iter()
        .zip(targets)
        .map(|(x, t)| (naive_fis(model, x) - t).powi(2))
        .sum();
    (sse / targets.len() as f64).sqrt()
}

/// Platt cross-entropy written directly from the definition.
pub fn platt_loss_oracle(values: &[f64], labels: &[Label], a: f64, b: f64) -> f64 {
    let pos = labels.iter().filter(|&&l| l == Label::Authentic).count() as f64;
    let neg = labels.len() as f64 - pos;
    let (hi, lo) = ((pos + 1.0) / (pos + 2.0), 1.0 / (neg + 2.0));
    values
        .iter()
        .zip(labels)
        .map(|(&f, &l)| {
            let t = if l == Label::Authentic { hi } else { lo };
            let z = a * f + b;
            // -(t ln p + (1 - t) ln(1 - p)) with p = 1 / (1 + e^z)
            let ln_p = -(z.max(0.0) + (-z.abs()).exp().ln_1p());
            let ln_q = z + ln_p;
            -(t * ln_p + (1.0 - t) * ln_q)
        })
        .sum()
}

pub fn rbf(x: &[f64], z: &[f64], gamma: f64) -> f64 {
    (-gamma * x.iter().zip(z).map(|(a, b)| (a - b).powi(2)).sum::<f64>()).exp()
}

/// Dual objective `sum a - 1/2 sum_ij a_i a_j y_i y_j K_ij`.
pub fn dual_value(k: &[Vec<f64>], y: &[f64], a: &[f64]) -> f64 {
    let n = a.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += a[i] * a[j] * y[i] * y[j] * k[i][j];
        }
    }
    a.iter().sum::<f64>() - 0.5 * quad
}

/// Euclidean projection onto `{0 <= a <= C, y^T a = 0}`: bisection on the
/// multiplier of the equality constraint.
fn project(z: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let at = |lambda: f64| -> Vec<f64> {
        z.iter()
            .zip(y)
            .map(|(&v, &yi)| (v - lambda * yi).clamp(0.0, c))
            .collect()
    };
    let balance = |a: &[f64]| a.iter().zip(y).map(|(ai, yi)| ai * yi).sum::<f64>();
    let bound = z.iter().map(|v| v.abs()).fold(0.0, f64::max) + c + 1.0;
    let (mut lo, mut hi) = (-bound, bound);
    // balance(at(lambda)) is non-increasing in lambda
    for _ in 0..100 {
        if hi - lo < 1e-15 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if balance(&at(mid)) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

/// Accelerated projected gradient ascent on the SVM dual, restarting the
/// momentum whenever it points against the last step.
pub fn qp_oracle(k: &[Vec<f64>], y: &[f64], c: f64) -> Vec<f64> {
    let n = y.len();
    let q: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| y[i] * y[j] * k[i][j]).collect())
        .collect();
    // Gershgorin bound on the largest eigenvalue
    let lipschitz = q
        .iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let step = 1.0 / lipschitz;
    let grad = |a: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| 1.0 - (0..n).map(|j| q[i][j] * a[j]).sum::<f64>())
            .collect()
    };
    let mut a = vec![0.0; n];
    let mut v = a.clone();
    let mut t = 1.0f64;
    for _ in 0..50_000 {
        let g = grad(&v);
        let z: Vec<f64> = v.iter().zip(&g).map(|(vi, gi)| vi + step * gi).collect();
        let next = project(&z, y, c);
        let moved: f64 = next.iter().zip(&a).map(|(x, p)| (x - p).abs()).fold(0.0, f64::max);
        let against: f64 = v.iter().zip(&next).zip(&a).map(|((vi, x), p)| (vi - x) * (x - p)).sum();
        if against > 0.0 {
            t = 1.0;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        v = next
            .iter()
            .zip(&a)
            .map(|(x, p)| x + (t - 1.0) / t_next * (x - p))
            .collect();
        a = next;
        t = t_next;
        if moved < 1e-13 {
            break;
        }
    }
    a
}

/// Minimal weighted error over every (feature, midpoint threshold, polarity)
/// with `polarity * (x - threshold) > 0` predicting authentic.
pub fn brute_stump_error(x: &[Vec<f64>], labels: &[Label], w: &[f64], excluded: &[usize]) -> f64 {
    let d = x[0].len();
    let mut best = f64::INFINITY;
    for j in (0..d).filter(|j| !excluded.contains(j)) {
        let mut vals: Vec<f64> = x.iter().map(|r| r[j]).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals.dedup();
        for pair in vals.windows(2) {
            let th = 0.5 * (pair[0] + pair[1]);
            for pol in [1.0, -1.0] {
                let err: f64 = x
                    .iter()
                    .zip(labels)
                    .zip(w)
                    .filter(|((r, &l), _)| {
                        let predicted = if pol * (r[j] - th) > 0.0 {
                            Label::Authentic
                        } else {
                            Label::Forged
                        };
                        predicted != l
                    })
                    .map(|(_, &wi)| wi)
                    .sum();
                best = best.min(err);
            }
        }
    }
    best
}
