//! Binary RBF-kernel SVM trained by sequential minimal optimization.
//!
//! The solver works on the dual
//!
//! ```text
//! min 1/2 a^T Q a - e^T a   s.t.  y^T a = 0,  0 <= a_i <= C
//! Q_ij = y_i y_j K(x_i, x_j)
//! ```
//!
//! choosing working pairs with second-order information, in the style of
//! LIBSVM. Authentic samples are the positive class.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::{derive_seed, Label};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::{parse_scalar, Scalar};

/// Stopping gap on the maximal violating pair. At 1e-3 the dual objective
/// can still sit ~1e-4 below the optimum on small problems.
pub const DEFAULT_TOLERANCE: f64 = 1e-4;
pub const DEFAULT_MAX_ITERATIONS: usize = 10_000_000;
const TAU: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelParams<T> {
    pub c: T,
    pub gamma: T,
}

impl<T: Scalar> KernelParams<T> {
    pub fn new(c: T, gamma: T) -> Result<Self> {
        if !(c > T::zero() && c.is_finite() && gamma > T::zero() && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "C={c} and gamma={gamma} must be positive and finite"
            )));
        }
        Ok(KernelParams { c, gamma })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions<T> {
    pub tol: T,
    pub max_iterations: usize,
}

impl<T: Scalar> Default for SolverOptions<T> {
    fn default() -> Self {
        SolverOptions {
            tol: T::lit(DEFAULT_TOLERANCE),
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }
}

pub fn squared_distance<T: Scalar>(x: &[T], z: &[T]) -> T {
    x.iter()
        .zip(z)
        .map(|(&a, &b)| {
            let d = a - b;
            d * d
        })
        .sum()
}

/// `exp(-gamma * ||x - z||^2)`
pub fn rbf_kernel<T: Scalar>(x: &[T], z: &[T], gamma: T) -> Result<T> {
    if x.len() != z.len() {
        return Err(Error::Shape(format!(
            "kernel arguments have dimensions {} and {}",
            x.len(),
            z.len()
        )));
    }
    Ok((-gamma * squared_distance(x, z)).exp())
}

/// Pairwise squared distances between the rows of `x`.
pub fn squared_distances<T: Scalar>(x: &Matrix<T>) -> Matrix<T> {
    let n = x.rows();
    let mut d = Matrix::filled(n, n, T::zero());
    for i in 0..n {
        for j in (i + 1)..n {
            let v = squared_distance(x.row(i), x.row(j));
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}

pub fn rbf_gram<T: Scalar>(x: &Matrix<T>, gamma: T) -> Matrix<T> {
    squared_distances(x).map(|&d| (-gamma * d).exp())
}

/// Per-feature min/max scaling to `[0, 1]` fitted on training rows.
///
/// A feature that is constant in training maps to 0.
#[derive(Clone, Debug, PartialEq)]
pub struct MinMaxScaler<T> {
    pub min: Vec<T>,
    pub max: Vec<T>,
}

impl<T: Scalar> MinMaxScaler<T> {
    pub fn fit(x: &Matrix<T>) -> Self {
        let mut min = vec![T::infinity(); x.cols()];
        let mut max = vec![T::neg_infinity(); x.cols()];
        for row in x.iter_rows() {
            for (j, &v) in row.iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        if x.rows() == 0 {
            min.fill(T::zero());
            max.fill(T::zero());
        }
        MinMaxScaler { min, max }
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn transform_row(&self, row: &[T]) -> Vec<T> {
        row.iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&v, (&lo, &hi))| {
                let span = hi - lo;
                if span > T::zero() {
                    (v - lo) / span
                } else {
                    T::zero()
                }
            })
            .collect()
    }

    pub fn transform(&self, x: &Matrix<T>) -> Matrix<T> {
        let rows = x.iter_rows().map(|r| self.transform_row(r)).collect();
        Matrix::from_rows(rows).unwrap_or_else(|_| x.clone())
    }
}

/// Solution of the dual problem.
#[derive(Clone, Debug, PartialEq)]
pub struct DualSolution<T> {
    pub alpha: Vec<T>,
    /// Bias `b` of `f(x) = sum a_i y_i K(x_i, x) + b`.
    pub bias: T,
    pub iterations: usize,
    /// Maximal violating-pair gap at termination (< tol on success).
    pub gap: T,
}

/// Dual objective in maximization form: `sum a - 1/2 a^T Q a`.
pub fn dual_objective<T: Scalar>(kernel: &Matrix<T>, y: &[T], alpha: &[T]) -> T {
    let n = alpha.len();
    let mut quad = T::zero();
    for i in 0..n {
        if alpha[i] == T::zero() {
            continue;
        }
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * kernel[(i, j)];
        }
    }
    alpha.iter().copied().sum::<T>() - quad * T::lit(0.5)
}

struct Smo<'a, T> {
    kernel: &'a Matrix<T>,
    y: &'a [T],
    c: T,
    alpha: Vec<T>,
    grad: Vec<T>,
}

impl<T: Scalar> Smo<'_, T> {
    fn q(&self, i: usize, j: usize) -> T {
        self.y[i] * self.y[j] * self.kernel[(i, j)]
    }

    fn at_upper(&self, t: usize) -> bool {
        self.alpha[t] >= self.c
    }

    fn at_lower(&self, t: usize) -> bool {
        self.alpha[t] <= T::zero()
    }

    fn in_up(&self, t: usize) -> bool {
        if self.y[t] > T::zero() {
            !self.at_upper(t)
        } else {
            !self.at_lower(t)
        }
    }

    fn in_low(&self, t: usize) -> bool {
        if self.y[t] > T::zero() {
            !self.at_lower(t)
        } else {
            !self.at_upper(t)
        }
    }

    /// Minimization-form objective from the maintained gradient.
    fn objective(&self) -> T {
        self.alpha
            .iter()
            .zip(&self.grad)
            .map(|(&a, &g)| a * (g - T::one()))
            .sum::<T>()
            * T::lit(0.5)
    }

    /// Returns the working pair, or `None` with the current gap when optimal.
    fn select(&self, tol: T) -> (Option<(usize, usize)>, T) {
        let n = self.alpha.len();
        let tau = T::lit(TAU);
        let mut gmax = T::neg_infinity();
        let mut i_sel = None;
        for t in 0..n {
            if self.in_up(t) {
                let v = -self.y[t] * self.grad[t];
                if v >= gmax {
                    gmax = v;
                    i_sel = Some(t);
                }
            }
        }
        let Some(i) = i_sel else {
            return (None, T::zero());
        };
        let mut gmax2 = T::neg_infinity();
        let mut j_sel = None;
        let mut best = T::infinity();
        let kii = self.kernel[(i, i)];
        for t in 0..n {
            if !self.in_low(t) {
                continue;
            }
            let v = -self.y[t] * self.grad[t];
            if -v >= gmax2 {
                gmax2 = -v;
            }
            let grad_diff = gmax - v;
            if grad_diff > T::zero() {
                let mut quad = kii + self.kernel[(t, t)] - T::lit(2.0) * self.kernel[(i, t)];
                if quad <= T::zero() {
                    quad = tau;
                }
                let obj = -(grad_diff * grad_diff) / quad;
                if obj <= best {
                    best = obj;
                    j_sel = Some(t);
                }
            }
        }
        let gap = gmax + gmax2;
        match j_sel {
            Some(j) if gap >= tol => (Some((i, j)), gap),
            _ => (None, gap.max(T::zero())),
        }
    }

    fn update(&mut self, i: usize, j: usize) {
        let c = self.c;
        let tau = T::lit(TAU);
        let (old_i, old_j) = (self.alpha[i], self.alpha[j]);
        let (mut ai, mut aj) = (old_i, old_j);
        let (gi, gj) = (self.grad[i], self.grad[j]);
        let qij = self.q(i, j);
        let (qii, qjj) = (self.kernel[(i, i)], self.kernel[(j, j)]);
        if self.y[i] != self.y[j] {
            let mut quad = qii + qjj + T::lit(2.0) * qij;
            if quad <= T::zero() {
                quad = tau;
            }
            let delta = (-gi - gj) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > T::zero() {
                if aj < T::zero() {
                    aj = T::zero();
                    ai = diff;
                }
            } else if ai < T::zero() {
                ai = T::zero();
                aj = -diff;
            }
            if diff > T::zero() {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let mut quad = qii + qjj - T::lit(2.0) * qij;
            if quad <= T::zero() {
                quad = tau;
            }
            let delta = (gi - gj) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < T::zero() {
                aj = T::zero();
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < T::zero() {
                ai = T::zero();
                aj = sum;
            }
        }
        self.alpha[i] = ai;
        self.alpha[j] = aj;
        let (di, dj) = (ai - old_i, aj - old_j);
        for t in 0..self.alpha.len() {
            let delta = self.q(i, t) * di + self.q(j, t) * dj;
            self.grad[t] += delta;
        }
    }

    fn bias(&self) -> T {
        let mut ub = T::infinity();
        let mut lb = T::neg_infinity();
        let mut free_sum = T::zero();
        let mut free = 0usize;
        for t in 0..self.alpha.len() {
            let yg = self.y[t] * self.grad[t];
            let positive = self.y[t] > T::zero();
            if self.at_upper(t) {
                if positive {
                    lb = lb.max(yg);
                } else {
                    ub = ub.min(yg);
                }
            } else if self.at_lower(t) {
                if positive {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else {
                free += 1;
                free_sum += yg;
            }
        }
        let rho = if free > 0 {
            free_sum / T::from_usize_lossy(free)
        } else if ub.is_finite() && lb.is_finite() {
            (ub + lb) * T::lit(0.5)
        } else if ub.is_finite() {
            ub
        } else if lb.is_finite() {
            lb
        } else {
            T::zero()
        };
        -rho
    }
}

/// Solves the SVM dual for a precomputed kernel matrix and `y` in {-1, +1}.
pub fn solve_dual<T: Scalar>(kernel: &Matrix<T>, y: &[T], c: T, options: SolverOptions<T>) -> Result<DualSolution<T>> {
    let n = y.len();
    if kernel.shape() != (n, n) {
        return Err(Error::Shape(format!(
            "kernel is {}x{}, expected {n}x{n}",
            kernel.rows(),
            kernel.cols()
        )));
    }
    let positives = y.iter().filter(|&&v| v > T::zero()).count();
    if positives == 0 || positives == n {
        return Err(Error::DegenerateTraining("SVM training needs both classes".into()));
    }
    let mut smo = Smo {
        kernel,
        y,
        c,
        alpha: vec![T::zero(); n],
        grad: vec![-T::one(); n],
    };
    let check_monotone = cfg!(debug_assertions);
    let mut objective = T::zero();
    let mut iterations = 0;
    loop {
        let (pair, gap) = smo.select(options.tol);
        let Some((i, j)) = pair else {
            return Ok(DualSolution {
                bias: smo.bias(),
                alpha: smo.alpha,
                iterations,
                gap,
            });
        };
        if iterations >= options.max_iterations {
            return Err(Error::IterationCap {
                iterations,
                violation: gap.to_f64_lossy(),
            });
        }
        smo.update(i, j);
        iterations += 1;
        if check_monotone {
            let next = smo.objective();
            let slack = T::lit(1e-9) * (T::one() + objective.abs());
            debug_assert!(
                next <= objective + slack,
                "dual objective increased: {objective} -> {next}"
            );
            objective = next;
        }
    }
}

fn labels_to_signs<T: Scalar>(labels: &[Label]) -> Vec<T> {
    labels.iter().map(|l| T::lit(l.sign())).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvmModel<T> {
    pub params: KernelParams<T>,
    /// Support vectors in scaled feature space.
    pub support_vectors: Matrix<T>,
    /// `alpha_i * y_i` per support vector.
    pub dual_coef: Vec<T>,
    pub bias: T,
    pub scaler: MinMaxScaler<T>,
}

impl<T: Scalar> SvmModel<T> {
    pub fn dim(&self) -> usize {
        self.scaler.dim()
    }

    pub fn support_count(&self) -> usize {
        self.dual_coef.len()
    }

    /// Decision value of an already scaled row.
    pub fn decision_value_scaled(&self, x: &[T]) -> Result<T> {
        if x.len() != self.dim() {
            return Err(Error::Shape(format!(
                "model expects {} features, got {}",
                self.dim(),
                x.len()
            )));
        }
        let mut f = self.bias;
        for (sv, &coef) in self.support_vectors.iter_rows().zip(&self.dual_coef) {
            f += coef * (-self.params.gamma * squared_distance(sv, x)).exp();
        }
        Ok(f)
    }

    /// Decision value of a raw feature row; positive means authentic.
    pub fn decision_value(&self, raw: &[T]) -> Result<T> {
        if raw.len() != self.dim() {
            return Err(Error::Shape(format!(
                "model expects {} features, got {}",
                self.dim(),
                raw.len()
            )));
        }
        self.decision_value_scaled(&self.scaler.transform_row(raw))
    }

    pub fn predict(&self, raw: &[T]) -> Result<Label> {
        Ok(if self.decision_value(raw)? > T::zero() {
            Label::Authentic
        } else {
            Label::Forged
        })
    }

    /// Versioned text form; floats are written in shortest round-trip notation.
    pub fn to_text(&self) -> String {
        let scale: Vec<String> = self
            .scaler
            .min
            .iter()
            .zip(&self.scaler.max)
            .map(|(lo, hi)| format!("{lo}:{hi}"))
            .collect();
        let mut s = format!(
            "SVMMODEL v1 C={} gamma={} dim={} nsv={} b={} scale={}\n",
            self.params.c,
            self.params.gamma,
            self.dim(),
            self.support_count(),
            self.bias,
            scale.join(",")
        );
        for (sv, coef) in self.support_vectors.iter_rows().zip(&self.dual_coef) {
            s.push_str(&coef.to_string());
            for v in sv {
                s.push(' ');
                s.push_str(&v.to_string());
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let ctx = "SVM model";
        let perr = |m: String| Error::parse(ctx, m);
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| perr("empty model".into()))?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some("SVMMODEL") || fields.next() != Some("v1") {
            return Err(perr("missing `SVMMODEL v1` header".into()));
        }
        let mut get = |key: &str| -> Result<String> {
            let f = fields.next().ok_or_else(|| perr(format!("missing {key}")))?;
            f.strip_prefix(key)
                .and_then(|r| r.strip_prefix('='))
                .map(str::to_string)
                .ok_or_else(|| perr(format!("expected {key}=, found `{f}`")))
        };
        let c: T = parse_scalar(&get("C")?).map_err(perr)?;
        let gamma: T = parse_scalar(&get("gamma")?).map_err(perr)?;
        let dim: usize = get("dim")?.parse().map_err(|_| perr("bad dim".into()))?;
        let nsv: usize = get("nsv")?.parse().map_err(|_| perr("bad nsv".into()))?;
        let bias: T = parse_scalar(&get("b")?).map_err(perr)?;
        let scale = get("scale")?;
        let mut min = Vec::with_capacity(dim);
        let mut max = Vec::with_capacity(dim);
        for pair in scale.split(',').filter(|p| !p.is_empty()) {
            let (lo, hi) = pair
                .split_once(':')
                .ok_or_else(|| perr(format!("bad scale entry `{pair}`")))?;
            min.push(parse_scalar(lo).map_err(perr)?);
            max.push(parse_scalar(hi).map_err(perr)?);
        }
        if min.len() != dim {
            return Err(perr(format!("scale has {} entries, dim is {dim}", min.len())));
        }
        let mut dual_coef = Vec::with_capacity(nsv);
        let mut data = Vec::with_capacity(nsv * dim);
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let mut vals = line.split_whitespace();
            dual_coef.push(parse_scalar(vals.next().unwrap_or_default()).map_err(perr)?);
            let before = data.len();
            for v in vals {
                data.push(parse_scalar(v).map_err(perr)?);
            }
            if data.len() - before != dim {
                return Err(perr("support vector has wrong dimension".into()));
            }
        }
        if dual_coef.len() != nsv {
            return Err(perr(format!(
                "expected {nsv} support vectors, found {}",
                dual_coef.len()
            )));
        }
        Ok(SvmModel {
            params: KernelParams::new(c, gamma)?,
            support_vectors: Matrix::from_vec(nsv, dim, data)?,
            dual_coef,
            bias,
            scaler: MinMaxScaler { min, max },
        })
    }
}

fn model_from_solution<T: Scalar>(
    scaled: &Matrix<T>,
    y: &[T],
    params: KernelParams<T>,
    scaler: MinMaxScaler<T>,
    sol: DualSolution<T>,
) -> SvmModel<T> {
    let support: Vec<usize> = (0..y.len()).filter(|&i| sol.alpha[i] > T::zero()).collect();
    SvmModel {
        params,
        support_vectors: scaled.select_rows(&support),
        dual_coef: support.iter().map(|&i| sol.alpha[i] * y[i]).collect(),
        bias: sol.bias,
        scaler,
    }
}

/// Fits min/max scaling on `features`, then solves the dual with SMO.
pub fn train_svm<T: Scalar>(
    features: &Matrix<T>,
    labels: &[Label],
    params: KernelParams<T>,
    options: SolverOptions<T>,
) -> Result<SvmModel<T>> {
    if labels.len() != features.rows() {
        return Err(Error::Shape("features and labels differ in length".into()));
    }
    let scaler = MinMaxScaler::fit(features);
    let scaled = scaler.transform(features);
    let y = labels_to_signs::<T>(labels);
    let kernel = rbf_gram(&scaled, params.gamma);
    let sol = solve_dual(&kernel, &y, params.c, options)?;
    Ok(model_from_solution(&scaled, &y, params, scaler, sol))
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridCell<T> {
    pub c: T,
    pub gamma: T,
    /// Cross-validation accuracy in [0, 1].
    pub accuracy: T,
    /// Set when some fold failed to train; accuracy is then 0.
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridSearchReport<T> {
    pub cells: Vec<GridCell<T>>,
    pub best: usize,
}

impl<T: Scalar> GridSearchReport<T> {
    pub fn chosen(&self) -> &GridCell<T> {
        &self.cells[self.best]
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("C,gamma,accuracy,status\n");
        for cell in &self.cells {
            let status = cell.failure.as_deref().unwrap_or("ok").replace(',', ";");
            s.push_str(&format!("{},{},{},{status}\n", cell.c, cell.gamma, cell.accuracy));
        }
        s
    }
}

/// Powers of two `2^start, 2^(start+step), ..., <= 2^stop`.
pub fn log2_grid<T: Scalar>(start: i32, stop: i32, step: i32) -> Vec<T> {
    assert!(step > 0, "grid step must be positive");
    (0..)
        .map(|k| start + k * step)
        .take_while(|&e| e <= stop)
        .map(|e| T::lit(2f64.powi(e)))
        .collect()
}

/// C in 2^-5, 2^-3, ..., 2^15.
pub fn default_c_grid<T: Scalar>() -> Vec<T> {
    log2_grid(-5, 15, 2)
}

/// gamma in 2^-15, 2^-13, ..., 2^3.
pub fn default_gamma_grid<T: Scalar>() -> Vec<T> {
    log2_grid(-15, 3, 2)
}

/// Stratified fold assignment: each class is shuffled and dealt round-robin.
pub fn stratified_folds(labels: &[Label], folds: usize, seed: u64) -> Vec<usize> {
    let mut assignment = vec![0; labels.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut next = 0;
    for class in [Label::Authentic, Label::Forged] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng);
        for i in members {
            assignment[i] = next % folds;
            next += 1;
        }
    }
    assignment
}

/// k-fold cross-validated grid search over (C, gamma).
///
/// The winner has maximal accuracy; ties go to the smaller C, then the
/// smaller gamma. Cells run in parallel.
pub fn grid_search<T: Scalar>(
    features: &Matrix<T>,
    labels: &[Label],
    c_grid: &[T],
    gamma_grid: &[T],
    folds: usize,
    seed: u64,
    options: SolverOptions<T>,
) -> Result<GridSearchReport<T>> {
    if c_grid.is_empty() || gamma_grid.is_empty() {
        return Err(Error::InvalidParameter("empty parameter grid".into()));
    }
    if folds < 2 {
        return Err(Error::InvalidParameter(format!("need >= 2 folds, got {folds}")));
    }
    if labels.len() != features.rows() {
        return Err(Error::Shape("features and labels differ in length".into()));
    }
    let assignment = stratified_folds(labels, folds, derive_seed(seed, 0, 0));
    let fold_sets: Vec<(Vec<usize>, Vec<usize>)> = (0..folds)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| assignment[i] == f);
            (train, test)
        })
        .collect();
    // per fold: scaled training rows, their pairwise distances, scaled test rows
    let prepared: Vec<_> = fold_sets
        .par_iter()
        .map(|(train, test)| {
            let xtr = features.select_rows(train);
            let scaler = MinMaxScaler::fit(&xtr);
            let scaled = scaler.transform(&xtr);
            let dist = squared_distances(&scaled);
            let xte = scaler.transform(&features.select_rows(test));
            (scaled, dist, xte)
        })
        .collect();

    let pairs: Vec<(T, T)> = c_grid
        .iter()
        .flat_map(|&c| gamma_grid.iter().map(move |&g| (c, g)))
        .collect();
    let cells: Vec<GridCell<T>> = pairs
        .par_iter()
        .map(|&(c, gamma)| {
            let mut correct = 0usize;
            let mut failure = None;
            let outcome = KernelParams::new(c, gamma).and_then(|params| {
                for ((train, test), (scaled, dist, xte)) in fold_sets.iter().zip(&prepared) {
                    let tr_labels: Vec<Label> = train.iter().map(|&i| labels[i]).collect();
                    let y = labels_to_signs::<T>(&tr_labels);
                    let kernel = dist.map(|&d| (-gamma * d).exp());
                    let sol = solve_dual(&kernel, &y, c, options)?;
                    let model = model_from_solution(
                        scaled,
                        &y,
                        params,
                        MinMaxScaler {
                            min: vec![],
                            max: vec![],
                        },
                        sol,
                    );
                    for (row, &i) in xte.iter_rows().zip(test) {
                        let f = model.decision_value_scaled_unchecked(row);
                        let predicted = if f > T::zero() { Label::Authentic } else { Label::Forged };
                        if predicted == labels[i] {
                            correct += 1;
                        }
                    }
                }
                Ok(())
            });
            if let Err(e) = outcome {
                failure = Some(e.to_string());
            }
            let accuracy = if failure.is_some() || labels.is_empty() {
                T::zero()
            } else {
                T::from_usize_lossy(correct) / T::from_usize_lossy(labels.len())
            };
            GridCell {
                c,
                gamma,
                accuracy,
                failure,
            }
        })
        .collect();

    let mut best = 0;
    for (k, cell) in cells.iter().enumerate().skip(1) {
        let b = &cells[best];
        let better = cell.accuracy > b.accuracy
            || (cell.accuracy == b.accuracy && (cell.c < b.c || (cell.c == b.c && cell.gamma < b.gamma)));
        if better {
            best = k;
        }
    }
    Ok(GridSearchReport { cells, best })
}

impl<T: Scalar> SvmModel<T> {
    fn decision_value_scaled_unchecked(&self, x: &[T]) -> T {
        let mut f = self.bias;
        for (sv, &coef) in self.support_vectors.iter_rows().zip(&self.dual_coef) {
            f += coef * (-self.params.gamma * squared_distance(sv, x)).exp();
        }
        f
    }
}
