//! First-order Takagi-Sugeno neuro-fuzzy fusion.
//!
//! Each rule has one Gaussian membership function per input and a constant
//! or linear consequent. The output is the firing-strength-weighted mean of
//! the rule consequents:
//!
//! ```text
//! w_k  = prod_d exp(-(x_d - c_kd)^2 / (2 s_kd^2))
//! out  = sum_k w_k cons_k(x) / sum_k w_k
//! ```
//!
//! Rules are seeded by subtractive clustering over (inputs, target) and
//! trained by the hybrid rule: least squares for consequents, then one
//! gradient step on the premise parameters per epoch.

use std::fmt;
use std::str::FromStr;

use crate::dataset::Label;
use crate::error::{Error, Result};
use crate::linalg::ridge_least_squares;
use crate::matrix::Matrix;
use crate::scalar::{parse_scalar, Scalar};

pub const DEFAULT_RADIUS: f64 = 0.5;
pub const DEFAULT_EPOCHS: usize = 50;
pub const DEFAULT_LEARNING_RATE: f64 = 0.01;
pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const SIGMA_FLOOR: f64 = 1e-3;
pub const LSE_RIDGE: f64 = 1e-8;
const LSE_REFINEMENTS: usize = 3;
const MAX_STEP_HALVINGS: usize = 10;

const SQUASH_FACTOR: f64 = 1.5;
const ACCEPT_RATIO: f64 = 0.5;
const REJECT_RATIO: f64 = 0.15;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianMf<T> {
    pub center: T,
    pub sigma: T,
}

impl<T: Scalar> GaussianMf<T> {
    pub fn new(center: T, sigma: T) -> Result<Self> {
        if !(sigma > T::zero() && sigma.is_finite() && center.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "Gaussian needs finite center and positive width, got c={center} sigma={sigma}"
            )));
        }
        Ok(GaussianMf { center, sigma })
    }

    pub fn log_membership(&self, x: T) -> T {
        let d = x - self.center;
        -(d * d) / (T::lit(2.0) * self.sigma * self.sigma)
    }

    pub fn membership(&self, x: T) -> T {
        self.log_membership(x).exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ConsequentKind {
    Constant,
    Linear,
}

impl ConsequentKind {
    pub fn arity(self, dim: usize) -> usize {
        match self {
            ConsequentKind::Constant => 1,
            ConsequentKind::Linear => dim + 1,
        }
    }
}

impl fmt::Display for ConsequentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConsequentKind::Constant => "constant",
            ConsequentKind::Linear => "linear",
        })
    }
}

impl FromStr for ConsequentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "constant" => Ok(ConsequentKind::Constant),
            "linear" => Ok(ConsequentKind::Linear),
            other => Err(Error::parse("consequent type", format!("unknown `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FuzzyRule<T> {
    pub premises: Vec<GaussianMf<T>>,
    /// `[p0]` or `[p0, p1, ..., p_dim]`.
    pub consequent: Vec<T>,
}

impl<T: Scalar> FuzzyRule<T> {
    pub fn log_firing(&self, x: &[T]) -> T {
        self.premises.iter().zip(x).map(|(mf, &v)| mf.log_membership(v)).sum()
    }

    pub fn output(&self, x: &[T]) -> T {
        let mut out = self.consequent[0];
        for (p, &v) in self.consequent[1..].iter().zip(x) {
            out += *p * v;
        }
        out
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingLog<T> {
    /// RMSE after the least-squares step of each epoch.
    pub rmse: Vec<T>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnfisModel<T> {
    pub rules: Vec<FuzzyRule<T>>,
    pub kind: ConsequentKind,
    pub dim: usize,
    pub log: TrainingLog<T>,
}

impl<T: Scalar> AnfisModel<T> {
    pub fn new(rules: Vec<FuzzyRule<T>>, kind: ConsequentKind, dim: usize) -> Result<Self> {
        if rules.is_empty() {
            return Err(Error::InvalidParameter("a fuzzy model needs at least one rule".into()));
        }
        for r in &rules {
            if r.premises.len() != dim || r.consequent.len() != kind.arity(dim) {
                return Err(Error::Shape(format!(
                    "rule has {} premises and {} consequent parameters; expected {dim} and {}",
                    r.premises.len(),
                    r.consequent.len(),
                    kind.arity(dim)
                )));
            }
        }
        Ok(AnfisModel {
            rules,
            kind,
            dim,
            log: TrainingLog::default(),
        })
    }

    /// Raw firing strengths `w_k`. They may underflow for inputs far from
    /// every center; [`Self::normalized_firing`] does not.
    pub fn firing_strengths(&self, x: &[T]) -> Vec<T> {
        self.rules.iter().map(|r| r.log_firing(x).exp()).collect()
    }

    /// `w_k / sum_j w_j`, computed in log space.
    pub fn normalized_firing(&self, x: &[T]) -> Vec<T> {
        let logs: Vec<T> = self.rules.iter().map(|r| r.log_firing(x)).collect();
        let top = logs.iter().copied().fold(T::neg_infinity(), T::max);
        let w: Vec<T> = logs.iter().map(|&l| (l - top).exp()).collect();
        let total: T = w.iter().copied().sum();
        w.into_iter().map(|v| v / total).collect()
    }

    fn check_input(&self, x: &[T]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Shape(format!(
                "fuzzy model expects {} inputs, got {}",
                self.dim,
                x.len()
            )));
        }
        Ok(())
    }

    /// Fused output for one input vector.
    pub fn eval(&self, x: &[T]) -> Result<T> {
        self.check_input(x)?;
        Ok(self.eval_unchecked(x))
    }

    fn eval_unchecked(&self, x: &[T]) -> T {
        self.normalized_firing(x)
            .into_iter()
            .zip(&self.rules)
            .map(|(w, r)| w * r.output(x))
            .sum()
    }

    fn design_row(&self, x: &[T], out: &mut Vec<T>) {
        out.clear();
        for w in self.normalized_firing(x) {
            out.push(w);
            if self.kind == ConsequentKind::Linear {
                out.extend(x.iter().map(|&v| w * v));
            }
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.rules.len() * self.kind.arity(self.dim)
    }

    /// `ANFIS v1 rules=<R> cons=<kind>`, then per rule one `mf` line per
    /// input and a `cons` line.
    pub fn to_text(&self) -> String {
        let mut s = format!("ANFIS v1 rules={} cons={}\n", self.rules.len(), self.kind);
        for r in &self.rules {
            for mf in &r.premises {
                s.push_str(&format!("mf c={} sigma={}\n", mf.center, mf.sigma));
            }
            s.push_str("cons");
            for p in &r.consequent {
                s.push_str(&format!(" {p}"));
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let ctx = "ANFIS model";
        let perr = |m: String| Error::parse(ctx, m);
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| perr("empty model".into()))?;
        let mut h = header.split_whitespace();
        if h.next() != Some("ANFIS") || h.next() != Some("v1") {
            return Err(perr("missing `ANFIS v1` header".into()));
        }
        let count: usize = h
            .next()
            .and_then(|f| f.strip_prefix("rules="))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| perr("bad rules= field".into()))?;
        let kind: ConsequentKind = h
            .next()
            .and_then(|f| f.strip_prefix("cons="))
            .ok_or_else(|| perr("bad cons= field".into()))?
            .parse()?;
        let mut rules = Vec::with_capacity(count);
        let mut premises = Vec::new();
        for line in lines {
            let mut f = line.split_whitespace();
            match f.next() {
                Some("mf") => {
                    let c = f
                        .next()
                        .and_then(|v| v.strip_prefix("c="))
                        .ok_or_else(|| perr("bad mf center".into()))?;
                    let s = f
                        .next()
                        .and_then(|v| v.strip_prefix("sigma="))
                        .ok_or_else(|| perr("bad mf sigma".into()))?;
                    premises.push(GaussianMf::new(
                        parse_scalar(c).map_err(perr)?,
                        parse_scalar(s).map_err(perr)?,
                    )?);
                }
                Some("cons") => {
                    let consequent = f.map(|v| parse_scalar(v).map_err(perr)).collect::<Result<Vec<T>>>()?;
                    rules.push(FuzzyRule {
                        premises: std::mem::take(&mut premises),
                        consequent,
                    });
                }
                other => return Err(perr(format!("unexpected line start {other:?}"))),
            }
        }
        if rules.len() != count || !premises.is_empty() {
            return Err(perr(format!("expected {count} complete rules, found {}", rules.len())));
        }
        let dim = rules[0].premises.len();
        AnfisModel::new(rules, kind, dim)
    }
}

/// Shorthand for [`AnfisModel::eval`].
pub fn fis_eval<T: Scalar>(model: &AnfisModel<T>, x: &[T]) -> Result<T> {
    model.eval(x)
}

/// Subtractive clustering with accept ratio 0.5, reject ratio 0.15 and
/// squash radius 1.5 r. Points are expected in the unit hypercube.
///
/// Always returns at least one center for non-empty input.
pub fn subtractive_cluster<T: Scalar>(points: &[Vec<T>], radius: T) -> Result<Vec<Vec<T>>> {
    if points.is_empty() {
        return Err(Error::InvalidParameter("clustering needs at least one point".into()));
    }
    if !(radius > T::zero() && radius.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "cluster radius {radius} must be positive"
        )));
    }
    let alpha = T::lit(4.0) / (radius * radius);
    let rb = radius * T::lit(SQUASH_FACTOR);
    let beta = T::lit(4.0) / (rb * rb);
    let dist2 = |a: &[T], b: &[T]| -> T { a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum() };
    let mut potential: Vec<T> = points
        .iter()
        .map(|p| points.iter().map(|q| (-alpha * dist2(p, q)).exp()).sum())
        .collect();
    let argmax = |pot: &[T]| {
        let mut best = 0;
        for (i, &v) in pot.iter().enumerate() {
            if v > pot[best] {
                best = i;
            }
        }
        best
    };
    let first = argmax(&potential);
    let first_potential = potential[first];
    let mut centers = vec![points[first].clone()];
    let mut last = (first, first_potential);
    loop {
        let (k, pk) = last;
        for (i, p) in points.iter().enumerate() {
            potential[i] -= pk * (-beta * dist2(p, &points[k])).exp();
        }
        // candidates rejected in the gray zone are zeroed without subtraction
        let next = loop {
            let cand = argmax(&potential);
            let pc = potential[cand];
            if pc <= T::zero() || pc < T::lit(REJECT_RATIO) * first_potential {
                break None;
            }
            if pc > T::lit(ACCEPT_RATIO) * first_potential {
                break Some((cand, pc));
            }
            let d_min = centers
                .iter()
                .map(|c| dist2(&points[cand], c).sqrt())
                .fold(T::infinity(), T::min);
            if d_min / radius + pc / first_potential >= T::one() {
                break Some((cand, pc));
            }
            potential[cand] = T::zero();
        };
        match next {
            Some((cand, pc)) => {
                centers.push(points[cand].clone());
                last = (cand, pc);
            }
            None => return Ok(centers),
        }
    }
}

fn check_data<T: Scalar>(inputs: &Matrix<T>, targets: &[T]) -> Result<()> {
    if inputs.rows() == 0 {
        return Err(Error::InvalidParameter("no training rows".into()));
    }
    if inputs.rows() != targets.len() {
        return Err(Error::Shape("inputs and targets differ in length".into()));
    }
    if inputs.as_slice().iter().chain(targets).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite training value".into()));
    }
    Ok(())
}

pub fn rmse<T: Scalar>(model: &AnfisModel<T>, inputs: &Matrix<T>, targets: &[T]) -> T {
    let sse: T = inputs
        .iter_rows()
        .zip(targets)
        .map(|(x, &t)| {
            let e = model.eval_unchecked(x) - t;
            e * e
        })
        .sum();
    (sse / T::from_usize_lossy(targets.len().max(1))).sqrt()
}

/// Global least-squares fit of every consequent parameter with premises fixed.
pub fn fit_consequents<T: Scalar>(model: &mut AnfisModel<T>, inputs: &Matrix<T>, targets: &[T]) -> Result<()> {
    check_data(inputs, targets)?;
    if inputs.cols() != model.dim {
        return Err(Error::Shape("input width does not match the model".into()));
    }
    let m = model.parameter_count();
    let mut data = Vec::with_capacity(inputs.rows() * m);
    let mut row = Vec::with_capacity(m);
    for x in inputs.iter_rows() {
        model.design_row(x, &mut row);
        data.extend_from_slice(&row);
    }
    let design = Matrix::from_vec(inputs.rows(), m, data)?;
    let params = ridge_least_squares(&design, targets, T::lit(LSE_RIDGE), LSE_REFINEMENTS)?;
    let arity = model.kind.arity(model.dim);
    for (rule, chunk) in model.rules.iter_mut().zip(params.chunks(arity)) {
        rule.consequent.copy_from_slice(chunk);
    }
    Ok(())
}

/// Builds the initial rule base from subtractive clustering of
/// `(inputs, target)` rows and fits its consequents.
///
/// Widths are `radius * range_d / sqrt(8)` per input, floored at 1e-3.
pub fn init_fis<T: Scalar>(
    inputs: &Matrix<T>,
    targets: &[T],
    radius: T,
    kind: ConsequentKind,
) -> Result<AnfisModel<T>> {
    check_data(inputs, targets)?;
    let dim = inputs.cols();
    let points: Vec<Vec<T>> = inputs
        .iter_rows()
        .zip(targets)
        .map(|(x, &t)| {
            let mut p = x.to_vec();
            p.push(t);
            p
        })
        .collect();
    let centers = subtractive_cluster(&points, radius)?;
    let sigmas: Vec<T> = (0..dim)
        .map(|d| {
            let (lo, hi) = inputs
                .iter_rows()
                .map(|r| r[d])
                .fold((T::infinity(), T::neg_infinity()), |(lo, hi), v| (lo.min(v), hi.max(v)));
            (radius * (hi - lo) / T::lit(8.0).sqrt()).max(T::lit(SIGMA_FLOOR))
        })
        .collect();
    let rules = centers
        .iter()
        .map(|c| {
            let premises = (0..dim)
                .map(|d| GaussianMf::new(c[d], sigmas[d]))
                .collect::<Result<Vec<_>>>()?;
            Ok(FuzzyRule {
                premises,
                consequent: vec![T::zero(); kind.arity(dim)],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut model = AnfisModel::new(rules, kind, dim)?;
    fit_consequents(&mut model, inputs, targets)?;
    Ok(model)
}

/// Derivatives of the training RMSE with respect to premise parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct PremiseGradient<T> {
    /// `centers[(k, d)] = dRMSE / dc_kd`
    pub centers: Matrix<T>,
    pub sigmas: Matrix<T>,
}

/// Analytic gradient of RMSE with consequents held fixed.
pub fn premise_gradient<T: Scalar>(model: &AnfisModel<T>, inputs: &Matrix<T>, targets: &[T]) -> PremiseGradient<T> {
    let r = model.rules.len();
    let mut gc = Matrix::filled(r, model.dim, T::zero());
    let mut gs = Matrix::filled(r, model.dim, T::zero());
    let mut sse = T::zero();
    for (x, &t) in inputs.iter_rows().zip(targets) {
        let wbar = model.normalized_firing(x);
        let outs: Vec<T> = model.rules.iter().map(|rule| rule.output(x)).collect();
        let y: T = wbar.iter().zip(&outs).map(|(&w, &o)| w * o).sum();
        let e = y - t;
        sse += e * e;
        for (k, rule) in model.rules.iter().enumerate() {
            // dy/dtheta = wbar_k (out_k - y) dlog(w_k)/dtheta
            let common = e * wbar[k] * (outs[k] - y);
            for (d, mf) in rule.premises.iter().enumerate() {
                let diff = x[d] - mf.center;
                let s2 = mf.sigma * mf.sigma;
                gc[(k, d)] += common * diff / s2;
                gs[(k, d)] += common * diff * diff / (s2 * mf.sigma);
            }
        }
    }
    let n = T::from_usize_lossy(targets.len().max(1));
    let err = (sse / n).sqrt();
    // dRMSE = dSSE / (2 n RMSE) and dSSE = 2 sum e dy
    let scale = if err > T::zero() {
        T::one() / (n * err)
    } else {
        T::zero()
    };
    PremiseGradient {
        centers: gc.map(|&v| v * scale),
        sigmas: gs.map(|&v| v * scale),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HybridOptions<T> {
    pub epochs: usize,
    pub learning_rate: T,
}

impl<T: Scalar> Default for HybridOptions<T> {
    fn default() -> Self {
        HybridOptions {
            epochs: DEFAULT_EPOCHS,
            learning_rate: T::lit(DEFAULT_LEARNING_RATE),
        }
    }
}

fn apply_step<T: Scalar>(model: &AnfisModel<T>, grad: &PremiseGradient<T>, rate: T) -> AnfisModel<T> {
    let mut next = model.clone();
    for (k, rule) in next.rules.iter_mut().enumerate() {
        for (d, mf) in rule.premises.iter_mut().enumerate() {
            mf.center -= rate * grad.centers[(k, d)];
            mf.sigma = (mf.sigma - rate * grad.sigmas[(k, d)]).max(T::lit(SIGMA_FLOOR));
        }
    }
    next
}

/// Hybrid learning: each epoch refits consequents by least squares, then
/// takes one gradient step on the premises.
///
/// A step whose RMSE is not finite is halved up to ten times; if it stays
/// non-finite the premise update of that epoch is skipped with a warning.
pub fn train_hybrid<T: Scalar>(
    model: &AnfisModel<T>,
    inputs: &Matrix<T>,
    targets: &[T],
    options: HybridOptions<T>,
) -> Result<AnfisModel<T>> {
    check_data(inputs, targets)?;
    if inputs.cols() != model.dim {
        return Err(Error::Shape("input width does not match the model".into()));
    }
    if inputs.rows() < model.parameter_count() {
        return Err(Error::InvalidParameter(format!(
            "{} training rows cannot determine {} consequent parameters",
            inputs.rows(),
            model.parameter_count()
        )));
    }
    let mut current = model.clone();
    for epoch in 1..=options.epochs {
        fit_consequents(&mut current, inputs, targets)?;
        let err = rmse(&current, inputs, targets);
        current.log.rmse.push(err);
        let grad = premise_gradient(&current, inputs, targets);
        let mut rate = options.learning_rate;
        let mut accepted = None;
        for _ in 0..=MAX_STEP_HALVINGS {
            let candidate = apply_step(&current, &grad, rate);
            if rmse(&candidate, inputs, targets).is_finite()
                && candidate
                    .rules
                    .iter()
                    .all(|r| r.premises.iter().all(|m| m.center.is_finite()))
            {
                accepted = Some(candidate);
                break;
            }
            rate *= T::lit(0.5);
        }
        match accepted {
            Some(next) => current = next,
            None => current
                .log
                .warnings
                .push(format!("epoch {epoch}: premise step skipped (non-finite error)")),
        }
    }
    Ok(current)
}

/// Authentic iff the fused value is strictly greater than the threshold.
pub fn verdict_for<T: Scalar>(value: T, threshold: T) -> Label {
    if value > threshold {
        Label::Authentic
    } else {
        Label::Forged
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Verdict<T> {
    pub label: Label,
    pub value: T,
}

/// Final decision with the default 0.5 threshold.
pub fn fused_verdict<T: Scalar>(model: &AnfisModel<T>, scores: &[T]) -> Result<Verdict<T>> {
    fused_verdict_at(model, scores, T::lit(DEFAULT_THRESHOLD))
}

pub fn fused_verdict_at<T: Scalar>(model: &AnfisModel<T>, scores: &[T], threshold: T) -> Result<Verdict<T>> {
    let value = model.eval(scores)?;
    Ok(Verdict {
        label: verdict_for(value, threshold),
        value,
    })
}
