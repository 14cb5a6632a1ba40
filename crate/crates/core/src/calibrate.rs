//! Sigmoid calibration of SVM decision values, `p(f) = 1 / (1 + exp(A f + B))`.
//!
//! The fit follows Platt's procedure: smoothed targets
//! `t+ = (N+ + 1) / (N+ + 2)` and `t- = 1 / (N- + 2)`, cross-entropy loss,
//! and Newton steps with backtracking line search.

use crate::dataset::Label;
use crate::error::{Error, Result};
use crate::features::Tool;
use crate::scalar::{parse_scalar, Scalar};

pub const GRADIENT_TOLERANCE: f64 = 1e-10;
pub const MAX_NEWTON_ITERATIONS: usize = 200;
const HESSIAN_RIDGE: f64 = 1e-12;
const MIN_STEP: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SigmoidCalibrator<T> {
    pub a: T,
    pub b: T,
}

impl<T: Scalar> SigmoidCalibrator<T> {
    pub fn new(a: T, b: T) -> Self {
        SigmoidCalibrator { a, b }
    }

    /// Probability strictly inside (0, 1).
    ///
    /// Saturated values are clamped to the smallest positive float and to
    /// the largest float below one.
    pub fn probability(&self, f: T) -> T {
        let z = self.a * f + self.b;
        let p = if z >= T::zero() {
            let e = (-z).exp();
            e / (T::one() + e)
        } else {
            T::one() / (T::one() + z.exp())
        };
        let hi = T::one() - T::epsilon() * T::lit(0.5);
        p.max(T::min_positive_value()).min(hi)
    }

    /// `SIGMOID v1 tool=<tag> A=<..> B=<..>`
    pub fn to_line(&self, tool: Tool) -> String {
        format!("SIGMOID v1 tool={} A={} B={}", tool.tag(), self.a, self.b)
    }

    pub fn from_line(line: &str) -> Result<(Tool, Self)> {
        let ctx = "sigmoid calibrator";
        let mut f = line.split_whitespace();
        if f.next() != Some("SIGMOID") || f.next() != Some("v1") {
            return Err(Error::parse(ctx, "missing `SIGMOID v1` prefix"));
        }
        let mut take = |key: &str| {
            f.next()
                .and_then(|s| s.strip_prefix(key))
                .ok_or_else(|| Error::parse(ctx, format!("missing {key}")))
        };
        let tool: Tool = take("tool=")?.parse()?;
        let a = parse_scalar(take("A=")?).map_err(|m| Error::parse(ctx, m))?;
        let b = parse_scalar(take("B=")?).map_err(|m| Error::parse(ctx, m))?;
        Ok((tool, SigmoidCalibrator { a, b }))
    }
}

/// Shorthand for [`SigmoidCalibrator::probability`].
pub fn sigmoid<T: Scalar>(calibrator: &SigmoidCalibrator<T>, f: T) -> T {
    calibrator.probability(f)
}

/// Smoothed targets for each label.
pub fn platt_targets<T: Scalar>(labels: &[Label]) -> (T, T) {
    let pos = labels.iter().filter(|l| l.is_authentic()).count();
    let neg = labels.len() - pos;
    let hi = T::from_usize_lossy(pos + 1) / T::from_usize_lossy(pos + 2);
    let lo = T::one() / T::from_usize_lossy(neg + 2);
    (hi, lo)
}

/// Cross-entropy of `(a, b)` against the smoothed targets.
pub fn platt_loss<T: Scalar>(values: &[T], labels: &[Label], a: T, b: T) -> T {
    let (hi, lo) = platt_targets::<T>(labels);
    values
        .iter()
        .zip(labels)
        .map(|(&f, l)| {
            let t = if l.is_authentic() { hi } else { lo };
            let z = f * a + b;
            // t * z + log(1 + exp(-z)), arranged to avoid overflow
            if z >= T::zero() {
                t * z + (-z).exp().ln_1p()
            } else {
                (t - T::one()) * z + z.exp().ln_1p()
            }
        })
        .sum()
}

/// Starting point of the fit: the best flat sigmoid under the class prior.
pub fn prior_solution<T: Scalar>(labels: &[Label]) -> SigmoidCalibrator<T> {
    let pos = labels.iter().filter(|l| l.is_authentic()).count();
    let neg = labels.len() - pos;
    let b = (T::from_usize_lossy(neg + 1) / T::from_usize_lossy(pos + 1)).ln();
    SigmoidCalibrator::new(T::zero(), b)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SigmoidFit<T> {
    pub calibrator: SigmoidCalibrator<T>,
    pub iterations: usize,
    /// Infinity norm of the gradient at the returned point.
    pub gradient_norm: T,
    pub converged: bool,
}

fn gradient_and_hessian<T: Scalar>(values: &[T], targets: &[T], a: T, b: T) -> ([T; 2], [T; 3]) {
    let mut g = [T::zero(); 2];
    let ridge = T::lit(HESSIAN_RIDGE);
    let mut h = [ridge, T::zero(), ridge];
    for (&f, &t) in values.iter().zip(targets) {
        let z = f * a + b;
        // p = 1/(1+e^z), q = 1 - p
        let (p, q) = if z >= T::zero() {
            let e = (-z).exp();
            (e / (T::one() + e), T::one() / (T::one() + e))
        } else {
            let e = z.exp();
            (T::one() / (T::one() + e), e / (T::one() + e))
        };
        let d2 = p * q;
        h[0] += f * f * d2;
        h[1] += f * d2;
        h[2] += d2;
        let d1 = t - p;
        g[0] += f * d1;
        g[1] += d1;
    }
    (g, h)
}

/// Fits `(A, B)` by Newton's method with backtracking.
///
/// Stops when the gradient infinity norm drops below 1e-10 or after 200
/// iterations; `converged` is false if neither the tolerance was reached
/// nor the line search could make progress from an optimal point.
pub fn fit_sigmoid<T: Scalar>(values: &[T], labels: &[Label]) -> Result<SigmoidFit<T>> {
    if values.len() != labels.len() {
        return Err(Error::Shape("decision values and labels differ in length".into()));
    }
    let pos = labels.iter().filter(|l| l.is_authentic()).count();
    if pos == 0 || pos == labels.len() {
        return Err(Error::Calibration("both classes are required".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Calibration("non-finite decision value".into()));
    }
    let (hi, lo) = platt_targets::<T>(labels);
    let targets: Vec<T> = labels.iter().map(|l| if l.is_authentic() { hi } else { lo }).collect();
    let tol = T::lit(GRADIENT_TOLERANCE);
    let start = prior_solution::<T>(labels);
    let (mut a, mut b) = (start.a, start.b);
    let mut loss = platt_loss(values, labels, a, b);
    let mut iterations = 0;
    let mut stalled = false;
    let norm = |g: [T; 2]| g[0].abs().max(g[1].abs());
    loop {
        let (g, h) = gradient_and_hessian(values, &targets, a, b);
        if norm(g) < tol || iterations >= MAX_NEWTON_ITERATIONS || stalled {
            let converged = norm(g) < tol;
            return Ok(SigmoidFit {
                calibrator: SigmoidCalibrator::new(a, b),
                iterations,
                gradient_norm: norm(g),
                converged,
            });
        }
        iterations += 1;
        let det = h[0] * h[2] - h[1] * h[1];
        let da = -(h[2] * g[0] - h[1] * g[1]) / det;
        let db = -(-h[1] * g[0] + h[0] * g[1]) / det;
        let slope = g[0] * da + g[1] * db;
        let mut step = T::one();
        stalled = true;
        while step >= T::lit(MIN_STEP) {
            let (na, nb) = (a + step * da, b + step * db);
            let next = platt_loss(values, labels, na, nb);
            // near the optimum the loss decrease drops below rounding, so a
            // step that keeps the loss and shrinks the gradient also counts
            let accept = next < loss + T::lit(1e-4) * step * slope
                || (next <= loss && norm(gradient_and_hessian(values, &targets, na, nb).0) < norm(g));
            if accept {
                a = na;
                b = nb;
                loss = next;
                stalled = false;
                break;
            }
            step *= T::lit(0.5);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Authentic as A, Forged as F};

    #[test]
    fn flat_and_centered_sigmoids() {
        let flat = SigmoidCalibrator::new(0.0f64, 0.0);
        for f in [-3.0, 0.0, 7.5] {
            assert_eq!(flat.probability(f), 0.5);
        }
        assert_eq!(SigmoidCalibrator::new(1.0f64, 0.0).probability(0.0), 0.5);
        let p = SigmoidCalibrator::new(-2.0f64, 0.0).probability(1.0);
        assert!((p - 1.0 / (1.0 + (-2.0f64).exp())).abs() < 1e-15);
        assert!((p - 0.8808).abs() < 1e-4);
    }

    #[test]
    fn saturation_stays_open_interval() {
        let c = SigmoidCalibrator::new(1.0f64, 0.0);
        for z in [-1000.0, -40.0, 40.0, 1000.0] {
            let p = c.probability(z);
            assert!(p > 0.0 && p < 1.0, "z={z} p={p}");
        }
    }

    #[test]
    fn separated_values_fit_increasing_sigmoid() {
        let mut values = vec![1.0; 10];
        values.extend(vec![-1.0; 10]);
        let labels: Vec<_> = (0..20).map(|i| if i < 10 { A } else { F }).collect();
        let fit = fit_sigmoid(&values, &labels).unwrap();
        let c = fit.calibrator;
        assert!(fit.converged);
        assert!(c.a < 0.0);
        assert!(c.probability(1.0) > 0.9);
        assert!(c.probability(-1.0) < 0.5);
    }

    #[test]
    fn single_class_is_an_error() {
        assert!(matches!(fit_sigmoid(&[0.1, 0.2], &[A, A]), Err(Error::Calibration(_))));
    }

    #[test]
    fn line_round_trip() {
        let c = SigmoidCalibrator::new(-1.2345678901234567f64, 0.1);
        let line = c.to_line(Tool::RunLength);
        assert_eq!(line, "SIGMOID v1 tool=RUN_LENGTH A=-1.2345678901234567 B=0.1");
        assert_eq!(SigmoidCalibrator::from_line(&line).unwrap(), (Tool::RunLength, c));
        assert!(SigmoidCalibrator::<f64>::from_line("SIGMOID v1 tool=X A=1 B=2").is_err());
    }

    proptest::proptest! {
        #[test]
        fn output_in_open_unit_interval(a in -50.0f64..50.0, b in -50.0f64..50.0, f in -20.0f64..20.0) {
            let p = SigmoidCalibrator::new(a, b).probability(f);
            proptest::prop_assert!(p > 0.0 && p < 1.0);
        }

        #[test]
        fn monotone_for_negative_slope(a in -5.0f64..-0.01, b in -5.0f64..5.0, f in -3.0f64..3.0, d in 0.01f64..2.0) {
            let c = SigmoidCalibrator::new(a, b);
            proptest::prop_assert!(c.probability(f) < c.probability(f + d));
        }
    }
}
