//! AdaBoost feature selection with decision stumps.
//!
//! Each boosting round fits the best stump over the features not yet chosen,
//! records that feature, and reweights the samples so the ones the stump got
//! wrong count for more in the next round.

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use crate::dataset::Label;
use crate::error::{Error, Result};
use crate::features::Tool;
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Number of features to keep: a fixed count or every feature.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureCount {
    Top(usize),
    All,
}

impl FeatureCount {
    pub fn resolve(self, dimension: usize) -> usize {
        match self {
            FeatureCount::Top(k) => k.min(dimension),
            FeatureCount::All => dimension,
        }
    }
}

impl fmt::Display for FeatureCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureCount::Top(k) => write!(f, "{k}"),
            FeatureCount::All => f.write_str("All"),
        }
    }
}

impl FromStr for FeatureCount {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("all") {
            return Ok(FeatureCount::All);
        }
        match s.parse::<usize>() {
            Ok(k) if k >= 1 => Ok(FeatureCount::Top(k)),
            _ => Err(Error::parse("feature count", format!("`{s}` is not >= 1 or `All`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stump<T> {
    pub feature_index: usize,
    pub threshold: T,
    /// +1: authentic above the threshold; -1: authentic at or below it.
    pub polarity: i8,
    pub weighted_error: T,
}

impl<T: Scalar> Stump<T> {
    pub fn predict(&self, x: T) -> Label {
        let above = x > self.threshold;
        if above == (self.polarity > 0) {
            Label::Authentic
        } else {
            Label::Forged
        }
    }

    pub fn predict_row(&self, row: &[T]) -> Label {
        self.predict(row[self.feature_index])
    }
}

/// Multiplies the weight of every correctly classified sample by `beta`,
/// then renormalizes to a distribution.
pub fn update_weights<T: Scalar>(weights: &[T], predictions: &[Label], labels: &[Label], beta: T) -> Result<Vec<T>> {
    if weights.len() != predictions.len() || weights.len() != labels.len() {
        return Err(Error::Shape("weights, predictions and labels differ in length".into()));
    }
    if !(beta >= T::zero() && beta <= T::one()) {
        return Err(Error::InvalidParameter(format!("beta {beta} outside [0, 1]")));
    }
    let mut next: Vec<T> = weights
        .iter()
        .zip(predictions.iter().zip(labels))
        .map(|(&w, (p, l))| if p == l { w * beta } else { w })
        .collect();
    let total: T = next.iter().copied().sum();
    if total <= T::zero() {
        return Err(Error::InvalidParameter("reweighting left no mass".into()));
    }
    for w in &mut next {
        *w /= total;
    }
    Ok(next)
}

fn class_weights<T: Scalar>(labels: &[Label], weights: &[T]) -> (T, T) {
    let mut auth = T::zero();
    let mut forged = T::zero();
    for (l, &w) in labels.iter().zip(weights) {
        if l.is_authentic() {
            auth += w;
        } else {
            forged += w;
        }
    }
    (auth, forged)
}

fn midpoint<T: Scalar>(lo: T, hi: T) -> T {
    let m = lo + (hi - lo) * T::lit(0.5);
    if m >= hi {
        lo
    } else {
        m
    }
}

fn misclassified_weight<T: Scalar>(stump: &Stump<T>, features: &Matrix<T>, labels: &[Label], weights: &[T]) -> T {
    let mut e = T::zero();
    for (i, (&l, &w)) in labels.iter().zip(weights).enumerate() {
        if stump.predict(features[(i, stump.feature_index)]) != l {
            e += w;
        }
    }
    e
}

fn sorted_order<T: Scalar>(features: &Matrix<T>, j: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..features.rows()).collect();
    order.sort_by(|&a, &b| {
        features[(a, j)]
            .partial_cmp(&features[(b, j)])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    order
}

fn check_inputs<T: Scalar>(features: &Matrix<T>, labels: &[Label], weights: &[T]) -> Result<()> {
    if labels.len() != features.rows() || weights.len() != features.rows() {
        return Err(Error::Shape("features, labels and weights differ in length".into()));
    }
    let auth = labels.iter().filter(|l| l.is_authentic()).count();
    if auth == 0 || auth == labels.len() {
        return Err(Error::DegenerateTraining("stump search needs both classes".into()));
    }
    if features.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite feature value".into()));
    }
    Ok(())
}

/// Sweep over one feature's sorted values; returns the feature's best stump.
fn best_on_feature<T: Scalar>(
    features: &Matrix<T>,
    labels: &[Label],
    weights: &[T],
    j: usize,
    order: &[usize],
    totals: (T, T),
) -> Option<Stump<T>> {
    let (total_auth, total_forged) = totals;
    let (mut left_auth, mut left_forged) = (T::zero(), T::zero());
    let mut best: Option<Stump<T>> = None;
    for w in 0..order.len().saturating_sub(1) {
        let i = order[w];
        if labels[i].is_authentic() {
            left_auth += weights[i];
        } else {
            left_forged += weights[i];
        }
        let (lo, hi) = (features[(i, j)], features[(order[w + 1], j)]);
        if lo == hi {
            continue;
        }
        let threshold = midpoint(lo, hi);
        let up = left_auth + (total_forged - left_forged);
        let down = left_forged + (total_auth - left_auth);
        for (polarity, err) in [(1i8, up), (-1i8, down)] {
            if best.is_none_or(|b| err < b.weighted_error) {
                best = Some(Stump {
                    feature_index: j,
                    threshold,
                    polarity,
                    weighted_error: err,
                });
            }
        }
    }
    best
}

fn search<'a, T: Scalar>(
    features: &Matrix<T>,
    labels: &[Label],
    weights: &[T],
    excluded: &[bool],
    orders: impl Fn(usize) -> Cow<'a, [usize]>,
) -> Result<Stump<T>> {
    let totals = class_weights(labels, weights);
    let mut best: Option<Stump<T>> = None;
    for j in 0..features.cols() {
        if excluded.get(j).copied().unwrap_or(false) {
            continue;
        }
        let order = orders(j);
        if let Some(s) = best_on_feature(features, labels, weights, j, &order, totals) {
            if best.is_none_or(|b| s.weighted_error < b.weighted_error) {
                best = Some(s);
            }
        }
    }
    let mut stump = best.ok_or(Error::StumpsExhausted)?;
    stump.weighted_error = misclassified_weight(&stump, features, labels, weights);
    Ok(stump)
}

/// Exhaustive stump search over non-excluded features.
///
/// Candidate thresholds are midpoints between consecutive distinct sorted
/// values. Ties go to the lowest feature index, then the lowest threshold,
/// then polarity +1.
pub fn best_stump<T: Scalar>(
    features: &Matrix<T>,
    labels: &[Label],
    weights: &[T],
    excluded: &[usize],
) -> Result<Stump<T>> {
    check_inputs(features, labels, weights)?;
    let mut mask = vec![false; features.cols()];
    for &j in excluded {
        if j < mask.len() {
            mask[j] = true;
        }
    }
    search(features, labels, weights, &mask, |j| {
        Cow::Owned(sorted_order(features, j))
    })
}

/// One completed boosting round.
#[derive(Clone, Debug, PartialEq)]
pub struct Round<T> {
    pub stump: Stump<T>,
    /// Sample weights after this round's update.
    pub weights: Vec<T>,
}

/// Stateful boosting loop; [`select_features`] drives it to completion.
pub struct Booster<'a, T> {
    features: &'a Matrix<T>,
    labels: &'a [Label],
    orders: Vec<Vec<usize>>,
    weights: Vec<T>,
    selected: Vec<bool>,
    round: usize,
    finished: bool,
}

impl<'a, T: Scalar> Booster<'a, T> {
    pub fn new(features: &'a Matrix<T>, labels: &'a [Label]) -> Result<Self> {
        let n = features.rows();
        let weights = vec![T::one() / T::from_usize_lossy(n.max(1)); n];
        check_inputs(features, labels, &weights)?;
        let orders = (0..features.cols()).map(|j| sorted_order(features, j)).collect();
        Ok(Booster {
            features,
            labels,
            orders,
            weights,
            selected: vec![false; features.cols()],
            round: 0,
            finished: false,
        })
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// True once a perfect stump was found; later rounds are not run.
    pub fn finished(&self) -> bool {
        self.finished
    }

    /// Runs one round. Returns `Ok(None)` when no further round is possible.
    pub fn step(&mut self) -> Result<Option<Round<T>>> {
        if self.finished || self.selected.iter().all(|&s| s) {
            return Ok(None);
        }
        self.round += 1;
        let orders = &self.orders;
        let stump = search(self.features, self.labels, &self.weights, &self.selected, |j| {
            Cow::Borrowed(orders[j].as_slice())
        })?;
        let eps = stump.weighted_error;
        if eps >= T::lit(0.5) {
            return Err(Error::BoostingFailure {
                round: self.round,
                error: eps.to_f64_lossy(),
            });
        }
        self.selected[stump.feature_index] = true;
        if eps == T::zero() {
            self.finished = true;
            return Ok(Some(Round {
                stump,
                weights: self.weights.clone(),
            }));
        }
        let predictions: Vec<Label> = self.features.iter_rows().map(|r| stump.predict_row(r)).collect();
        let beta = eps / (T::one() - eps);
        self.weights = update_weights(&self.weights, &predictions, self.labels, beta)?;
        Ok(Some(Round {
            stump,
            weights: self.weights.clone(),
        }))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SelectionResult<T> {
    pub k: FeatureCount,
    /// Feature indices in selection order.
    pub indices: Vec<usize>,
    /// Stump of each round; empty for identity selection.
    pub rounds: Vec<Stump<T>>,
    /// Set when a zero-error stump stopped selection before `k` rounds.
    pub stopped_early: bool,
}

impl<T: Scalar> SelectionResult<T> {
    pub fn identity(k: FeatureCount, dimension: usize) -> Self {
        SelectionResult {
            k,
            indices: (0..dimension).collect(),
            rounds: Vec::new(),
            stopped_early: false,
        }
    }

    /// `tool,k,idx0,idx1,...`
    pub fn to_line(&self, tool: Tool) -> String {
        let mut s = format!("{},{}", tool.tag(), self.k);
        for i in &self.indices {
            s.push_str(&format!(",{i}"));
        }
        s
    }

    pub fn from_line(line: &str) -> Result<(Tool, Self)> {
        let mut parts = line.trim().split(',');
        let tool: Tool = parts.next().unwrap_or_default().parse()?;
        let k: FeatureCount = parts.next().unwrap_or_default().parse()?;
        let indices = parts
            .filter(|p| !p.is_empty())
            .map(|p| {
                p.parse::<usize>()
                    .map_err(|_| Error::parse("selection", format!("bad index `{p}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((
            tool,
            SelectionResult {
                k,
                indices,
                rounds: Vec::new(),
                stopped_early: false,
            },
        ))
    }

    /// Per-round diagnostics: `round,feature,threshold,polarity,weighted_error`.
    pub fn rounds_csv(&self) -> String {
        let mut s = String::from("round,feature,threshold,polarity,weighted_error\n");
        for (r, st) in self.rounds.iter().enumerate() {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                r + 1,
                st.feature_index,
                st.threshold,
                st.polarity,
                st.weighted_error
            ));
        }
        s
    }
}

/// Greedy boosting selection of `k` distinct features.
///
/// `k` at or above the dimension (or [`FeatureCount::All`]) selects every
/// feature in ascending order without boosting.
pub fn select_features<T: Scalar>(
    features: &Matrix<T>,
    labels: &[Label],
    k: FeatureCount,
) -> Result<SelectionResult<T>> {
    let d = features.cols();
    let rounds = match k {
        FeatureCount::Top(0) => {
            return Err(Error::InvalidParameter("k must be >= 1".into()));
        }
        FeatureCount::Top(k) if k < d => k,
        _ => return Ok(SelectionResult::identity(k, d)),
    };
    let mut booster = Booster::new(features, labels)?;
    let mut result = SelectionResult {
        k,
        indices: Vec::with_capacity(rounds),
        rounds: Vec::with_capacity(rounds),
        stopped_early: false,
    };
    while result.indices.len() < rounds {
        match booster.step()? {
            Some(round) => {
                result.indices.push(round.stump.feature_index);
                result.rounds.push(round.stump);
            }
            None => break,
        }
    }
    result.stopped_early = booster.finished() && result.indices.len() < rounds;
    Ok(result)
}
