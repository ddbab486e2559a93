//! Post-hoc rescaling of a frozen model's predictions.
//!
//! An adjustment multiplies each class probability by `β_i = g_i / π̂_i`,
//! where `g` is a weighting on the simplex and `π̂` the empirical class prior.
//! On logits the same rule is an additive shift by `log β_i`; both routes pick
//! the same class because softmax is monotone and the normalizer is shared.
//! Ties always go to the lowest class index.

use serde::{Deserialize, Serialize};

use crate::dataset::InputKind;
use crate::divergence::{DivergenceKind, SimplexWeights, SIMPLEX_TOLERANCE};
use crate::{Error, Result};

/// Strictly positive class priors summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ClassPriors(Vec<f64>);

impl ClassPriors {
    pub fn new(priors: Vec<f64>) -> Result<Self> {
        if priors.len() < 2 {
            return Err(Error::InvalidPriors(format!(
                "need at least 2 classes, found {}",
                priors.len()
            )));
        }
        if let Some(i) = priors.iter().position(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(Error::InvalidPriors(format!(
                "prior {i} is {}, must be positive",
                priors[i]
            )));
        }
        let total: f64 = priors.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::InvalidPriors(format!("priors sum to {total}")));
        }
        Ok(Self(priors))
    }

    pub fn uniform(m: usize) -> Result<Self> {
        Self::new(vec![1.0 / m as f64; m])
    }

    /// `π̂_i = n_i / n`; every class must be present.
    pub fn from_counts(counts: &[usize]) -> Result<Self> {
        if let Some(class) = counts.iter().position(|&c| c == 0) {
            return Err(Error::EmptyClass(class));
        }
        let n: usize = counts.iter().sum();
        Self::new(counts.iter().map(|&c| c as f64 / n as f64).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// `max_i π_i / min_i π_i`.
    pub fn imbalance_ratio(&self) -> f64 {
        let max = self.0.iter().copied().fold(f64::MIN, f64::max);
        let min = self.0.iter().copied().fold(f64::MAX, f64::min);
        max / min
    }

    pub fn to_simplex(&self) -> SimplexWeights {
        SimplexWeights::new(self.0.clone()).expect("priors are a simplex point")
    }
}

impl TryFrom<Vec<f64>> for ClassPriors {
    type Error = Error;

    fn try_from(value: Vec<f64>) -> Result<Self> {
        Self::new(value)
    }
}

impl From<ClassPriors> for Vec<f64> {
    fn from(value: ClassPriors) -> Self {
        value.0
    }
}

/// Per-class multipliers `β_i = g_i / π̂_i` together with their provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct PosthocAdjustment {
    multipliers: Vec<f64>,
    log_multipliers: Vec<f64>,
    weights: SimplexWeights,
    priors: ClassPriors,
    delta_train: f64,
    divergence_kind: DivergenceKind,
}

impl PosthocAdjustment {
    pub fn new(
        weights: SimplexWeights,
        priors: ClassPriors,
        delta_train: f64,
        divergence_kind: DivergenceKind,
    ) -> Result<Self> {
        if weights.len() != priors.len() {
            return Err(Error::DimensionMismatch {
                expected: priors.len(),
                got: weights.len(),
            });
        }
        let multipliers: Vec<f64> = weights.iter().zip(priors.as_slice()).map(|(g, p)| g / p).collect();
        if multipliers.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonFinite("adjustment multiplier".into()));
        }
        let log_multipliers = multipliers.iter().map(|b| b.ln()).collect();
        Ok(Self {
            multipliers,
            log_multipliers,
            weights,
            priors,
            delta_train,
            divergence_kind,
        })
    }

    /// The adjustment with `g = π̂`, i.e. all multipliers equal to one.
    pub fn identity(priors: ClassPriors) -> Self {
        let weights = priors.to_simplex();
        Self::new(weights, priors, 0.0, DivergenceKind::Kl).expect("identity is valid")
    }

    pub fn num_classes(&self) -> usize {
        self.multipliers.len()
    }

    pub fn multipliers(&self) -> &[f64] {
        &self.multipliers
    }

    /// `log β_i`; `-∞` where `g_i = 0`.
    pub fn log_multipliers(&self) -> &[f64] {
        &self.log_multipliers
    }

    pub fn weights(&self) -> &SimplexWeights {
        &self.weights
    }

    pub fn priors(&self) -> &ClassPriors {
        &self.priors
    }

    pub fn delta_train(&self) -> f64 {
        self.delta_train
    }

    pub fn divergence_kind(&self) -> DivergenceKind {
        self.divergence_kind
    }
}

/// Anything that maps a row of model scores to a predicted class.
pub trait Predictor {
    fn num_classes(&self) -> usize;

    /// Predicts the class of one row; `attribute` is consulted only by
    /// attribute-aware predictors.
    fn predict_row(&self, row: &[f64], kind: InputKind, attribute: Option<usize>) -> Result<usize>;
}

/// The unadjusted argmax classifier.
#[derive(Debug, Clone, Copy)]
pub struct Unadjusted {
    pub num_classes: usize,
}

impl Predictor for Unadjusted {
    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn predict_row(&self, row: &[f64], _kind: InputKind, _attribute: Option<usize>) -> Result<usize> {
        Ok(argmax(row))
    }
}

impl Predictor for PosthocAdjustment {
    fn num_classes(&self) -> usize {
        self.multipliers.len()
    }

    fn predict_row(&self, row: &[f64], kind: InputKind, _attribute: Option<usize>) -> Result<usize> {
        predict(row, self, kind)
    }
}

/// Index of the largest entry, ties to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Max-subtracted softmax.
pub fn softmax(logits: &[f64]) -> Result<SimplexWeights> {
    if logits.is_empty() {
        return Err(Error::InvalidArgument("softmax of an empty vector".into()));
    }
    if let Some(j) = logits.iter().position(|l| !l.is_finite()) {
        return Err(Error::NonFinite(format!("logit {j} is {}", logits[j])));
    }
    SimplexWeights::from_log_weights(logits)
}

/// `β ⊙ p / Σ_j β_j p_j`.
pub fn scale_scores(probs: &[f64], multipliers: &[f64]) -> Result<Vec<f64>> {
    if probs.len() != multipliers.len() {
        return Err(Error::DimensionMismatch {
            expected: multipliers.len(),
            got: probs.len(),
        });
    }
    let mut scaled: Vec<f64> = probs
        .iter()
        .zip(multipliers)
        .map(|(&p, &b)| if p == 0.0 || b == 0.0 { 0.0 } else { p * b })
        .collect();
    let total: f64 = scaled.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::DegenerateScores);
    }
    if !total.is_finite() {
        return Err(Error::NonFinite("adjusted score total".into()));
    }
    scaled.iter_mut().for_each(|s| *s /= total);
    Ok(scaled)
}

/// The rescaled class distribution `f_y ∝ β_y · p_y`.
pub fn adjusted_scores(probs: &SimplexWeights, adj: &PosthocAdjustment) -> Result<SimplexWeights> {
    let scaled = scale_scores(probs.as_slice(), adj.multipliers())?;
    SimplexWeights::from_unnormalized(scaled)
}

/// `argmax_y β_y · p_y` on probabilities.
pub fn argmax_multiplicative(probs: &[f64], multipliers: &[f64]) -> Result<usize> {
    if probs.len() != multipliers.len() {
        return Err(Error::DimensionMismatch {
            expected: multipliers.len(),
            got: probs.len(),
        });
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, (&p, &b)) in probs.iter().zip(multipliers).enumerate() {
        let s = if p == 0.0 || b == 0.0 { 0.0 } else { p * b };
        if best.is_none_or(|(_, top)| s > top) {
            best = Some((i, s));
        }
    }
    match best {
        Some((i, s)) if s > 0.0 => Ok(i),
        _ => Err(Error::DegenerateScores),
    }
}

/// `argmax_y Logit_y + log β_y` on logits.
pub fn argmax_additive(logits: &[f64], log_multipliers: &[f64]) -> Result<usize> {
    if logits.len() != log_multipliers.len() {
        return Err(Error::DimensionMismatch {
            expected: log_multipliers.len(),
            got: logits.len(),
        });
    }
    let shifted: Vec<f64> = logits.iter().zip(log_multipliers).map(|(l, lb)| l + lb).collect();
    let best = argmax(&shifted);
    if shifted[best] == f64::NEG_INFINITY {
        return Err(Error::DegenerateScores);
    }
    Ok(best)
}

/// Predicts the adjusted class of one row: multiplicatively on
/// probabilities, additively on logits.
pub fn predict(row: &[f64], adj: &PosthocAdjustment, kind: InputKind) -> Result<usize> {
    match kind {
        InputKind::Probabilities => argmax_multiplicative(row, adj.multipliers()),
        InputKind::Logits => argmax_additive(row, adj.log_multipliers()),
    }
}
