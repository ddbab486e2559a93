//! Divergences between points of the probability simplex.
//!
//! Only the two divergences used to define the ambiguity set are provided:
//! `KL(g, r) = Σ g_i log(g_i / r_i)` and its reverse orientation
//! `KL(r, g)`. Both follow the `0 · log 0 = 0` convention and report support
//! violations as [`Divergence::Infinite`] rather than as a large float.

use std::fmt;
use std::ops::Index;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Tolerance on `|Σ w_i - 1|` accepted by [`SimplexWeights::new`].
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// A point on the probability simplex: nonnegative entries summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SimplexWeights(Vec<f64>);

impl SimplexWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidSimplex("empty weight vector".into()));
        }
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidSimplex(format!("entry {i} is {w}")));
            }
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::InvalidSimplex(format!("entries sum to {total}")));
        }
        Ok(Self(weights))
    }

    /// The uniform point `[1/m, ..., 1/m]`.
    pub fn uniform(m: usize) -> Self {
        assert!(m > 0, "uniform weights need at least one entry");
        Self(vec![1.0 / m as f64; m])
    }

    /// The vertex `e_index` of the `m`-simplex.
    pub fn vertex(m: usize, index: usize) -> Self {
        assert!(index < m, "vertex index out of range");
        let mut w = vec![0.0; m];
        w[index] = 1.0;
        Self(w)
    }

    /// Normalizes a nonnegative vector with positive finite mass.
    pub fn from_unnormalized(mut weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidSimplex(
                "unnormalized weights must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidSimplex(format!("total mass is {total}")));
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Self(weights))
    }

    /// Normalizes `exp(log_weights)` in log space. Entries equal to `-inf`
    /// receive zero mass; at least one entry must be finite.
    pub fn from_log_weights(log_weights: &[f64]) -> Result<Self> {
        let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::Numerical(format!("log-weights have no finite maximum ({max})")));
        }
        let exps: Vec<f64> = log_weights.iter().map(|&l| (l - max).exp()).collect();
        Self::from_unnormalized(exps)
    }

    /// Raises every entry to at least `floor` and renormalizes.
    pub fn floored(&self, floor: f64) -> Self {
        if self.0.iter().all(|&w| w >= floor) {
            return self.clone();
        }
        let raised: Vec<f64> = self.0.iter().map(|&w| w.max(floor)).collect();
        Self::from_unnormalized(raised).expect("floored weights keep positive mass")
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

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// `Σ_i w_i · values_i`.
    pub fn dot(&self, values: &[f64]) -> f64 {
        self.0.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    pub fn has_full_support(&self) -> bool {
        self.0.iter().all(|&w| w > 0.0)
    }
}

impl TryFrom<Vec<f64>> for SimplexWeights {
    type Error = Error;

    fn try_from(value: Vec<f64>) -> Result<Self> {
        Self::new(value)
    }
}

impl From<SimplexWeights> for Vec<f64> {
    fn from(value: SimplexWeights) -> Self {
        value.0
    }
}

impl AsRef<[f64]> for SimplexWeights {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl Index<usize> for SimplexWeights {
    type Output = f64;

    fn index(&self, index: usize) -> &f64 {
        &self.0[index]
    }
}

/// Which orientation of the KL divergence defines the ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DivergenceKind {
    /// `KL(g, r) = Σ g_i log(g_i / r_i)`.
    #[serde(rename = "kl")]
    Kl,
    /// `KL(r, g) = Σ r_i log(r_i / g_i)`.
    #[serde(rename = "rkl")]
    ReverseKl,
}

impl fmt::Display for DivergenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DivergenceKind::Kl => f.pad("kl"),
            DivergenceKind::ReverseKl => f.pad("rkl"),
        }
    }
}

impl FromStr for DivergenceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "kl" => Ok(DivergenceKind::Kl),
            "rkl" | "reverse-kl" | "reverse_kl" => Ok(DivergenceKind::ReverseKl),
            other => Err(Error::InvalidArgument(format!(
                "unknown divergence '{other}' (expected kl or rkl)"
            ))),
        }
    }
}

/// Value of a divergence: finite and nonnegative, or infinite when the
/// support condition fails.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Divergence {
    Finite(f64),
    Infinite,
}

impl Divergence {
    /// The value as a float, mapping [`Divergence::Infinite`] to `+∞`.
    pub fn to_f64(self) -> f64 {
        match self {
            Divergence::Finite(v) => v,
            Divergence::Infinite => f64::INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Divergence::Finite(_))
    }

    /// Whether the value lies within radius `delta`.
    pub fn within(self, delta: f64) -> bool {
        match self {
            Divergence::Finite(v) => v <= delta,
            Divergence::Infinite => false,
        }
    }
}

/// A divergence together with its reference point `r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceSpec {
    pub kind: DivergenceKind,
    pub target: SimplexWeights,
}

impl DivergenceSpec {
    pub fn new(kind: DivergenceKind, target: SimplexWeights) -> Self {
        Self { kind, target }
    }

    /// The divergence against the uniform prior over `m` outcomes.
    pub fn uniform(kind: DivergenceKind, m: usize) -> Self {
        Self::new(kind, SimplexWeights::uniform(m))
    }

    pub fn dim(&self) -> usize {
        self.target.len()
    }

    fn check(&self, g: &SimplexWeights) -> Result<()> {
        if g.len() != self.target.len() {
            return Err(Error::DimensionMismatch {
                expected: self.target.len(),
                got: g.len(),
            });
        }
        if g.len() < 2 {
            return Err(Error::InvalidArgument("divergences need at least two outcomes".into()));
        }
        Ok(())
    }

    /// `D(g, r)` for this spec's kind and target.
    pub fn value(&self, g: &SimplexWeights) -> Result<Divergence> {
        self.check(g)?;
        Ok(match self.kind {
            DivergenceKind::Kl => kl(g.as_slice(), self.target.as_slice()),
            DivergenceKind::ReverseKl => kl(self.target.as_slice(), g.as_slice()),
        })
    }

    /// Gradient of `D(·, r)` at an interior point `g`.
    pub fn gradient(&self, g: &SimplexWeights) -> Result<Vec<f64>> {
        self.check(g)?;
        if let Some(index) = g.iter().position(|&w| w <= 0.0) {
            return Err(Error::BoundaryGradient { index });
        }
        let r = self.target.as_slice();
        let grad: Vec<f64> = match self.kind {
            DivergenceKind::Kl => g.iter().zip(r).map(|(&gi, &ri)| (gi / ri).ln() + 1.0).collect(),
            DivergenceKind::ReverseKl => g.iter().zip(r).map(|(&gi, &ri)| -ri / gi).collect(),
        };
        if grad.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("KL gradient where the target has zero mass".into()));
        }
        Ok(grad)
    }
}

/// `Σ p_i log(p_i / q_i)` with `0 · log(0 / x) = 0`.
pub(crate) fn kl(p: &[f64], q: &[f64]) -> Divergence {
    let mut total = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Divergence::Infinite;
        }
        total += pi * (pi / qi).ln();
    }
    Divergence::Finite(total.max(0.0))
}
