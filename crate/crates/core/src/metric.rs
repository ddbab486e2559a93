//! δ-worst accuracy: the smallest `g`-weighted accuracy over the divergence
//! ball `{g ∈ Δ_m : D(g, r) ≤ δ}`.
//!
//! The minimization is solved exactly through its one-dimensional dual.
//!
//! * KL: the minimizer is the tilted prior `g_i(μ) ∝ r_i exp(-acc_i / μ)`;
//!   `KL(g(μ), r)` decreases in `μ`, so `μ` is found by bisection on the
//!   constraint residual.
//! * Reverse KL: stationarity gives `g_i = μ r_i / (acc_i + ν)`. Eliminating
//!   `μ` through `Σ g_i = 1` leaves a single offset `s = ν + min acc > 0` with
//!   `g_i ∝ r_i / (acc_i - min acc + s)`, whose reverse KL decreases in `s`.
//!
//! Both bisections run in log space on the scale parameter and always return
//! the feasible end of the final bracket.
//!
//! [`delta_worst_grid_oracle`] enumerates a simplex lattice instead and is
//! kept as an independent check on the dual solvers.

use serde::{Deserialize, Serialize};

use crate::dataset::PredictionDataset;
use crate::divergence::{kl, Divergence, DivergenceKind, DivergenceSpec, SimplexWeights};
use crate::posthoc::{PosthocAdjustment, Predictor, Unadjusted};
use crate::{Error, Result};

/// Stop once `|D(g) - δ|` falls below this.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;
/// Iteration cap for every bisection.
pub const MAX_BISECTION_STEPS: usize = 200;

const SCALE_FLOOR: f64 = 1e-300;
const SCALE_CEILING: f64 = 1e300;

/// Per-class (or per-group) accuracies, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct AccuracyVector(Vec<f64>);

impl AccuracyVector {
    pub fn new(acc: Vec<f64>) -> Result<Self> {
        if let Some(i) = acc.iter().position(|a| !a.is_finite()) {
            return Err(Error::NonFinite(format!("accuracy {i} is {}", acc[i])));
        }
        if let Some(i) = acc.iter().position(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::InvalidArgument(format!(
                "accuracy {i} is {}, outside [0, 1]",
                acc[i]
            )));
        }
        Ok(Self(acc))
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

    /// Unweighted mean of the entries.
    pub fn mean(&self) -> f64 {
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

impl TryFrom<Vec<f64>> for AccuracyVector {
    type Error = Error;

    fn try_from(value: Vec<f64>) -> Result<Self> {
        Self::new(value)
    }
}

impl From<AccuracyVector> for Vec<f64> {
    fn from(value: AccuracyVector) -> Self {
        value.0
    }
}

/// The ambiguity set `{g : D(g, r) ≤ δ}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaBall {
    pub spec: DivergenceSpec,
    pub delta: f64,
}

impl DeltaBall {
    pub fn new(spec: DivergenceSpec, delta: f64) -> Result<Self> {
        if delta.is_nan() || delta < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "radius must be nonnegative, got {delta}"
            )));
        }
        Ok(Self { spec, delta })
    }

    pub fn uniform(kind: DivergenceKind, m: usize, delta: f64) -> Result<Self> {
        Self::new(DivergenceSpec::uniform(kind, m), delta)
    }

    pub fn contains(&self, g: &SimplexWeights) -> Result<bool> {
        Ok(self.spec.value(g)?.within(self.delta))
    }
}

/// Optimal value of a weighted objective over a ball and an attaining point.
#[derive(Debug, Clone, PartialEq)]
pub struct WorstCase {
    pub value: f64,
    pub weights: SimplexWeights,
}

/// `min_{g ∈ ball} Σ_i g_i acc_i` and an attaining `g`.
pub fn delta_worst(acc: &AccuracyVector, ball: &DeltaBall) -> Result<WorstCase> {
    minimize_weighted(acc.as_slice(), ball)
}

/// `max_{g ∈ ball} Σ_i g_i loss_i` (the distributionally robust loss of a
/// fixed per-class loss vector) and an attaining `g`.
pub fn worst_case_loss(losses: &[f64], ball: &DeltaBall) -> Result<WorstCase> {
    let negated: Vec<f64> = losses.iter().map(|l| -l).collect();
    let out = minimize_weighted(&negated, ball)?;
    Ok(WorstCase {
        value: -out.value,
        weights: out.weights,
    })
}

/// Minimizes `Σ g_i values_i` over the ball for arbitrary finite values.
pub fn minimize_weighted(values: &[f64], ball: &DeltaBall) -> Result<WorstCase> {
    let target = &ball.spec.target;
    let m = target.len();
    if values.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: values.len(),
        });
    }
    if m < 2 {
        return Err(Error::InvalidArgument("need at least two classes".into()));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("objective entry {i} is {}", values[i])));
    }
    if !target.has_full_support() {
        return Err(Error::InvalidArgument("the target prior must have full support".into()));
    }
    if ball.delta.is_nan() || ball.delta < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "radius must be nonnegative, got {}",
            ball.delta
        )));
    }

    let lowest = values.iter().copied().fold(f64::INFINITY, f64::min);
    let highest = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lowest == highest {
        return Ok(WorstCase {
            value: lowest,
            weights: target.clone(),
        });
    }
    if ball.delta == 0.0 {
        return Ok(WorstCase {
            value: target.dot(values),
            weights: target.clone(),
        });
    }
    let worst = values.iter().position(|&v| v == lowest).expect("minimum is attained");
    if ball.delta == f64::INFINITY {
        return Ok(vertex_solution(lowest, m, worst));
    }

    match ball.spec.kind {
        DivergenceKind::Kl => minimize_kl(values, lowest, worst, target, ball.delta),
        DivergenceKind::ReverseKl => minimize_reverse_kl(values, lowest, target, ball.delta),
    }
}

fn vertex_solution(lowest: f64, m: usize, worst: usize) -> WorstCase {
    WorstCase {
        value: lowest,
        weights: SimplexWeights::vertex(m, worst),
    }
}

fn minimize_kl(values: &[f64], lowest: f64, worst: usize, target: &SimplexWeights, delta: f64) -> Result<WorstCase> {
    let r = target.as_slice();
    if delta >= -r[worst].ln() {
        return Ok(vertex_solution(lowest, r.len(), worst));
    }
    // With tied minima the cheapest point achieving the minimum is the prior
    // restricted to the tied set, at KL = -log(its mass).
    let tied_mass: f64 = values
        .iter()
        .zip(r)
        .filter(|(&v, _)| v == lowest)
        .map(|(_, &ri)| ri)
        .sum();
    if delta >= -tied_mass.ln() {
        let restricted = values
            .iter()
            .zip(r)
            .map(|(&v, &ri)| if v == lowest { ri } else { 0.0 })
            .collect();
        return Ok(WorstCase {
            value: lowest,
            weights: SimplexWeights::from_unnormalized(restricted)?,
        });
    }

    let log_r: Vec<f64> = r.iter().map(|x| x.ln()).collect();
    let tilted = |mu: f64| -> Result<(SimplexWeights, f64)> {
        let logits: Vec<f64> = values
            .iter()
            .zip(&log_r)
            .map(|(&v, &lr)| lr - (v - lowest) / mu)
            .collect();
        let g = SimplexWeights::from_log_weights(&logits)?;
        let d = kl(g.as_slice(), r).to_f64();
        Ok((g, d - delta))
    };
    let g = bisect_decreasing(tilted, 1e-12, 1e6)?;
    Ok(WorstCase {
        value: g.dot(values).max(lowest),
        weights: g,
    })
}

fn minimize_reverse_kl(values: &[f64], lowest: f64, target: &SimplexWeights, delta: f64) -> Result<WorstCase> {
    let r = target.as_slice();
    let log_r: Vec<f64> = r.iter().map(|x| x.ln()).collect();
    let stationary = |offset: f64| -> Result<(SimplexWeights, f64)> {
        let logits: Vec<f64> = values
            .iter()
            .zip(&log_r)
            .map(|(&v, &lr)| lr - (v - lowest + offset).ln())
            .collect();
        let g = SimplexWeights::from_log_weights(&logits)?;
        let d = kl(r, g.as_slice()).to_f64();
        Ok((g, d - delta))
    };
    let g = bisect_decreasing(stationary, 1e-12, 1e6)?;
    Ok(WorstCase {
        value: g.dot(values).max(lowest),
        weights: g,
    })
}

/// Finds the scale where a decreasing residual crosses zero, returning the
/// point on the feasible side (`residual ≤ 0`).
fn bisect_decreasing<F>(eval: F, mut lo: f64, mut hi: f64) -> Result<SimplexWeights>
where
    F: Fn(f64) -> Result<(SimplexWeights, f64)>,
{
    let (mut g_lo, mut h_lo) = eval(lo)?;
    while h_lo < 0.0 && lo > SCALE_FLOOR {
        hi = lo;
        lo = (lo * 1e-4).max(SCALE_FLOOR);
        (g_lo, h_lo) = eval(lo)?;
    }
    if h_lo <= 0.0 {
        // The radius is (numerically) as large as the limit point; the
        // smallest scale is already feasible.
        return Ok(g_lo);
    }
    let (mut g_hi, mut h_hi) = eval(hi)?;
    while h_hi > 0.0 {
        if hi >= SCALE_CEILING {
            return Err(Error::Numerical("could not bracket the divergence constraint".into()));
        }
        lo = hi;
        hi = (hi * 1e4).min(SCALE_CEILING);
        (g_hi, h_hi) = eval(hi)?;
    }
    for _ in 0..MAX_BISECTION_STEPS {
        if h_hi.abs() <= RESIDUAL_TOLERANCE {
            break;
        }
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        let (g_mid, h_mid) = eval(mid)?;
        if h_mid > 0.0 {
            lo = mid;
        } else {
            hi = mid;
            g_hi = g_mid;
            h_hi = h_mid;
        }
    }
    Ok(g_hi)
}

/// Largest dimension accepted by the lattice oracle.
pub const ORACLE_MAX_CLASSES: usize = 4;

/// Minimum of `Σ g_i acc_i` over the feasible points of the simplex lattice
/// with spacing `step`.
pub fn delta_worst_grid_oracle(acc: &AccuracyVector, ball: &DeltaBall, step: f64) -> Result<f64> {
    let m = acc.len();
    if m != ball.spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: ball.spec.dim(),
            got: m,
        });
    }
    if !(2..=ORACLE_MAX_CLASSES).contains(&m) {
        return Err(Error::InvalidArgument(format!(
            "grid oracle supports 2..={ORACLE_MAX_CLASSES} classes, got {m}"
        )));
    }
    if !(1e-4..=1e-1).contains(&step) {
        return Err(Error::InvalidArgument(format!("grid step {step} outside [1e-4, 1e-1]")));
    }
    let divisions = (1.0 / step).round() as usize;
    let r = ball.spec.target.as_slice();
    let kind = ball.spec.kind;
    let values = acc.as_slice();
    let mut best = f64::INFINITY;
    let mut counts = vec![0usize; m];
    let mut g = vec![0.0; m];
    visit_compositions(&mut counts, 0, divisions, &mut |counts| {
        for (gi, &c) in g.iter_mut().zip(counts.iter()) {
            *gi = c as f64 / divisions as f64;
        }
        let value: f64 = g.iter().zip(values).map(|(a, b)| a * b).sum();
        if value >= best {
            return;
        }
        let d = match kind {
            DivergenceKind::Kl => kl(&g, r),
            DivergenceKind::ReverseKl => kl(r, &g),
        };
        if d.within(ball.delta) {
            best = value;
        }
    });
    if best.is_finite() {
        Ok(best)
    } else {
        Err(Error::Numerical(
            "no lattice point lies inside the ball; use a finer step".into(),
        ))
    }
}

fn visit_compositions<F: FnMut(&[usize])>(counts: &mut Vec<usize>, index: usize, remaining: usize, visit: &mut F) {
    if index + 1 == counts.len() {
        counts[index] = remaining;
        visit(counts);
        return;
    }
    for c in 0..=remaining {
        counts[index] = c;
        visit_compositions(counts, index + 1, remaining - c, visit);
    }
}

/// One point of a robustness curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub delta: f64,
    pub value: f64,
    pub weights: SimplexWeights,
}

/// δ-worst accuracy as a function of the radius.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RobustCurve {
    pub points: Vec<CurvePoint>,
}

impl RobustCurve {
    pub fn deltas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.delta).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }
}

/// Solves [`delta_worst`] at each radius in `deltas` (strictly increasing).
pub fn robust_curve(acc: &AccuracyVector, spec: &DivergenceSpec, deltas: &[f64]) -> Result<RobustCurve> {
    if let Some(w) = deltas
        .windows(2)
        .find(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less))
    {
        return Err(Error::InvalidArgument(format!(
            "radii must be strictly increasing ({} then {})",
            w[0], w[1]
        )));
    }
    let points = deltas
        .iter()
        .map(|&delta| {
            let ball = DeltaBall::new(spec.clone(), delta)?;
            let solved = delta_worst(acc, &ball)?;
            Ok(CurvePoint {
                delta,
                value: solved.value,
                weights: solved.weights,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RobustCurve { points })
}

/// Fraction of each class's rows whose (adjusted) prediction is correct.
pub fn per_class_accuracy(
    dataset: &PredictionDataset,
    adjustment: Option<&PosthocAdjustment>,
) -> Result<AccuracyVector> {
    match adjustment {
        Some(adj) => per_class_accuracy_with(dataset, adj),
        None => per_class_accuracy_with(
            dataset,
            &Unadjusted {
                num_classes: dataset.num_classes(),
            },
        ),
    }
}

/// [`per_class_accuracy`] for any [`Predictor`].
pub fn per_class_accuracy_with<P: Predictor + ?Sized>(
    dataset: &PredictionDataset,
    predictor: &P,
) -> Result<AccuracyVector> {
    let m = dataset.num_classes();
    if predictor.num_classes() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: predictor.num_classes(),
        });
    }
    dataset.require_all_classes()?;
    let mut correct = vec![0usize; m];
    for (i, row) in dataset.rows().enumerate() {
        let y = dataset.label(i);
        if predictor.predict_row(row, dataset.kind(), dataset.attribute(i))? == y {
            correct[y] += 1;
        }
    }
    AccuracyVector::new(
        correct
            .iter()
            .zip(dataset.class_counts())
            .map(|(&c, &n)| c as f64 / n as f64)
            .collect(),
    )
}

/// Divergence of `g` from the ball's target, for feasibility checks.
pub fn divergence_from_target(ball: &DeltaBall, g: &SimplexWeights) -> Result<Divergence> {
    ball.spec.value(g)
}
