//! The saddle-point learner.
//!
//! On a validation set with empirical prior `π̂`, the learner alternates
//!
//! 1. a projected gradient step on the multiplier,
//!    `λ ← clip_[0,R](λ - η_λ (δ - D(g, r)))`;
//! 2. an exponentiated-gradient step on the class weights `g` (either the
//!    simplified `g_i ∝ r_i exp(ℓ̂_i / λ)` or the closed-form KL mirror step);
//! 3. a Bayes-optimal rescoring `f_y ∝ (g_y / π̂_y) η̂_y(x)` of the frozen
//!    model's probabilities,
//!
//! where `ℓ̂_i` is the class-conditional validation loss of the current
//! rescored classifier. The classifier covered by the convergence analysis
//! is the average `f̄ = (1/T) Σ_t f^(t)`; the last iterate and the iterate
//! with the best validation robust loss are also available.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{InputKind, PredictionDataset};
use crate::divergence::{Divergence, DivergenceSpec, SimplexWeights};
use crate::metric::{worst_case_loss, DeltaBall};
use crate::posthoc::{argmax, predict, scale_scores, ClassPriors, PosthocAdjustment, Predictor};
use crate::{Error, Result};

/// Probabilities are floored here before taking logs in the log loss.
pub const LOG_LOSS_FLOOR: f64 = 1e-12;

/// Default cap on the number of iterations when it is derived from the
/// validation size.
pub const DEFAULT_MAX_ITERATIONS: usize = 2000;

/// Per-example loss used to form the class-conditional losses `ℓ̂_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum LossKind {
    #[default]
    #[serde(rename = "zero_one")]
    ZeroOne,
    #[serde(rename = "log_loss")]
    LogLoss,
}

/// Which update rule moves `g`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum GUpdate {
    /// `g_i ∝ r_i exp(ℓ̂_i / λ)`, recomputed from the target each step.
    #[default]
    #[serde(rename = "simplified")]
    Simplified,
    /// `g_i ∝ (g_i exp(η_g ℓ̂_i + λ η_g log r_i))^(1 / (1 + λ η_g))`.
    #[serde(rename = "eg")]
    EgClosedForm,
}

/// Which classifier the learner hands back.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum ScorerMode {
    #[default]
    #[serde(rename = "average")]
    Average,
    #[serde(rename = "last")]
    Last,
    #[serde(rename = "best_validation")]
    BestValidation,
}

macro_rules! keyword_enum {
    ($ty:ty { $($variant:path => $name:literal),+ $(,)? }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                match self {
                    $($variant => f.pad($name),)+
                }
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($variant),)+
                    other => Err(Error::InvalidArgument(format!(
                        "unknown {} '{other}'",
                        stringify!($ty)
                    ))),
                }
            }
        }
    };
}

keyword_enum!(LossKind { LossKind::ZeroOne => "zero_one", LossKind::LogLoss => "log_loss" });
keyword_enum!(GUpdate { GUpdate::Simplified => "simplified", GUpdate::EgClosedForm => "eg" });
keyword_enum!(ScorerMode {
    ScorerMode::Average => "average",
    ScorerMode::Last => "last",
    ScorerMode::BestValidation => "best_validation",
});

/// Hyper-parameters of one learning run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    /// Radius `δ` of the ambiguity set the adjustment should be robust to.
    pub delta_train: f64,
    pub divergence: DivergenceSpec,
    pub iterations: usize,
    pub eta_lambda: f64,
    pub eta_g: f64,
    /// Upper clip `R` for `λ`.
    pub lambda_cap: f64,
    pub loss: LossKind,
    pub g_update: GUpdate,
    pub scorer_mode: ScorerMode,
    pub lambda_init: f64,
    pub g_floor: f64,
}

impl LearnerConfig {
    /// The step-size schedule of the convergence analysis with plug-in
    /// constants: loss bound 1, `Z = max_i 1/π̂_i`, divergence bound and
    /// Lipschitz constant `log m` and 1, `T = min(n, 2000)`.
    pub fn with_defaults(
        divergence: DivergenceSpec,
        delta_train: f64,
        priors: &ClassPriors,
        validation_size: usize,
    ) -> Result<Self> {
        Self::with_iterations(
            divergence,
            delta_train,
            priors,
            validation_size.clamp(1, DEFAULT_MAX_ITERATIONS),
        )
    }

    /// The same schedule for an explicit iteration count.
    pub fn with_iterations(
        divergence: DivergenceSpec,
        delta_train: f64,
        priors: &ClassPriors,
        iterations: usize,
    ) -> Result<Self> {
        if iterations == 0 {
            return Err(Error::InvalidArgument("iterations must be at least 1".into()));
        }
        if !(delta_train > 0.0 && delta_train.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "default schedule needs a positive finite radius, got {delta_train}"
            )));
        }
        let m = priors.len();
        let z = priors.as_slice().iter().map(|p| 1.0 / p).fold(f64::MIN, f64::max);
        let loss_bound = 1.0;
        let divergence_bound = (m as f64).ln();
        let divergence_lipschitz = 1.0;
        let t = iterations as f64;
        let lambda_cap = 2.0 * loss_bound * z / delta_train;
        let eta_lambda = lambda_cap / (divergence_bound * t.sqrt());
        let eta_g = ((m as f64).ln() / t).sqrt() / (2.0 * loss_bound * z + lambda_cap * divergence_lipschitz);
        Ok(Self {
            delta_train,
            divergence,
            iterations,
            eta_lambda,
            eta_g,
            lambda_cap,
            loss: LossKind::default(),
            g_update: GUpdate::default(),
            scorer_mode: ScorerMode::default(),
            lambda_init: 1.0_f64.min(lambda_cap),
            g_floor: 1e-12,
        })
    }

    pub fn ball(&self) -> Result<DeltaBall> {
        DeltaBall::new(self.divergence.clone(), self.delta_train)
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(what.to_string()));
        if self.divergence.dim() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: self.divergence.dim(),
            });
        }
        if !(self.delta_train >= 0.0 && self.delta_train.is_finite()) {
            return bad("delta_train must be finite and nonnegative");
        }
        if self.iterations == 0 {
            return bad("iterations must be at least 1");
        }
        if !(self.eta_lambda > 0.0 && self.eta_lambda.is_finite()) {
            return bad("eta_lambda must be positive");
        }
        if !(self.eta_g > 0.0 && self.eta_g.is_finite()) {
            return bad("eta_g must be positive");
        }
        if !(self.lambda_cap > 0.0 && self.lambda_cap.is_finite()) {
            return bad("lambda_cap must be positive");
        }
        if !(0.0..=self.lambda_cap).contains(&self.lambda_init) {
            return bad("lambda_init must lie in [0, lambda_cap]");
        }
        if !(self.g_floor > 0.0 && self.g_floor <= 1.0 / m as f64) {
            return bad("g_floor must lie in (0, 1/m]");
        }
        Ok(())
    }
}

/// State of the saddle-point iteration at step `t`, before the updates.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub lambda: f64,
    pub weights: SimplexWeights,
    /// `ℓ̂^(t)`: class-conditional validation loss of `f^(t)`.
    pub losses: Vec<f64>,
    /// Per-class validation accuracy of `f^(t)`.
    pub accuracies: Vec<f64>,
    /// `Σ g_i ℓ̂_i - λ (D(g, r) - δ)`.
    pub lagrangian: f64,
    /// `max_{g' in ball} Σ g'_i ℓ̂_i`: the empirical robust loss of `f^(t)`.
    pub robust_loss: f64,
}

/// Iterates `0..=T` of one run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SaddleTrace {
    pub records: Vec<IterationRecord>,
}

impl SaddleTrace {
    /// `min_{s ≤ t}` robust loss, for every `t`.
    pub fn best_so_far(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.records
            .iter()
            .map(|r| {
                best = best.min(r.robust_loss);
                best
            })
            .collect()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }
}

/// The averaged classifier `f̄(x) = (1/T) Σ_t f^(t)(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedScorer {
    g_trace: Vec<SimplexWeights>,
    multipliers: Vec<Vec<f64>>,
    priors: ClassPriors,
    mode: ScorerMode,
}

impl AveragedScorer {
    pub fn new(g_trace: Vec<SimplexWeights>, priors: ClassPriors, mode: ScorerMode) -> Result<Self> {
        if g_trace.is_empty() {
            return Err(Error::InvalidArgument("averaged scorer needs a nonempty trace".into()));
        }
        let m = priors.len();
        if let Some(g) = g_trace.iter().find(|g| g.len() != m) {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: g.len(),
            });
        }
        let multipliers = g_trace
            .iter()
            .map(|g| g.iter().zip(priors.as_slice()).map(|(w, p)| w / p).collect())
            .collect();
        Ok(Self {
            g_trace,
            multipliers,
            priors,
            mode,
        })
    }

    pub fn g_trace(&self) -> &[SimplexWeights] {
        &self.g_trace
    }

    pub fn priors(&self) -> &ClassPriors {
        &self.priors
    }

    pub fn mode(&self) -> ScorerMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.g_trace.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g_trace.is_empty()
    }

    /// The averaged rescored distribution of one row of probabilities.
    pub fn averaged_scores(&self, probs: &[f64]) -> Result<Vec<f64>> {
        let mut total = vec![0.0; probs.len()];
        for beta in &self.multipliers {
            let scored = scale_scores(probs, beta)?;
            total.iter_mut().zip(&scored).for_each(|(t, s)| *t += s);
        }
        let t = self.multipliers.len() as f64;
        total.iter_mut().for_each(|v| *v /= t);
        Ok(total)
    }
}

impl Predictor for AveragedScorer {
    fn num_classes(&self) -> usize {
        self.priors.len()
    }

    fn predict_row(&self, row: &[f64], kind: InputKind, _attribute: Option<usize>) -> Result<usize> {
        averaged_predict(row, kind, self)
    }
}

/// Argmax of the averaged rescored distribution (ties to the lowest index).
pub fn averaged_predict(row: &[f64], kind: InputKind, scorer: &AveragedScorer) -> Result<usize> {
    let probs = match kind {
        InputKind::Probabilities => row.to_vec(),
        InputKind::Logits => crate::posthoc::softmax(row)?.into_vec(),
    };
    Ok(argmax(&scorer.averaged_scores(&probs)?))
}

/// `clip_[0,R](λ - η_λ (δ - D(g, r)))`; an infinite divergence pushes `λ` to
/// the cap.
pub fn lambda_step(lambda: f64, g: &SimplexWeights, ball: &DeltaBall, eta_lambda: f64, cap: f64) -> Result<f64> {
    let next = match ball.spec.value(g)? {
        Divergence::Finite(d) => lambda - eta_lambda * (ball.delta - d),
        Divergence::Infinite => cap,
    };
    Ok(next.clamp(0.0, cap))
}

fn check_losses(losses: &[f64], m: usize) -> Result<()> {
    if losses.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: losses.len(),
        });
    }
    if let Some(i) = losses.iter().position(|l| !l.is_finite()) {
        return Err(Error::NonFinite(format!("loss of class {i} is {}", losses[i])));
    }
    Ok(())
}

/// `g_i ∝ r_i exp(ℓ̂_i / λ)`, floored at `floor`. At `λ = 0` this is the
/// limit: the target mass restricted to the classes with the largest loss.
pub fn g_step_simplified(target: &SimplexWeights, losses: &[f64], lambda: f64, floor: f64) -> Result<SimplexWeights> {
    check_losses(losses, target.len())?;
    if lambda.is_nan() || lambda < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "lambda must be nonnegative, got {lambda}"
        )));
    }
    let g = if lambda == 0.0 {
        let top = losses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let restricted = losses
            .iter()
            .zip(target.iter())
            .map(|(&l, &r)| if l == top { r } else { 0.0 })
            .collect();
        SimplexWeights::from_unnormalized(restricted)?
    } else {
        let logits: Vec<f64> = losses
            .iter()
            .zip(target.iter())
            .map(|(&l, &r)| r.ln() + l / lambda)
            .collect();
        SimplexWeights::from_log_weights(&logits)?
    };
    Ok(g.floored(floor))
}

/// The closed-form mirror-ascent step on the KL-regularized Lagrangian,
/// normalized and floored at `floor`.
pub fn g_step_eg_closed_form(
    g: &SimplexWeights,
    losses: &[f64],
    lambda: f64,
    eta_g: f64,
    target: &SimplexWeights,
    floor: f64,
) -> Result<SimplexWeights> {
    check_losses(losses, g.len())?;
    if target.len() != g.len() {
        return Err(Error::DimensionMismatch {
            expected: g.len(),
            got: target.len(),
        });
    }
    if !(lambda >= 0.0 && eta_g > 0.0) {
        return Err(Error::InvalidArgument("need lambda >= 0 and eta_g > 0".into()));
    }
    let shrink = 1.0 + lambda * eta_g;
    let logits: Vec<f64> = g
        .iter()
        .zip(losses)
        .zip(target.iter())
        .map(|((&gi, &l), &r)| {
            let pull = if lambda == 0.0 { 0.0 } else { lambda * eta_g * r.ln() };
            (gi.ln() + eta_g * l + pull) / shrink
        })
        .collect();
    Ok(SimplexWeights::from_log_weights(&logits)?.floored(floor))
}

/// Walks a validation set computing class-conditional losses and accuracies
/// of rescored classifiers.
struct Evaluator<'a> {
    dataset: &'a PredictionDataset,
    probs: Option<Vec<f64>>,
}

impl<'a> Evaluator<'a> {
    fn new(dataset: &'a PredictionDataset, loss: LossKind) -> Result<Self> {
        dataset.require_all_classes()?;
        let probs = match (loss, dataset.kind()) {
            (LossKind::LogLoss, InputKind::Logits) => {
                Some((0..dataset.len()).flat_map(|i| dataset.probabilities(i)).collect())
            }
            _ => None,
        };
        Ok(Self { dataset, probs })
    }

    fn probabilities(&self, i: usize) -> &[f64] {
        let m = self.dataset.num_classes();
        match &self.probs {
            Some(p) => &p[i * m..(i + 1) * m],
            None => self.dataset.row(i),
        }
    }

    /// Returns `(losses, accuracies)` per class.
    fn evaluate(&self, adj: &PosthocAdjustment, loss: LossKind) -> Result<(Vec<f64>, Vec<f64>)> {
        let ds = self.dataset;
        let m = ds.num_classes();
        let mut loss_sum = vec![0.0; m];
        let mut correct = vec![0usize; m];
        for (i, row) in ds.rows().enumerate() {
            let y = ds.label(i);
            let hit = predict(row, adj, ds.kind())? == y;
            if hit {
                correct[y] += 1;
            }
            loss_sum[y] += match loss {
                LossKind::ZeroOne => f64::from(u8::from(!hit)),
                LossKind::LogLoss => {
                    let scored = scale_scores(self.probabilities(i), adj.multipliers())?;
                    -scored[y].max(LOG_LOSS_FLOOR).ln()
                }
            };
        }
        let counts = ds.class_counts();
        let losses: Vec<f64> = loss_sum.iter().zip(counts).map(|(s, &n)| s / n as f64).collect();
        let accuracies = correct.iter().zip(counts).map(|(&c, &n)| c as f64 / n as f64).collect();
        if losses.iter().any(|l| !l.is_finite()) {
            return Err(Error::NonFinite("class-conditional loss".into()));
        }
        Ok((losses, accuracies))
    }
}

/// Class-conditional mean loss of the rescored classifier.
pub fn per_class_loss(dataset: &PredictionDataset, adj: &PosthocAdjustment, loss: LossKind) -> Result<Vec<f64>> {
    if adj.num_classes() != dataset.num_classes() {
        return Err(Error::DimensionMismatch {
            expected: dataset.num_classes(),
            got: adj.num_classes(),
        });
    }
    Ok(Evaluator::new(dataset, loss)?.evaluate(adj, loss)?.0)
}

/// Everything a learning run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnOutcome {
    /// The adjustment selected by the scorer mode. In average mode this is
    /// the rescaling by the mean of the `g` trace, a single-vector summary of
    /// the averaged scorer.
    pub adjustment: PosthocAdjustment,
    pub scorer: AveragedScorer,
    pub trace: SaddleTrace,
    /// Trace index of the selected iterate (last and best-validation modes).
    pub selected_iteration: Option<usize>,
}

impl LearnOutcome {
    /// The classifier the scorer mode asks for.
    pub fn predictor(&self) -> &dyn Predictor {
        match self.scorer.mode() {
            ScorerMode::Average => &self.scorer,
            ScorerMode::Last | ScorerMode::BestValidation => &self.adjustment,
        }
    }
}

/// Runs the saddle-point procedure on a validation set.
pub fn learn(dataset: &PredictionDataset, priors: &ClassPriors, config: &LearnerConfig) -> Result<LearnOutcome> {
    let m = dataset.num_classes();
    if priors.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: priors.len(),
        });
    }
    config.validate(m)?;
    let ball = config.ball()?;
    let target = &config.divergence.target;
    let kind = config.divergence.kind;
    let evaluator = Evaluator::new(dataset, config.loss)?;
    let adjust = |g: &SimplexWeights| PosthocAdjustment::new(g.clone(), priors.clone(), config.delta_train, kind);

    let mut g = target.floored(config.g_floor);
    let mut lambda = config.lambda_init;
    let mut records = Vec::with_capacity(config.iterations + 1);
    let mut g_trace = Vec::with_capacity(config.iterations);

    for t in 0..=config.iterations {
        let (losses, accuracies) = evaluator.evaluate(&adjust(&g)?, config.loss)?;
        let divergence = ball.spec.value(&g)?.to_f64();
        let lagrangian = g.dot(&losses) - lambda * (divergence - config.delta_train);
        let robust_loss = worst_case_loss(&losses, &ball)?.value;
        records.push(IterationRecord {
            iteration: t,
            lambda,
            weights: g.clone(),
            losses: losses.clone(),
            accuracies,
            lagrangian,
            robust_loss,
        });
        if t == config.iterations {
            break;
        }
        let next = match config.g_update {
            GUpdate::Simplified => g_step_simplified(target, &losses, lambda, config.g_floor)?,
            GUpdate::EgClosedForm => g_step_eg_closed_form(&g, &losses, lambda, config.eta_g, target, config.g_floor)?,
        };
        lambda = lambda_step(lambda, &g, &ball, config.eta_lambda, config.lambda_cap)?;
        g = next;
        g_trace.push(g.clone());
    }

    let trace = SaddleTrace { records };
    let (adjustment, selected_iteration) = match config.scorer_mode {
        ScorerMode::Last => (adjust(&g)?, Some(config.iterations)),
        ScorerMode::BestValidation => {
            let best = select_best(&trace);
            (adjust(&trace.records[best].weights)?, Some(best))
        }
        ScorerMode::Average => (adjust(&mean_weights(&g_trace)?)?, None),
    };
    let scorer = AveragedScorer::new(g_trace, priors.clone(), config.scorer_mode)?;
    Ok(LearnOutcome {
        adjustment,
        scorer,
        trace,
        selected_iteration,
    })
}

/// Earliest iterate with the smallest validation robust loss.
fn select_best(trace: &SaddleTrace) -> usize {
    let mut best = 0;
    for (i, r) in trace.records.iter().enumerate() {
        if r.robust_loss < trace.records[best].robust_loss {
            best = i;
        }
    }
    best
}

fn mean_weights(trace: &[SimplexWeights]) -> Result<SimplexWeights> {
    let m = trace[0].len();
    let mut mean = vec![0.0; m];
    for g in trace {
        mean.iter_mut().zip(g.iter()).for_each(|(a, b)| *a += b);
    }
    SimplexWeights::from_unnormalized(mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergence::DivergenceKind;

    fn simplex(v: &[f64]) -> SimplexWeights {
        SimplexWeights::new(v.to_vec()).unwrap()
    }

    fn kl_ball(m: usize, delta: f64) -> DeltaBall {
        DeltaBall::uniform(DivergenceKind::Kl, m, delta).unwrap()
    }

    /// `g` with `KL(g, u) = d` for m = 2, found by bisection on the first entry.
    fn two_class_at_divergence(d: f64) -> SimplexWeights {
        let spec = DivergenceSpec::uniform(DivergenceKind::Kl, 2);
        let (mut lo, mut hi) = (0.5, 1.0 - 1e-15);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let v = spec.value(&simplex(&[mid, 1.0 - mid])).unwrap().to_f64();
            if v < d {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        simplex(&[lo, 1.0 - lo])
    }

    #[test]
    fn lambda_step_examples() {
        let ball = kl_ball(2, 0.5);
        let g = two_class_at_divergence(0.3);
        let next = lambda_step(1.0, &g, &ball, 0.5, 10.0).unwrap();
        assert!((next - 0.9).abs() < 1e-12, "{next}");

        let g = two_class_at_divergence(0.5);
        let next = lambda_step(1.0, &g, &ball, 0.5, 10.0).unwrap();
        assert!((next - 1.0).abs() < 1e-12);

        let ball = kl_ball(2, 1.0);
        assert_eq!(
            lambda_step(0.01, &SimplexWeights::uniform(2), &ball, 1.0, 10.0).unwrap(),
            0.0
        );
        let far = two_class_at_divergence(0.69);
        assert_eq!(lambda_step(9.9, &far, &kl_ball(2, 0.0), 100.0, 10.0).unwrap(), 10.0);
    }

    #[test]
    fn infinite_divergence_sends_lambda_to_cap() {
        let ball = DeltaBall::new(
            DivergenceSpec::new(DivergenceKind::ReverseKl, SimplexWeights::uniform(2)),
            0.1,
        )
        .unwrap();
        assert_eq!(lambda_step(0.0, &simplex(&[1.0, 0.0]), &ball, 1e-3, 7.0).unwrap(), 7.0);
    }

    #[test]
    fn simplified_step_examples() {
        let u = SimplexWeights::uniform(2);
        let g = g_step_simplified(&u, &[0.2, 0.4], 0.1, 1e-12).unwrap();
        assert!((g[0] - 0.11920292202211755).abs() < 1e-12);
        assert!((g[1] - 0.8807970779778824).abs() < 1e-12);

        let u4 = SimplexWeights::uniform(4);
        assert_eq!(g_step_simplified(&u4, &[0.3; 4], 0.2, 1e-12).unwrap(), u4);

        let r = simplex(&[0.7, 0.2, 0.1]);
        let g = g_step_simplified(&r, &[0.9, 0.1, 0.5], 1e9, 1e-12).unwrap();
        for (a, b) in g.iter().zip(r.iter()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn simplified_step_at_zero_lambda_splits_over_tied_maxima() {
        let r = simplex(&[0.5, 0.3, 0.2]);
        let g = g_step_simplified(&r, &[0.4, 0.1, 0.4], 0.0, 1e-12).unwrap();
        assert!((g[0] - 0.5 / 0.7).abs() < 1e-9);
        assert!((g[2] - 0.2 / 0.7).abs() < 1e-9);
        assert!(g[1] < 1e-11);
        // And it is the limit from above.
        let near = g_step_simplified(&r, &[0.4, 0.1, 0.4], 1e-4, 1e-12).unwrap();
        for (a, b) in g.iter().zip(near.iter()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn simplified_step_orders_weights_by_loss() {
        let u = SimplexWeights::uniform(5);
        let losses = [0.3, 0.05, 0.6, 0.2, 0.45];
        let g = g_step_simplified(&u, &losses, 0.3, 1e-12).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                if losses[i] > losses[j] {
                    assert!(g[i] > g[j]);
                }
            }
        }
    }

    #[test]
    fn simplified_step_rejects_bad_input() {
        let u = SimplexWeights::uniform(2);
        assert!(g_step_simplified(&u, &[0.1], 1.0, 1e-12).is_err());
        assert!(g_step_simplified(&u, &[0.1, f64::NAN], 1.0, 1e-12).is_err());
        assert!(g_step_simplified(&u, &[0.1, 0.2], -1.0, 1e-12).is_err());
    }

    #[test]
    fn eg_step_without_multiplier_is_plain_exponentiated_gradient() {
        let g = simplex(&[0.2, 0.5, 0.3]);
        let losses = [0.4, 0.1, 0.7];
        let out = g_step_eg_closed_form(&g, &losses, 0.0, 0.8, &SimplexWeights::uniform(3), 1e-12).unwrap();
        let raw: Vec<f64> = g.iter().zip(&losses).map(|(g, l)| g * (0.8 * l).exp()).collect();
        let total: f64 = raw.iter().sum();
        for (a, b) in out.iter().zip(&raw) {
            assert!((a - b / total).abs() < 1e-14);
        }
        let u = SimplexWeights::uniform(3);
        assert_eq!(g_step_eg_closed_form(&u, &[0.2; 3], 2.0, 0.5, &u, 1e-12).unwrap(), u);
    }

    /// Maximizes the regularized two-class objective over `p = g_0` by
    /// repeatedly refining a grid around the incumbent.
    fn eg_grid_oracle(g_prev: &[f64; 2], r: &[f64; 2], losses: &[f64; 2], lambda: f64, eta: f64) -> f64 {
        let kl = |p: f64, q: &[f64; 2]| {
            let t = |a: f64, b: f64| if a == 0.0 { 0.0 } else { a * (a / b).ln() };
            t(p, q[0]) + t(1.0 - p, q[1])
        };
        let objective = |p: f64| -kl(p, g_prev) / eta + p * losses[0] + (1.0 - p) * losses[1] - lambda * kl(p, r);
        let (mut lo, mut hi) = (0.0, 1.0);
        let mut best = 0.5;
        for _ in 0..12 {
            let n = 1000;
            let mut best_val = f64::NEG_INFINITY;
            for k in 0..=n {
                let p = lo + (hi - lo) * k as f64 / n as f64;
                let v = objective(p);
                if v > best_val {
                    best_val = v;
                    best = p;
                }
            }
            let width = (hi - lo) / n as f64;
            lo = (best - 2.0 * width).max(0.0);
            hi = (best + 2.0 * width).min(1.0);
        }
        best
    }

    #[test]
    fn eg_step_matches_grid_maximizer() {
        type Case = ([f64; 2], [f64; 2], [f64; 2], f64, f64);
        let cases: [Case; 4] = [
            ([0.5, 0.5], [0.5, 0.5], [0.1, 0.3], 1.0, 1.0),
            ([0.3, 0.7], [0.6, 0.4], [0.5, 0.2], 0.4, 2.0),
            ([0.9, 0.1], [0.5, 0.5], [0.0, 1.0], 3.0, 0.25),
            ([0.2, 0.8], [0.1, 0.9], [0.7, 0.6], 0.0, 1.5),
        ];
        for (g_prev, r, losses, lambda, eta) in cases {
            let out = g_step_eg_closed_form(&simplex(&g_prev), &losses, lambda, eta, &simplex(&r), 1e-12).unwrap();
            let p = eg_grid_oracle(&g_prev, &r, &losses, lambda, eta);
            assert!((out[0] - p).abs() < 1e-6, "{g_prev:?} {r:?}: {} vs {p}", out[0]);
        }
    }

    fn two_class_dataset() -> PredictionDataset {
        // Class 0: 3 of 4 correct; class 1: 1 of 2 correct.
        PredictionDataset::new(
            vec![
                vec![0.9, 0.1],
                vec![0.8, 0.2],
                vec![0.6, 0.4],
                vec![0.3, 0.7],
                vec![0.2, 0.8],
                vec![0.7, 0.3],
            ],
            vec![0, 0, 0, 0, 1, 1],
            None,
            InputKind::Probabilities,
        )
        .unwrap()
    }

    #[test]
    fn per_class_loss_examples() {
        let ds = two_class_dataset();
        let adj = PosthocAdjustment::identity(ClassPriors::uniform(2).unwrap());
        assert_eq!(per_class_loss(&ds, &adj, LossKind::ZeroOne).unwrap(), vec![0.25, 0.5]);

        let sure = PredictionDataset::new(
            vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
            vec![0, 1, 2],
            None,
            InputKind::Probabilities,
        )
        .unwrap();
        let adj = PosthocAdjustment::identity(ClassPriors::uniform(3).unwrap());
        assert_eq!(per_class_loss(&sure, &adj, LossKind::LogLoss).unwrap(), vec![0.0; 3]);
        assert_eq!(per_class_loss(&sure, &adj, LossKind::ZeroOne).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn log_loss_is_floored() {
        let ds = PredictionDataset::new(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![1, 1],
            None,
            InputKind::Probabilities,
        );
        // Class 0 is absent: a validation error, not a silent zero.
        let adj = PosthocAdjustment::identity(ClassPriors::uniform(2).unwrap());
        assert!(per_class_loss(&ds.unwrap(), &adj, LossKind::LogLoss).is_err());

        let ds = PredictionDataset::new(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![1, 0],
            None,
            InputKind::Probabilities,
        )
        .unwrap();
        let loss = per_class_loss(&ds, &adj, LossKind::LogLoss).unwrap();
        for l in loss {
            assert!((l + LOG_LOSS_FLOOR.ln()).abs() < 1e-12);
        }
    }

    fn config(m: usize, delta: f64, iterations: usize) -> LearnerConfig {
        LearnerConfig {
            delta_train: delta,
            divergence: DivergenceSpec::uniform(DivergenceKind::Kl, m),
            iterations,
            eta_lambda: 0.5,
            eta_g: 0.1,
            lambda_cap: 10.0,
            loss: LossKind::ZeroOne,
            g_update: GUpdate::Simplified,
            scorer_mode: ScorerMode::Last,
            lambda_init: 0.1,
            g_floor: 1e-12,
        }
    }

    #[test]
    fn single_step_unrolls_by_hand() {
        let ds = two_class_dataset();
        let priors = ClassPriors::new(vec![2.0 / 3.0, 1.0 / 3.0]).unwrap();
        let out = learn(&ds, &priors, &config(2, 0.2, 1)).unwrap();
        assert_eq!(out.trace.records.len(), 2);
        assert_eq!(out.scorer.len(), 1);

        // g^(0) = u rescales by [0.75, 1.5]; the losses follow by counting.
        let first = &out.trace.records[0];
        assert_eq!(first.weights, SimplexWeights::uniform(2));
        assert_eq!(first.lambda, 0.1);
        let adj0 = PosthocAdjustment::new(SimplexWeights::uniform(2), priors.clone(), 0.2, DivergenceKind::Kl).unwrap();
        let losses = per_class_loss(&ds, &adj0, LossKind::ZeroOne).unwrap();
        assert_eq!(first.losses, losses);

        let g1 = g_step_simplified(&SimplexWeights::uniform(2), &losses, 0.1, 1e-12).unwrap();
        for (i, beta) in out.adjustment.multipliers().iter().enumerate() {
            assert!((beta - g1[i] / priors.as_slice()[i]).abs() < 1e-15);
        }
        // λ^(1) = clip(0.1 - 0.5 (0.2 - 0)).
        assert!((out.trace.records[1].lambda - 0.0).abs() < 1e-15);
    }

    #[test]
    fn balanced_symmetric_data_is_a_fixed_point() {
        let rows = vec![
            vec![0.8, 0.1, 0.1],
            vec![0.1, 0.8, 0.1],
            vec![0.1, 0.1, 0.8],
            vec![0.4, 0.3, 0.3],
            vec![0.3, 0.4, 0.3],
            vec![0.3, 0.3, 0.4],
        ];
        let ds = PredictionDataset::new(rows, vec![0, 1, 2, 0, 1, 2], None, InputKind::Probabilities).unwrap();
        let priors = ds.empirical_priors().unwrap();
        for mode in [ScorerMode::Average, ScorerMode::Last, ScorerMode::BestValidation] {
            let mut cfg = config(3, 0.3, 20);
            cfg.scorer_mode = mode;
            let out = learn(&ds, &priors, &cfg).unwrap();
            for g in out.scorer.g_trace() {
                for w in g.iter() {
                    assert!((w - 1.0 / 3.0).abs() < 1e-12);
                }
            }
            let b = out.adjustment.multipliers();
            assert!(b.iter().all(|x| (x - b[0]).abs() < 1e-12));
        }
    }

    #[test]
    fn trace_invariants_and_determinism() {
        let ds = two_class_dataset();
        let priors = ds.empirical_priors().unwrap();
        for update in [GUpdate::Simplified, GUpdate::EgClosedForm] {
            let mut cfg = config(2, 0.1, 50);
            cfg.g_update = update;
            cfg.lambda_cap = 3.0;
            cfg.eta_lambda = 5.0;
            let a = learn(&ds, &priors, &cfg).unwrap();
            let b = learn(&ds, &priors, &cfg).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.trace.records.len(), 51);
            assert_eq!(a.scorer.len(), 50);
            for r in &a.trace.records {
                assert!((0.0..=3.0).contains(&r.lambda));
                assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
            let best = a.trace.best_so_far();
            assert!(best.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn best_validation_picks_the_smallest_robust_loss() {
        let ds = two_class_dataset();
        let priors = ds.empirical_priors().unwrap();
        let mut cfg = config(2, 0.1, 30);
        cfg.scorer_mode = ScorerMode::BestValidation;
        let out = learn(&ds, &priors, &cfg).unwrap();
        let t = out.selected_iteration.unwrap();
        let min = out.trace.best_so_far().last().copied().unwrap();
        assert_eq!(out.trace.records[t].robust_loss, min);
        assert!(out.trace.records[..t].iter().all(|r| r.robust_loss > min));
        assert_eq!(out.adjustment.weights(), &out.trace.records[t].weights);
    }

    #[test]
    fn default_schedule_arithmetic() {
        let priors = ClassPriors::new(vec![0.5, 0.25, 0.25]).unwrap();
        let cfg =
            LearnerConfig::with_defaults(DivergenceSpec::uniform(DivergenceKind::Kl, 3), 0.5, &priors, 400).unwrap();
        assert_eq!(cfg.iterations, 400);
        assert_eq!(cfg.lambda_cap, 16.0);
        assert!((cfg.eta_lambda - 16.0 / (3f64.ln() * 20.0)).abs() < 1e-12);
        assert!((cfg.eta_g - (3f64.ln() / 400.0).sqrt() / 24.0).abs() < 1e-15);
        assert_eq!(cfg.lambda_init, 1.0);
        cfg.validate(3).unwrap();
        let big = LearnerConfig::with_defaults(cfg.divergence.clone(), 0.5, &priors, 10_000).unwrap();
        assert_eq!(big.iterations, DEFAULT_MAX_ITERATIONS);
        assert!(LearnerConfig::with_defaults(cfg.divergence.clone(), 0.0, &priors, 10).is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = config(2, 0.1, 5);
        assert!(cfg.validate(3).is_err());
        cfg.lambda_init = 11.0;
        assert!(cfg.validate(2).is_err());
        let mut cfg = config(2, 0.1, 0);
        assert!(cfg.validate(2).is_err());
        cfg.iterations = 1;
        cfg.g_floor = 0.6;
        assert!(cfg.validate(2).is_err());
    }

    #[test]
    fn averaged_predict_examples() {
        let priors = ClassPriors::new(vec![0.9, 0.1]).unwrap();
        let g = simplex(&[0.5, 0.5]);
        let scorer = AveragedScorer::new(vec![g.clone(); 3], priors.clone(), ScorerMode::Average).unwrap();
        let adj = PosthocAdjustment::new(g, priors, 0.0, DivergenceKind::Kl).unwrap();
        for row in [[0.6, 0.4], [0.95, 0.05], [0.85, 0.15]] {
            assert_eq!(
                averaged_predict(&row, InputKind::Probabilities, &scorer).unwrap(),
                predict(&row, &adj, InputKind::Probabilities).unwrap()
            );
        }

        let trace = vec![simplex(&[1.0, 0.0]).floored(1e-12), simplex(&[0.0, 1.0]).floored(1e-12)];
        let sym = AveragedScorer::new(trace, ClassPriors::uniform(2).unwrap(), ScorerMode::Average).unwrap();
        let scores = sym.averaged_scores(&[0.5, 0.5]).unwrap();
        assert_eq!(scores[0], scores[1]);
        assert_eq!(
            averaged_predict(&[0.5, 0.5], InputKind::Probabilities, &sym).unwrap(),
            0
        );
        assert_eq!(averaged_predict(&[0.0, 0.0], InputKind::Logits, &sym).unwrap(), 0);
    }

    #[test]
    fn averaged_predict_differs_from_mean_weights() {
        // Average of rescored distributions, not rescoring by the average g.
        let priors = ClassPriors::uniform(2).unwrap();
        let trace = vec![simplex(&[0.9, 0.1]), simplex(&[0.2, 0.8])];
        let scorer = AveragedScorer::new(trace, priors, ScorerMode::Average).unwrap();
        let s = scorer.averaged_scores(&[0.42, 0.58]).unwrap();
        let a = 0.378 / (0.378 + 0.058);
        let b = 0.084 / (0.084 + 0.464);
        assert!((s[0] - 0.5 * (a + b)).abs() < 1e-12);
        assert_eq!(argmax(&s), 0);
        // Rescoring by the mean g = [0.55, 0.45] picks class 1.
        assert_eq!(argmax(&scale_scores(&[0.42, 0.58], &[0.55, 0.45]).unwrap()), 1);
        assert!(AveragedScorer::new(vec![], ClassPriors::uniform(2).unwrap(), ScorerMode::Average).is_err());
    }

    #[test]
    fn keyword_round_trips() {
        for k in [LossKind::ZeroOne, LossKind::LogLoss] {
            assert_eq!(k.to_string().parse::<LossKind>().unwrap(), k);
        }
        for k in [GUpdate::Simplified, GUpdate::EgClosedForm] {
            assert_eq!(k.to_string().parse::<GUpdate>().unwrap(), k);
        }
        for k in [ScorerMode::Average, ScorerMode::Last, ScorerMode::BestValidation] {
            assert_eq!(k.to_string().parse::<ScorerMode>().unwrap(), k);
        }
        assert!("median".parse::<ScorerMode>().is_err());
    }
}
