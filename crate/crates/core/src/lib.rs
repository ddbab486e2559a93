//! Distributionally robust post-hoc adjustment of classifier predictions.
//!
//! The crate evaluates a classifier under controlled class (or group) prior
//! shift with the *δ-worst accuracy*: the smallest `g`-weighted accuracy over
//! all weightings `g` on the simplex that lie within divergence `δ` of a
//! target prior `r`. It also learns post-hoc rescalings `g_i / π̂_i` of a frozen
//! model's probabilities that make the rescaled classifier robust to such
//! shifts, by running a Lagrangian saddle-point procedure on a held-out
//! validation set.
//!
//! Module map:
//!
//! - [`divergence`]: KL and reverse-KL divergences on the simplex.
//! - [`metric`]: δ-worst accuracy, its grid oracle and robustness curves.
//! - [`posthoc`]: multiplicative / logit-additive prediction rescaling.
//! - [`learner`]: the saddle-point learner and the averaged scorer.
//! - [`groups`]: group-prior-shift variants and the binary scalar sweep.
//! - [`synth`]: Gaussian mixtures with closed-form class probabilities.
//! - [`dataset`] and [`io`]: prediction files and adjustment persistence.
//! - [`cli`]: the `drops` command-line front end.

pub mod cli;
pub mod dataset;
pub mod divergence;
mod error;
pub mod groups;
pub mod io;
pub mod learner;
pub mod metric;
pub mod posthoc;
pub mod synth;

pub use dataset::{InputKind, PredictionDataset};
pub use divergence::{Divergence, DivergenceKind, DivergenceSpec, SimplexWeights};
pub use error::{Error, Result};
pub use groups::{EvalLevel, GroupAdjustment, GroupMode, GroupPriors};
pub use learner::{AveragedScorer, GUpdate, LearnOutcome, LearnerConfig, LossKind, SaddleTrace, ScorerMode};
pub use metric::{AccuracyVector, DeltaBall, RobustCurve};
pub use posthoc::{ClassPriors, PosthocAdjustment, Predictor};
