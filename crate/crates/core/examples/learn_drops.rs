//! Learning a robust adjustment on a long-tailed validation split and
//! checking it on a held-out split, for each scorer mode.

use drops::learner::learn;
use drops::metric::{delta_worst, per_class_accuracy, per_class_accuracy_with};
use drops::synth::{geometric_priors, GaussianMixtureSpec};
use drops::{DeltaBall, DivergenceKind, DivergenceSpec, InputKind, LearnerConfig, Result, ScorerMode};

fn main() -> Result<()> {
    let priors = geometric_priors(10, 100.0)?;
    let spec = GaussianMixtureSpec::simplex_corners(priors.to_simplex(), 2.0, 1.0, 42)?;
    let val = spec.to_dataset(&spec.sample_stream(10_000, 0)?, InputKind::Probabilities)?;
    let test = spec.to_dataset(&spec.sample_stream(10_000, 1)?, InputKind::Probabilities)?;

    let divergence = DivergenceSpec::uniform(DivergenceKind::Kl, 10);
    let ball = DeltaBall::new(divergence.clone(), 1.0)?;
    let plain = per_class_accuracy(&test, None)?;
    println!(
        "unadjusted: mean {:.4}, 1.0-worst {:.4}",
        plain.mean(),
        delta_worst(&plain, &ball)?.value
    );

    let pi = val.empirical_priors()?;
    for mode in [ScorerMode::Average, ScorerMode::Last, ScorerMode::BestValidation] {
        let mut config = LearnerConfig::with_defaults(divergence.clone(), 1.0, &pi, val.len())?;
        config.scorer_mode = mode;
        let outcome = learn(&val, &pi, &config)?;
        let acc = per_class_accuracy_with(&test, outcome.predictor())?;
        println!(
            "{mode:>15}: mean {:.4}, 1.0-worst {:.4} (T = {}, selected {:?})",
            acc.mean(),
            delta_worst(&acc, &ball)?.value,
            config.iterations,
            outcome.selected_iteration
        );
    }
    Ok(())
}
