//! Robustness curve of a long-tailed classifier: δ-worst accuracy as the
//! radius of the prior-shift ball grows from 0 to 2.

use drops::metric::{per_class_accuracy, robust_curve};
use drops::synth::{geometric_priors, GaussianMixtureSpec};
use drops::{DivergenceKind, DivergenceSpec, InputKind, Result};

fn main() -> Result<()> {
    let priors = geometric_priors(10, 100.0)?;
    let spec = GaussianMixtureSpec::simplex_corners(priors.to_simplex(), 2.0, 1.0, 42)?;
    let test = spec.to_dataset(&spec.sample_stream(10_000, 1)?, InputKind::Probabilities)?;
    let acc = per_class_accuracy(&test, None)?;
    let deltas: Vec<f64> = (0..=8).map(|k| k as f64 * 0.25).collect();
    for kind in [DivergenceKind::Kl, DivergenceKind::ReverseKl] {
        let curve = robust_curve(&acc, &DivergenceSpec::uniform(kind, 10), &deltas)?;
        println!("{kind}:");
        for p in &curve.points {
            println!(
                "  delta {:.2}  accuracy {:.4}  weight on rarest class {:.3}",
                p.delta, p.value, p.weights[9]
            );
        }
    }
    Ok(())
}
