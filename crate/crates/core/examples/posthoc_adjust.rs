//! Rescaling predictions by `g / π̂`: the multiplicative rule on
//! probabilities and the additive rule on logits pick the same class.

use drops::posthoc::{adjusted_scores, predict, softmax};
use drops::{ClassPriors, DivergenceKind, InputKind, PosthocAdjustment, Result, SimplexWeights};

fn main() -> Result<()> {
    let priors = ClassPriors::new(vec![0.7, 0.2, 0.1])?;
    let g = SimplexWeights::uniform(3);
    let adj = PosthocAdjustment::new(g, priors, 0.0, DivergenceKind::Kl)?;
    println!("multipliers {:?}", adj.multipliers());
    println!("log offsets {:?}", adj.log_multipliers());

    for logits in [[2.0, 1.0, 0.5], [0.1, 0.0, -0.2], [3.0, 1.5, 1.4]] {
        let probs = softmax(&logits)?;
        let scored = adjusted_scores(&probs, &adj)?;
        let by_probs = predict(probs.as_slice(), &adj, InputKind::Probabilities)?;
        let by_logits = predict(&logits, &adj, InputKind::Logits)?;
        println!(
            "logits {logits:?} -> probs {:.3?} -> adjusted {:.3?}: class {by_probs} (logit path: {by_logits})",
            probs.as_slice(),
            scored.as_slice()
        );
        assert_eq!(by_probs, by_logits);
    }
    Ok(())
}
