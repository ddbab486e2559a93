//! The rescaled rule `argmax_y (g_y / π_y) η_y(x)` against the best threshold
//! found by brute force, on a one-dimensional imbalanced binary mixture.

use drops::posthoc::argmax_multiplicative;
use drops::synth::{binary_threshold_oracle, weighted_class_error, GaussianMixtureSpec};
use drops::{Result, SimplexWeights};

fn main() -> Result<()> {
    let spec = GaussianMixtureSpec::binary_line(-1.0, 1.0, 1.0, SimplexWeights::new(vec![0.9, 0.1])?, 6)?;
    let sample = spec.sample(100_000)?;
    let thresholds: Vec<f64> = (0..=1600).map(|i| -8.0 + i as f64 * 0.01).collect();
    for g0 in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let g = SimplexWeights::new(vec![g0, 1.0 - g0])?;
        let beta = [g[0] / 0.9, g[1] / 0.1];
        let rule = weighted_class_error(&sample, &g, |x| {
            argmax_multiplicative(spec.true_eta(x)?.as_slice(), &beta)
        })?;
        let oracle = binary_threshold_oracle(&spec, &g, 100_000, &thresholds)?;
        println!(
            "g = [{g0:.1}, {:.1}]: rescaled rule {rule:.4}, best threshold {:+.2} with {:.4}",
            1.0 - g0,
            oracle.threshold,
            oracle.weighted_error
        );
    }
    Ok(())
}
