//! δ-worst accuracy of a fixed accuracy vector: the dual solver against the
//! brute-force simplex grid, for both divergences.

use drops::metric::{delta_worst, delta_worst_grid_oracle};
use drops::{AccuracyVector, DeltaBall, DivergenceKind, Result};

fn main() -> Result<()> {
    let acc = AccuracyVector::new(vec![0.9, 0.5, 0.7])?;
    println!(
        "accuracies {:?}, mean {:.4}, worst {:.4}",
        acc.as_slice(),
        acc.mean(),
        acc.min()
    );
    println!(
        "{:>4} {:>6} {:>10} {:>10}  worst-case weights",
        "div", "delta", "solver", "grid"
    );
    for kind in [DivergenceKind::Kl, DivergenceKind::ReverseKl] {
        for delta in [0.0, 0.05, 0.1, 0.5, 1.0, 2.0] {
            let ball = DeltaBall::uniform(kind, 3, delta)?;
            let solved = delta_worst(&acc, &ball)?;
            let grid = match delta_worst_grid_oracle(&acc, &ball, 1e-3) {
                Ok(v) => format!("{v:.6}"),
                Err(_) => "-".into(),
            };
            let g: Vec<String> = solved.weights.iter().map(|w| format!("{w:.3}")).collect();
            println!(
                "{kind:>4} {delta:>6.2} {:>10.6} {grid:>10}  [{}]",
                solved.value,
                g.join(", ")
            );
        }
    }
    Ok(())
}
