//! Choosing the class-1 scale `w` of a binary classifier by the δ-worst
//! group accuracy on a validation split.

use drops::groups::{binary_scalar_sweep, default_w_grid, group_accuracy_with, BinaryScalar};
use drops::metric::delta_worst;
use drops::synth::SpuriousMixtureSpec;
use drops::{DeltaBall, DivergenceKind, EvalLevel, Result};

fn main() -> Result<()> {
    let spec = SpuriousMixtureSpec::skewed(0.95, 0.25, 3)?;
    let val = spec.to_dataset(&spec.sample_stream(4000, 0)?)?;
    let test = spec.to_dataset(&spec.sample_stream(4000, 1)?)?;
    let ball = DeltaBall::uniform(DivergenceKind::Kl, 4, 1.0)?;

    let sweep = binary_scalar_sweep(&val, &ball, &default_w_grid(), EvalLevel::Group)?;
    for (w, v) in sweep.candidates.iter().step_by(10) {
        println!("w = {w:8.3}  validation 1.0-worst {v:.4}");
    }
    println!("selected w = {:.3} (validation {:.4})", sweep.best_w, sweep.best_value);
    for w in [1.0, sweep.best_w] {
        let acc = group_accuracy_with(&test, &BinaryScalar { w })?;
        println!(
            "test, w = {w:.3}: groups {:.3?}, 1.0-worst {:.4}",
            acc.as_slice(),
            delta_worst(&acc, &ball)?.value
        );
    }
    Ok(())
}
