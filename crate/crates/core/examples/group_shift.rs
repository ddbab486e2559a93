//! Group prior shift on a two-class task with a spurious attribute: one
//! adjustment for all rows versus one per attribute value, scored on the
//! four (attribute, class) groups.

use drops::groups::{group_accuracy, group_accuracy_with, learn_group};
use drops::metric::delta_worst;
use drops::synth::SpuriousMixtureSpec;
use drops::{DeltaBall, DivergenceKind, DivergenceSpec, GroupMode, LearnerConfig, Result};

fn main() -> Result<()> {
    let spec = SpuriousMixtureSpec::skewed(0.9, 0.3, 8)?;
    let val = spec.to_dataset(&spec.sample_stream(6000, 0)?)?;
    let test = spec.to_dataset(&spec.sample_stream(6000, 1)?)?;
    let groups = DeltaBall::uniform(DivergenceKind::Kl, 4, 0.5)?;

    let plain = group_accuracy(&test, None)?;
    println!(
        "unadjusted groups {:.3?}: 0.5-worst {:.4}",
        plain.as_slice(),
        delta_worst(&plain, &groups)?.value
    );

    let pi = val.empirical_priors()?;
    let config = LearnerConfig::with_defaults(DivergenceSpec::uniform(DivergenceKind::Kl, 2), 0.5, &pi, 2000)?;
    for mode in [GroupMode::ClassOnly, GroupMode::PerAttribute] {
        let learned = learn_group(&val, &config, mode)?;
        let acc = group_accuracy_with(&test, &learned)?;
        println!(
            "{mode:>14} groups {:.3?}: 0.5-worst {:.4}",
            acc.as_slice(),
            delta_worst(&acc, &groups)?.value
        );
        for (a, o) in learned.outcomes().iter().enumerate() {
            println!("    slice {a}: multipliers {:.3?}", o.adjustment.multipliers());
        }
    }
    Ok(())
}
