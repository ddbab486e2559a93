//! The on-disk workflow: write prediction files, learn and store an
//! adjustment, reload it, and label a held-out file with it.

use drops::groups::{learn_group, GroupMode};
use drops::io::{self, AdjustmentFile};
use drops::metric::per_class_accuracy_with;
use drops::synth::{geometric_priors, GaussianMixtureSpec};
use drops::{DivergenceKind, DivergenceSpec, InputKind, LearnerConfig, Result, ScorerMode};

fn main() -> Result<()> {
    let dir = tempfile::tempdir()?;
    let priors = geometric_priors(5, 20.0)?;
    let spec = GaussianMixtureSpec::simplex_corners(priors.to_simplex(), 2.0, 1.0, 1)?;
    let val_path = dir.path().join("val.csv");
    let test_path = dir.path().join("test.csv");
    io::write_predictions(
        &val_path,
        &spec.to_dataset(&spec.sample_stream(3000, 0)?, InputKind::Logits)?,
    )?;
    io::write_predictions(
        &test_path,
        &spec.to_dataset(&spec.sample_stream(3000, 1)?, InputKind::Logits)?,
    )?;

    let val = io::load_predictions(&val_path, InputKind::Logits)?;
    let pi = val.empirical_priors()?;
    let mut config = LearnerConfig::with_defaults(DivergenceSpec::uniform(DivergenceKind::Kl, 5), 0.5, &pi, val.len())?;
    config.scorer_mode = ScorerMode::BestValidation;
    let learned = learn_group(&val, &config, GroupMode::ClassOnly)?;

    let adj_path = dir.path().join("adjustment.json");
    io::write_adjustment(&adj_path, &AdjustmentFile::from_learned(&learned, &config))?;
    io::write_trace(&dir.path().join("trace.csv"), &learned.outcomes()[0].trace)?;
    println!(
        "{}",
        std::fs::read_to_string(&adj_path)?
            .lines()
            .take(12)
            .collect::<Vec<_>>()
            .join("\n")
    );

    let stored = io::read_adjustment(&adj_path)?.predictor()?;
    let test = io::load_predictions(&test_path, InputKind::Logits)?;
    let acc = per_class_accuracy_with(&test, &stored)?;
    println!("held-out per-class accuracy {:.3?}", acc.as_slice());
    Ok(())
}
