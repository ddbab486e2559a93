//! Command-line front end.
//!
//! `drops <eval|curve|learn|apply|synth|oracle|sweep-w> [flags]`. Exit
//! status is 0 on success, 1 for usage errors, 2 for invalid input data and
//! 3 for numerical failures.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::dataset::{InputKind, PredictionDataset};
use crate::divergence::{DivergenceKind, DivergenceSpec, SimplexWeights};
use crate::groups::{
    accuracy_at_level, binary_scalar_sweep, default_w_grid, learn_group, EvalLevel, GroupMode, GroupPriors,
};
use crate::io;
use crate::learner::{GUpdate, LearnerConfig, LossKind, ScorerMode};
use crate::metric::{delta_worst, delta_worst_grid_oracle, robust_curve, AccuracyVector, DeltaBall};
use crate::posthoc::{ClassPriors, Predictor, Unadjusted};
use crate::synth::{geometric_priors, GaussianMixtureSpec, SpuriousMixtureSpec};
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Exit status for an error.
pub fn exit_code(error: &Error) -> i32 {
    match error {
        Error::InvalidArgument(_) | Error::MissingAttributes => EXIT_USAGE,
        Error::Numerical(_) | Error::NonFinite(_) | Error::DegenerateScores | Error::BoundaryGradient { .. } => {
            EXIT_NUMERICAL
        }
        _ => EXIT_DATA,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "drops",
    version,
    about = "Distributionally robust post-hoc adjustment of classifier predictions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Per-class (or per-group) accuracies and the δ-worst accuracy.
    Eval(EvalArgs),
    /// δ-worst accuracy over a grid of radii, as CSV.
    Curve(CurveArgs),
    /// Learn a robust adjustment on a validation file.
    Learn(LearnArgs),
    /// Label a prediction file with a stored adjustment.
    Apply(ApplyArgs),
    /// Generate a synthetic prediction file with exact class probabilities.
    Synth(SynthArgs),
    /// Compare the δ-worst solver with the simplex-grid oracle.
    Oracle(OracleArgs),
    /// Pick the class-1 scale of a binary classifier by δ-worst accuracy.
    #[command(name = "sweep-w")]
    SweepW(SweepArgs),
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Prediction CSV (header p0..,label[,attr] or l0..,label[,attr]).
    #[arg(long, value_name = "PATH")]
    preds: PathBuf,
    /// Whether the score columns are probabilities or logits.
    #[arg(long, default_value = "probs", value_parser = parse_kind)]
    kind: InputKind,
}

#[derive(Debug, Args)]
struct BallArgs {
    #[arg(long, default_value = "kl", value_parser = parse_keyword::<DivergenceKind>)]
    divergence: DivergenceKind,
    /// `uniform`, or a JSON array of target weights.
    #[arg(long, default_value = "uniform")]
    target: String,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    ball: BallArgs,
    #[arg(long, default_value_t = 1.0, conflicts_with = "worst")]
    delta: f64,
    /// Report the accuracy of the worst class or group instead.
    #[arg(long)]
    worst: bool,
    /// Evaluate the classifier stored in this adjustment file.
    #[arg(long, value_name = "PATH")]
    adjust: Option<PathBuf>,
    #[arg(long, default_value = "class", value_parser = parse_keyword::<EvalLevel>)]
    level: EvalLevel,
    /// JSON report; stdout when omitted.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CurveArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    ball: BallArgs,
    /// Radii as START:STOP:STEP (inclusive).
    #[arg(long, default_value = "0:2:0.05", value_parser = parse_grid)]
    delta_grid: DeltaGrid,
    /// Append an infinite-radius row holding the worst class or group.
    #[arg(long)]
    worst: bool,
    #[arg(long, value_name = "PATH")]
    adjust: Option<PathBuf>,
    #[arg(long, default_value = "class", value_parser = parse_keyword::<EvalLevel>)]
    level: EvalLevel,
    /// Curve CSV; stdout when omitted.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct LearnArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    ball: BallArgs,
    /// Training radius δ.
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    /// Iterations T (default: validation size, capped at 2000).
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    eta_lambda: Option<f64>,
    #[arg(long)]
    eta_g: Option<f64>,
    #[arg(long)]
    lambda_cap: Option<f64>,
    #[arg(long)]
    lambda_init: Option<f64>,
    #[arg(long, default_value = "zero_one", value_parser = parse_keyword::<LossKind>)]
    loss: LossKind,
    #[arg(long, default_value = "simplified", value_parser = parse_keyword::<GUpdate>)]
    g_update: GUpdate,
    #[arg(long, default_value = "average", value_parser = parse_keyword::<ScorerMode>)]
    mode: ScorerMode,
    #[arg(long, default_value = "class_only", value_parser = parse_keyword::<GroupMode>)]
    group: GroupMode,
    /// Adjustment JSON to write.
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
    /// Trace CSV; per-attribute runs write one file per attribute.
    #[arg(long, value_name = "PATH")]
    trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ApplyArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_name = "PATH")]
    adjust: PathBuf,
    /// Predicted labels CSV; stdout when omitted.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Number of classes of the long-tailed mixture.
    #[arg(long, default_value_t = 10)]
    classes: usize,
    /// Imbalance ratio max π / min π.
    #[arg(long, default_value_t = 100.0)]
    rho: f64,
    #[arg(long, default_value_t = 2.0)]
    separation: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Two-class task with a spurious binary attribute instead.
    #[arg(long)]
    spurious: bool,
    /// Spurious task: fraction of each class whose attribute agrees with the label.
    #[arg(long, default_value_t = 0.9)]
    agreement: f64,
    /// Spurious task: prior of class 1.
    #[arg(long, default_value_t = 0.3)]
    class1: f64,
    #[arg(short = 'n', long, default_value_t = 10_000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random stream; use different streams for validation and test splits.
    #[arg(long, default_value_t = 0)]
    stream: u64,
    #[arg(long, default_value = "probs", value_parser = parse_kind)]
    kind: InputKind,
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct OracleArgs {
    /// Comma-separated accuracies (alternative to --preds).
    #[arg(
        long,
        value_delimiter = ',',
        required_unless_present = "preds",
        conflicts_with = "preds"
    )]
    acc: Option<Vec<f64>>,
    #[arg(long, value_name = "PATH")]
    preds: Option<PathBuf>,
    #[arg(long, default_value = "probs", value_parser = parse_kind)]
    kind: InputKind,
    #[command(flatten)]
    ball: BallArgs,
    #[arg(long, default_value = "0:2:0.05", value_parser = parse_grid)]
    delta_grid: DeltaGrid,
    /// Lattice step of the oracle.
    #[arg(long, default_value_t = 1e-3)]
    step: f64,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    ball: BallArgs,
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    #[arg(long, default_value = "group", value_parser = parse_keyword::<EvalLevel>)]
    level: EvalLevel,
    /// Candidate scales (default: 81 log-spaced points in [0.01, 100]).
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

fn parse_keyword<T: std::str::FromStr<Err = Error>>(s: &str) -> std::result::Result<T, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_kind(s: &str) -> std::result::Result<InputKind, String> {
    parse_keyword(s)
}

/// Radii parsed from `START:STOP:STEP`.
#[derive(Debug, Clone, PartialEq)]
struct DeltaGrid(Vec<f64>);

/// `START:STOP:STEP`, inclusive of `STOP` up to rounding.
fn parse_grid(s: &str) -> std::result::Result<DeltaGrid, String> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("'{p}' is not a number")))
        .collect::<std::result::Result<_, _>>()?;
    let [start, stop, step] = parts[..] else {
        return Err(format!("expected START:STOP:STEP, got '{s}'"));
    };
    if !(start >= 0.0 && stop >= start && step > 0.0 && stop.is_finite()) {
        return Err(format!("need 0 <= START <= STOP and STEP > 0, got '{s}'"));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize;
    Ok(DeltaGrid(
        (0..=count)
            .map(|k| ((start + k as f64 * step) * 1e12).round() / 1e12)
            .collect(),
    ))
}

/// Runs the command line `argv` (program name first) and returns the exit
/// status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Eval(a) => eval(a),
        Command::Curve(a) => curve(a),
        Command::Learn(a) => learn(a),
        Command::Apply(a) => apply(a),
        Command::Synth(a) => synth(a),
        Command::Oracle(a) => oracle(a),
        Command::SweepW(a) => sweep(a),
    }
}

fn load(data: &DataArgs) -> Result<PredictionDataset> {
    io::load_predictions(&data.preds, data.kind)
}

fn divergence_spec(ball: &BallArgs, m: usize) -> Result<DivergenceSpec> {
    let target = if ball.target == "uniform" {
        SimplexWeights::uniform(m)
    } else {
        io::read_target(Path::new(&ball.target))?
    };
    if target.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: target.len(),
        });
    }
    Ok(DivergenceSpec::new(ball.divergence, target))
}

/// Writes to `out` atomically, or to stdout.
fn emit<F>(out: Option<&Path>, body: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    match io::output_path(out) {
        Some(path) => io::write_atomic(&path, body),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            match body(&mut lock).and_then(|()| Ok(lock.flush()?)) {
                Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                Err(Error::Json(e)) if e.io_error_kind() == Some(std::io::ErrorKind::BrokenPipe) => Ok(()),
                other => other,
            }
        }
    }
}

fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    emit(out, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)?;
        Ok(())
    })
}

fn evaluated_accuracies(
    dataset: &PredictionDataset,
    adjust: Option<&Path>,
    level: EvalLevel,
) -> Result<AccuracyVector> {
    match adjust {
        Some(path) => {
            let predictor = io::read_adjustment(path)?.predictor()?;
            accuracy_at_level(dataset, &predictor, level)
        }
        None => accuracy_at_level(
            dataset,
            &Unadjusted {
                num_classes: dataset.num_classes(),
            },
            level,
        ),
    }
}

#[derive(Serialize)]
struct EvalReport {
    level: EvalLevel,
    divergence: DivergenceKind,
    /// `null` for the worst-class report.
    delta: Option<f64>,
    accuracies: Vec<f64>,
    mean_accuracy: f64,
    delta_worst: f64,
    weights: SimplexWeights,
}

fn eval(a: EvalArgs) -> Result<()> {
    let dataset = load(&a.data)?;
    let acc = evaluated_accuracies(&dataset, a.adjust.as_deref(), a.level)?;
    let spec = divergence_spec(&a.ball, acc.len())?;
    let delta = if a.worst { f64::INFINITY } else { a.delta };
    let solved = delta_worst(&acc, &DeltaBall::new(spec, delta)?)?;
    let report = EvalReport {
        level: a.level,
        divergence: a.ball.divergence,
        delta: (!a.worst).then_some(a.delta),
        mean_accuracy: acc.mean(),
        accuracies: acc.into(),
        delta_worst: solved.value,
        weights: solved.weights,
    };
    emit_json(a.out.as_deref(), &report)
}

fn curve(a: CurveArgs) -> Result<()> {
    let dataset = load(&a.data)?;
    let acc = evaluated_accuracies(&dataset, a.adjust.as_deref(), a.level)?;
    let spec = divergence_spec(&a.ball, acc.len())?;
    let mut deltas = a.delta_grid.0.clone();
    if a.worst {
        deltas.push(f64::INFINITY);
    }
    let curve = robust_curve(&acc, &spec, &deltas)?;
    emit(a.out.as_deref(), |w| io::write_curve_to(w, &curve))
}

/// Default schedule for a learning run, keyed on the most imbalanced prior
/// the run will see.
fn learner_config(a: &LearnArgs, dataset: &PredictionDataset) -> Result<LearnerConfig> {
    let m = dataset.num_classes();
    let spec = divergence_spec(&a.ball, m)?;
    let priors = match a.group {
        GroupMode::ClassOnly => dataset.empirical_priors()?,
        GroupMode::PerAttribute => {
            let all = GroupPriors::from_dataset(dataset)?.0;
            let smallest = |p: &ClassPriors| p.as_slice().iter().copied().fold(f64::INFINITY, f64::min);
            all.into_iter()
                .min_by(|x, y| smallest(x).total_cmp(&smallest(y)))
                .ok_or(Error::MissingAttributes)?
        }
    };
    let mut config = LearnerConfig::with_defaults(spec, a.delta, &priors, dataset.len())?;
    if let Some(t) = a.iters {
        // The step sizes depend on T; recompute them unless overridden.
        config = LearnerConfig::with_iterations(config.divergence, a.delta, &priors, t)?;
    }
    if let Some(v) = a.eta_lambda {
        config.eta_lambda = v;
    }
    if let Some(v) = a.eta_g {
        config.eta_g = v;
    }
    if let Some(v) = a.lambda_cap {
        config.lambda_cap = v;
        config.lambda_init = config.lambda_init.min(v);
    }
    if let Some(v) = a.lambda_init {
        config.lambda_init = v;
    }
    config.loss = a.loss;
    config.g_update = a.g_update;
    config.scorer_mode = a.mode;
    config.validate(m)?;
    Ok(config)
}

fn trace_path(base: &Path, attribute: usize) -> PathBuf {
    let stem = base
        .file_stem()
        .map_or_else(|| "trace".into(), |s| s.to_string_lossy().into_owned());
    let ext = base
        .extension()
        .map_or_else(|| "csv".into(), |s| s.to_string_lossy().into_owned());
    base.with_file_name(format!("{stem}_attr{attribute}.{ext}"))
}

fn learn(a: LearnArgs) -> Result<()> {
    let dataset = load(&a.data)?;
    let config = learner_config(&a, &dataset)?;
    let learned = learn_group(&dataset, &config, a.group)?;
    let mut file = io::AdjustmentFile::from_learned(&learned, &config);
    file.metadata.source = Some(a.data.preds.display().to_string());
    io::write_adjustment(&a.out, &file)?;
    if let Some(base) = &a.trace {
        match a.group {
            GroupMode::ClassOnly => io::write_trace(base, &learned.outcomes()[0].trace)?,
            GroupMode::PerAttribute => {
                for (attr, outcome) in learned.outcomes().iter().enumerate() {
                    io::write_trace(&trace_path(base, attr), &outcome.trace)?;
                }
            }
        }
    }
    let acc = accuracy_at_level(&dataset, &learned, EvalLevel::Class)?;
    let ball = DeltaBall::new(config.divergence.clone(), config.delta_train)?;
    eprintln!(
        "learned {} adjustment(s) over {} iterations; validation {:.4}-worst accuracy {:.4} (mean {:.4})",
        learned.outcomes().len(),
        config.iterations,
        config.delta_train,
        delta_worst(&acc, &ball)?.value,
        acc.mean()
    );
    Ok(())
}

fn apply(a: ApplyArgs) -> Result<()> {
    let dataset = load(&a.data)?;
    let predictor = io::read_adjustment(&a.adjust)?.predictor()?;
    if predictor.num_classes() != dataset.num_classes() {
        return Err(Error::DimensionMismatch {
            expected: dataset.num_classes(),
            got: predictor.num_classes(),
        });
    }
    let predicted = dataset
        .rows()
        .enumerate()
        .map(|(i, row)| predictor.predict_row(row, dataset.kind(), dataset.attribute(i)))
        .collect::<Result<Vec<_>>>()?;
    emit(a.out.as_deref(), |w| {
        writeln!(w, "row,predicted,label")?;
        for (i, p) in predicted.iter().enumerate() {
            writeln!(w, "{i},{p},{}", dataset.label(i))?;
        }
        Ok(())
    })
}

fn synth(a: SynthArgs) -> Result<()> {
    let dataset = if a.spurious {
        let spec = SpuriousMixtureSpec::skewed(a.agreement, a.class1, a.seed)?;
        let ds = spec.to_dataset(&spec.sample_stream(a.n, a.stream)?)?;
        match a.kind {
            InputKind::Probabilities => ds,
            InputKind::Logits => to_logits(&ds)?,
        }
    } else {
        let priors = geometric_priors(a.classes, a.rho)?;
        let spec = GaussianMixtureSpec::simplex_corners(priors.to_simplex(), a.separation, a.sigma, a.seed)?;
        spec.to_dataset(&spec.sample_stream(a.n, a.stream)?, a.kind)?
    };
    io::write_predictions(&a.out, &dataset)
}

fn to_logits(ds: &PredictionDataset) -> Result<PredictionDataset> {
    let rows = ds
        .rows()
        .map(|r| {
            if r.iter().any(|&p| p <= 0.0) {
                return Err(Error::NonFinite("log of a zero probability".into()));
            }
            Ok(r.iter().map(|p| p.ln()).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    PredictionDataset::new(
        rows,
        ds.labels().to_vec(),
        ds.attributes().map(<[usize]>::to_vec),
        InputKind::Logits,
    )
}

fn oracle(a: OracleArgs) -> Result<()> {
    let acc = match (&a.acc, &a.preds) {
        (Some(values), _) => AccuracyVector::new(values.clone())?,
        (None, Some(path)) => crate::metric::per_class_accuracy(&io::load_predictions(path, a.kind)?, None)?,
        (None, None) => return Err(Error::InvalidArgument("need --acc or --preds".into())),
    };
    let spec = divergence_spec(&a.ball, acc.len())?;
    let mut rows = Vec::with_capacity(a.delta_grid.0.len());
    for &delta in &a.delta_grid.0 {
        let ball = DeltaBall::new(spec.clone(), delta)?;
        let solver = delta_worst(&acc, &ball)?.value;
        // Small radii may hold no lattice point; those rows stay blank.
        let grid = match delta_worst_grid_oracle(&acc, &ball, a.step) {
            Ok(v) => Some(v),
            Err(Error::Numerical(_)) => None,
            Err(e) => return Err(e),
        };
        rows.push((delta, solver, grid));
    }
    emit(a.out.as_deref(), |w| {
        writeln!(w, "delta,solver,oracle,abs_diff")?;
        for (delta, solver, grid) in &rows {
            match grid {
                Some(g) => writeln!(w, "{delta},{solver},{g},{}", (solver - g).abs())?,
                None => writeln!(w, "{delta},{solver},,")?,
            }
        }
        Ok(())
    })
}

#[derive(Serialize)]
struct SweepReport {
    level: EvalLevel,
    delta: f64,
    best_w: f64,
    best_value: f64,
    candidates: Vec<(f64, f64)>,
}

fn sweep(a: SweepArgs) -> Result<()> {
    let dataset = load(&a.data)?;
    let dim = match a.level {
        EvalLevel::Class => dataset.num_classes(),
        EvalLevel::Group => dataset.num_classes() * dataset.num_attributes().max(1),
    };
    let ball = DeltaBall::new(divergence_spec(&a.ball, dim)?, a.delta)?;
    let grid = a.grid.clone().unwrap_or_else(default_w_grid);
    let out = binary_scalar_sweep(&dataset, &ball, &grid, a.level)?;
    emit_json(
        a.out.as_deref(),
        &SweepReport {
            level: a.level,
            delta: a.delta,
            best_w: out.best_w,
            best_value: out.best_value,
            candidates: out.candidates,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        let g = parse_grid("0:2:0.05").unwrap().0;
        assert_eq!(g.len(), 41);
        assert_eq!(g[3], 0.15);
        assert_eq!(*g.last().unwrap(), 2.0);
        assert_eq!(parse_grid("0.5:0.5:1").unwrap().0, vec![0.5]);
        assert!(parse_grid("1:0:0.1").is_err());
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("0:1:0").is_err());
    }

    #[test]
    fn usage_errors_exit_with_one() {
        assert_eq!(run(["drops", "frobnicate"]), EXIT_USAGE);
        assert_eq!(
            run(["drops", "eval", "--preds", "x.csv", "--kind", "scores"]),
            EXIT_USAGE
        );
        assert_eq!(run(["drops", "--help"]), EXIT_OK);
    }

    #[test]
    fn exit_codes_by_error_class() {
        assert_eq!(exit_code(&Error::Numerical("x".into())), EXIT_NUMERICAL);
        assert_eq!(exit_code(&Error::EmptyClass(0)), EXIT_DATA);
        assert_eq!(exit_code(&Error::MissingAttributes), EXIT_USAGE);
    }
}
