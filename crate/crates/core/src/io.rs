//! Prediction files and adjustment persistence.
//!
//! Prediction files are CSV with the header `p0,…,p{m-1},label[,attr]`
//! (`l0,…` for logit files). Numbers are written with Rust's shortest
//! round-trip formatting, so `load(write(d)) == d` exactly. Adjustments are
//! JSON documents ([`AdjustmentFile`]) carrying a schema version.
//!
//! Every write goes to a temporary file in the destination directory that is
//! then renamed over the target.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{InputKind, PredictionDataset};
use crate::divergence::{DivergenceKind, SimplexWeights};
use crate::groups::GroupLearned;
use crate::learner::{AveragedScorer, LearnOutcome, LearnerConfig, SaddleTrace, ScorerMode};
use crate::metric::{CurvePoint, RobustCurve};
use crate::posthoc::{ClassPriors, PosthocAdjustment, Predictor};
use crate::{Error, Result};

/// Current [`AdjustmentFile`] schema.
pub const SCHEMA_VERSION: u32 = 1;

/// Writes through `body` into a temporary sibling of `path`, then renames it
/// into place.
pub fn write_atomic<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut out = BufWriter::new(tmp.as_file());
        body(&mut out)?;
        out.flush()?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn format_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Column layout parsed from a prediction-file header.
struct Header {
    num_classes: usize,
    has_attributes: bool,
}

fn parse_header(fields: &csv::StringRecord, path: &Path) -> Result<Header> {
    let names: Vec<&str> = fields.iter().collect();
    let label_at = names
        .iter()
        .position(|n| *n == "label")
        .ok_or_else(|| format_error(path, "header has no 'label' column"))?;
    let prefix = match names.first().and_then(|n| n.chars().next()) {
        Some(c @ ('p' | 'l')) => c,
        _ => {
            return Err(format_error(
                path,
                "header must start with p0 (probabilities) or l0 (logits)",
            ))
        }
    };
    for (i, name) in names[..label_at].iter().enumerate() {
        if *name != format!("{prefix}{i}") {
            return Err(format_error(
                path,
                format!("header column {} is '{name}', expected '{prefix}{i}'", i + 1),
            ));
        }
    }
    let has_attributes = match &names[label_at + 1..] {
        [] => false,
        ["attr"] => true,
        rest => {
            return Err(format_error(
                path,
                format!("unexpected trailing header columns {rest:?}; only 'attr' may follow 'label'"),
            ))
        }
    };
    Ok(Header {
        num_classes: label_at,
        has_attributes,
    })
}

/// Reads a prediction CSV file.
///
/// The header prefix (`p` or `l`) is not checked against `kind`: the rows
/// are validated under the declared kind, so a logit file declared as
/// probabilities fails on its first row that does not sum to one.
pub fn load_predictions(path: &Path, kind: InputKind) -> Result<PredictionDataset> {
    let file = File::open(path).map_err(|e| format_error(path, format!("cannot open: {e}")))?;
    read_predictions(BufReader::new(file), kind, path)
}

/// [`load_predictions`] from any reader; `path` only labels errors.
pub fn read_predictions<R: Read>(reader: R, kind: InputKind, path: &Path) -> Result<PredictionDataset> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = csv
        .headers()
        .map_err(|e| format_error(path, format!("unreadable header: {e}")))?
        .clone();
    if header.is_empty() || header.iter().all(str::is_empty) {
        return Err(format_error(path, "file is empty"));
    }
    let layout = parse_header(&header, path)?;
    let m = layout.num_classes;
    let width = m + 1 + usize::from(layout.has_attributes);

    let mut scores = Vec::new();
    let mut labels = Vec::new();
    let mut attributes = layout.has_attributes.then(Vec::new);
    let mut lines = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        let row = labels.len() + 1;
        let more = csv.read_record(&mut record).map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::Row {
                path: path.to_path_buf(),
                row,
                line,
                message: e.to_string(),
            }
        })?;
        if !more {
            break;
        }
        let line = record.position().map_or(0, |p| p.line() as usize);
        let row_error = |message: String| Error::Row {
            path: path.to_path_buf(),
            row,
            line,
            message,
        };
        if record.len() != width {
            return Err(row_error(format!("expected {width} columns, found {}", record.len())));
        }
        for (j, field) in record.iter().take(m).enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| row_error(format!("column {}: '{field}' is not a number", j + 1)))?;
            scores.push(v);
        }
        let label: usize = record[m]
            .parse()
            .map_err(|_| row_error(format!("label '{}' is not a class index", &record[m])))?;
        labels.push(label);
        if let Some(attrs) = attributes.as_mut() {
            let attr: usize = record[m + 1]
                .parse()
                .map_err(|_| row_error(format!("attribute '{}' is not a nonnegative integer", &record[m + 1])))?;
            attrs.push(attr);
        }
        lines.push(line);
    }
    if labels.is_empty() {
        return Err(format_error(path, "file has a header but no rows"));
    }
    PredictionDataset::from_flat(scores, m, labels, attributes, kind).map_err(|issue| Error::Row {
        path: path.to_path_buf(),
        row: issue.row + 1,
        line: lines[issue.row],
        message: issue.message,
    })
}

/// Writes a dataset in the prediction-file format.
pub fn write_predictions(path: &Path, dataset: &PredictionDataset) -> Result<()> {
    write_atomic(path, |out| write_predictions_to(out, dataset))
}

pub fn write_predictions_to(out: &mut dyn Write, dataset: &PredictionDataset) -> Result<()> {
    let prefix = dataset.kind().column_prefix();
    let mut header: Vec<String> = (0..dataset.num_classes()).map(|i| format!("{prefix}{i}")).collect();
    header.push("label".into());
    if dataset.attributes().is_some() {
        header.push("attr".into());
    }
    writeln!(out, "{}", header.join(","))?;
    for (i, row) in dataset.rows().enumerate() {
        for v in row {
            write!(out, "{v},")?;
        }
        write!(out, "{}", dataset.label(i))?;
        if let Some(a) = dataset.attribute(i) {
            write!(out, ",{a}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// One stored adjustment: the whole run for class-only learning, or one
/// attribute slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredAdjustment {
    pub priors: ClassPriors,
    /// The selected `g` (the mean of the trace in average mode).
    pub weights: SimplexWeights,
    /// `g_i / π̂_i`; checked against `weights` and `priors` on load.
    pub multipliers: Vec<f64>,
    /// Present in average mode; the averaged scorer is rebuilt from it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_trace: Option<Vec<SimplexWeights>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selected_iteration: Option<usize>,
}

/// Provenance of an adjustment file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub created_by: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<LearnerConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

impl Default for Metadata {
    fn default() -> Self {
        Self {
            created_by: concat!("drops ", env!("CARGO_PKG_VERSION")).to_string(),
            config: None,
            source: None,
        }
    }
}

/// The JSON document written by `drops learn`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustmentFile {
    pub schema_version: u32,
    pub divergence: DivergenceKind,
    pub delta_train: f64,
    pub target: SimplexWeights,
    pub scorer_mode: ScorerMode,
    /// One entry per attribute value when true; a single entry otherwise.
    pub per_attribute: bool,
    pub adjustments: Vec<StoredAdjustment>,
    pub metadata: Metadata,
}

fn stored(outcome: &LearnOutcome) -> StoredAdjustment {
    let adj = &outcome.adjustment;
    StoredAdjustment {
        priors: adj.priors().clone(),
        weights: adj.weights().clone(),
        multipliers: adj.multipliers().to_vec(),
        g_trace: (outcome.scorer.mode() == ScorerMode::Average).then(|| outcome.scorer.g_trace().to_vec()),
        selected_iteration: outcome.selected_iteration,
    }
}

impl AdjustmentFile {
    /// Packs a learning run together with its configuration.
    pub fn from_learned(learned: &GroupLearned, config: &LearnerConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            divergence: config.divergence.kind,
            delta_train: config.delta_train,
            target: config.divergence.target.clone(),
            scorer_mode: config.scorer_mode,
            per_attribute: matches!(learned, GroupLearned::PerAttribute(_)),
            adjustments: learned.outcomes().iter().map(stored).collect(),
            metadata: Metadata {
                config: Some(config.clone()),
                ..Metadata::default()
            },
        }
    }

    /// A file holding one fixed adjustment.
    pub fn from_adjustment(adj: &PosthocAdjustment, target: SimplexWeights) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            divergence: adj.divergence_kind(),
            delta_train: adj.delta_train(),
            target,
            scorer_mode: ScorerMode::Last,
            per_attribute: false,
            adjustments: vec![StoredAdjustment {
                priors: adj.priors().clone(),
                weights: adj.weights().clone(),
                multipliers: adj.multipliers().to_vec(),
                g_trace: None,
                selected_iteration: None,
            }],
            metadata: Metadata::default(),
        }
    }

    pub fn num_classes(&self) -> usize {
        self.target.len()
    }

    /// Checks internal consistency: schema, dimensions and multipliers.
    pub fn validate(&self) -> Result<()> {
        let bad = |message: String| Err(Error::InvalidArgument(message));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!(
                "unsupported schema version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.adjustments.is_empty() {
            return bad("adjustment file has no adjustments".into());
        }
        if !self.per_attribute && self.adjustments.len() != 1 {
            return bad(format!("{} adjustments in a class-only file", self.adjustments.len()));
        }
        if !(self.delta_train >= 0.0 && self.delta_train.is_finite()) {
            return bad(format!(
                "delta_train {} is not a finite nonnegative number",
                self.delta_train
            ));
        }
        let m = self.num_classes();
        for (a, s) in self.adjustments.iter().enumerate() {
            let adj = self.rebuild(s)?;
            if adj.num_classes() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: adj.num_classes(),
                });
            }
            if adj.multipliers() != s.multipliers.as_slice() {
                return bad(format!("adjustment {a}: multipliers disagree with weights / priors"));
            }
            if self.scorer_mode == ScorerMode::Average && s.g_trace.as_ref().is_none_or(Vec::is_empty) {
                return bad(format!("adjustment {a}: average mode needs a g_trace"));
            }
        }
        Ok(())
    }

    fn rebuild(&self, s: &StoredAdjustment) -> Result<PosthocAdjustment> {
        PosthocAdjustment::new(s.weights.clone(), s.priors.clone(), self.delta_train, self.divergence)
    }

    /// The classifier described by the file.
    pub fn predictor(&self) -> Result<StoredPredictor> {
        self.validate()?;
        let slices = self
            .adjustments
            .iter()
            .map(|s| match (&s.g_trace, self.scorer_mode) {
                (Some(trace), ScorerMode::Average) => Ok(SlicePredictor::Averaged(AveragedScorer::new(
                    trace.clone(),
                    s.priors.clone(),
                    ScorerMode::Average,
                )?)),
                _ => Ok(SlicePredictor::Adjusted(self.rebuild(s)?)),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(StoredPredictor {
            per_attribute: self.per_attribute,
            slices,
        })
    }
}

/// Classifier of one slice of a loaded [`AdjustmentFile`].
#[derive(Debug, Clone, PartialEq)]
pub enum SlicePredictor {
    Adjusted(PosthocAdjustment),
    Averaged(AveragedScorer),
}

impl SlicePredictor {
    fn as_predictor(&self) -> &dyn Predictor {
        match self {
            SlicePredictor::Adjusted(a) => a,
            SlicePredictor::Averaged(s) => s,
        }
    }
}

/// A loaded adjustment file ready to label rows.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredPredictor {
    pub per_attribute: bool,
    pub slices: Vec<SlicePredictor>,
}

impl Predictor for StoredPredictor {
    fn num_classes(&self) -> usize {
        self.slices[0].as_predictor().num_classes()
    }

    fn predict_row(&self, row: &[f64], kind: InputKind, attribute: Option<usize>) -> Result<usize> {
        if !self.per_attribute {
            return self.slices[0].as_predictor().predict_row(row, kind, attribute);
        }
        let a = attribute.ok_or(Error::MissingAttributes)?;
        let slice = self.slices.get(a).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "attribute {a} has no adjustment ({} stored)",
                self.slices.len()
            ))
        })?;
        slice.as_predictor().predict_row(row, kind, attribute)
    }
}

pub fn write_adjustment(path: &Path, file: &AdjustmentFile) -> Result<()> {
    write_atomic(path, |out| {
        serde_json::to_writer_pretty(&mut *out, file)?;
        writeln!(out)?;
        Ok(())
    })
}

/// Reads and validates an adjustment file.
pub fn read_adjustment(path: &Path) -> Result<AdjustmentFile> {
    let file = File::open(path).map_err(|e| format_error(path, format!("cannot open: {e}")))?;
    let parsed: AdjustmentFile = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| format_error(path, format!("not a valid adjustment file: {e}")))?;
    parsed.validate().map_err(|e| format_error(path, e.to_string()))?;
    Ok(parsed)
}

/// Reads a target prior: a JSON array of nonnegative weights summing to one.
pub fn read_target(path: &Path) -> Result<SimplexWeights> {
    let text = std::fs::read_to_string(path).map_err(|e| format_error(path, format!("cannot open: {e}")))?;
    serde_json::from_str(&text).map_err(|e| format_error(path, format!("not a target distribution: {e}")))
}

/// Writes a curve as CSV with columns `delta,value,g_0,…`.
pub fn write_curve(path: &Path, curve: &RobustCurve) -> Result<()> {
    write_atomic(path, |out| write_curve_to(out, curve))
}

pub fn write_curve_to(out: &mut dyn Write, curve: &RobustCurve) -> Result<()> {
    let m = curve.points.first().map_or(0, |p| p.weights.len());
    let mut header = vec!["delta".to_string(), "value".to_string()];
    header.extend((0..m).map(|i| format!("g_{i}")));
    writeln!(out, "{}", header.join(","))?;
    for p in &curve.points {
        write!(out, "{},{}", p.delta, p.value)?;
        for w in p.weights.iter() {
            write!(out, ",{w}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Reads a curve written by [`write_curve`].
pub fn read_curve(path: &Path) -> Result<RobustCurve> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| format_error(path, e.to_string()))?;
    let mut points = Vec::new();
    for (row, record) in csv.records().enumerate() {
        let record = record.map_err(|e| format_error(path, e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let values = record
            .iter()
            .map(str::parse::<f64>)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Row {
                path: path.to_path_buf(),
                row: row + 1,
                line,
                message: e.to_string(),
            })?;
        if values.len() < 3 {
            return Err(format_error(path, "curve rows need delta, value and weights"));
        }
        points.push(CurvePoint {
            delta: values[0],
            value: values[1],
            weights: SimplexWeights::new(values[2..].to_vec())?,
        });
    }
    Ok(RobustCurve { points })
}

/// Writes a learning trace as CSV: `t,lambda,lagrangian,robust_loss`, then
/// `g_i`, `loss_i` and `acc_i` for every class.
pub fn write_trace(path: &Path, trace: &SaddleTrace) -> Result<()> {
    write_atomic(path, |out| write_trace_to(out, trace))
}

pub fn write_trace_to(out: &mut dyn Write, trace: &SaddleTrace) -> Result<()> {
    let m = trace.records.first().map_or(0, |r| r.weights.len());
    let mut header: Vec<String> = ["t", "lambda", "lagrangian", "robust_loss"].map(String::from).into();
    for name in ["g", "loss", "acc"] {
        header.extend((0..m).map(|i| format!("{name}_{i}")));
    }
    writeln!(out, "{}", header.join(","))?;
    for r in &trace.records {
        write!(out, "{},{},{},{}", r.iteration, r.lambda, r.lagrangian, r.robust_loss)?;
        for v in r.weights.iter().chain(&r.losses).chain(&r.accuracies) {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Writes predicted labels, one per row, with the true label alongside.
pub fn write_labels(path: &Path, predicted: &[usize], truth: &[usize]) -> Result<()> {
    write_atomic(path, |out| {
        writeln!(out, "row,predicted,label")?;
        for (i, (p, y)) in predicted.iter().zip(truth).enumerate() {
            writeln!(out, "{i},{p},{y}")?;
        }
        Ok(())
    })
}

/// Serializes any value as pretty JSON, atomically.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, |out| {
        serde_json::to_writer_pretty(&mut *out, value)?;
        writeln!(out)?;
        Ok(())
    })
}

/// Resolves `path`, treating `-` as "no file".
pub fn output_path(path: Option<&Path>) -> Option<PathBuf> {
    path.filter(|p| p.as_os_str() != "-").map(Path::to_path_buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str, kind: InputKind) -> Result<PredictionDataset> {
        read_predictions(text.as_bytes(), kind, Path::new("mem.csv"))
    }

    #[test]
    fn loads_a_small_file() {
        let ds = load("p0,p1,label\n0.7,0.3,0\n0.2,0.8,1\n", InputKind::Probabilities).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.class_counts(), &[1, 1]);
        assert!(ds.attributes().is_none());

        let ds = load("l0,l1,l2,label,attr\n1,2,3,2,0\n-1,0.5,0,0,1\n", InputKind::Logits).unwrap();
        assert_eq!(ds.num_classes(), 3);
        assert_eq!(ds.attributes().unwrap(), &[0, 1]);
    }

    fn row_of(err: Error) -> (usize, usize, String) {
        match err {
            Error::Row { row, line, message, .. } => (row, line, message),
            other => panic!("expected a row error, got {other}"),
        }
    }

    #[test]
    fn row_sum_violation_names_the_row() {
        let err = load("p0,p1,label\n0.5,0.5,0\n0.5,0.3,1\n", InputKind::Probabilities).unwrap_err();
        let (row, line, message) = row_of(err);
        assert_eq!((row, line), (2, 3));
        assert!(message.contains("sum"), "{message}");
    }

    #[test]
    fn logits_declared_as_probabilities_fail_on_row_sum() {
        let text = "l0,l1,label\n0.5,0.5,0\n2.0,-1.0,1\n";
        assert!(load(text, InputKind::Logits).is_ok());
        let (row, _, message) = row_of(load(text, InputKind::Probabilities).unwrap_err());
        assert_eq!(row, 2);
        assert!(message.contains("sum") || message.contains("negative"), "{message}");
    }

    #[test]
    fn malformed_files_are_rejected() {
        let cases = [
            ("", "empty"),
            ("p0,p1\n0.5,0.5\n", "no label"),
            ("p0,p2,label\n0.5,0.5,0\n", "gap"),
            ("p0,l1,label\n0.5,0.5,0\n", "mixed"),
            ("x0,x1,label\n0.5,0.5,0\n", "prefix"),
            ("p0,p1,label,group\n0.5,0.5,0,1\n", "trailing"),
            ("p0,p1,label\n", "no rows"),
        ];
        for (text, why) in cases {
            assert!(
                matches!(load(text, InputKind::Probabilities), Err(Error::Format { .. })),
                "{why}"
            );
        }
        let rows = [
            ("p0,p1,label\n0.5,0.5\n", 1),
            ("p0,p1,label\n0.5,0.5,0\n0.5,abc,1\n", 2),
            ("p0,p1,label\n0.5,0.5,2\n", 1),
            ("p0,p1,label\n0.5,0.5,-1\n", 1),
            ("p0,p1,label\n0.5,0.5,0\nNaN,0.5,1\n", 2),
            ("p0,p1,label,attr\n0.5,0.5,0,x\n", 1),
            ("p0,p1,label\n1.5,-0.5,0\n", 1),
        ];
        for (text, want) in rows {
            let (row, line, _) = row_of(load(text, InputKind::Probabilities).unwrap_err());
            assert_eq!((row, line), (want, want + 1), "{text:?}");
        }
    }

    #[test]
    fn predictions_round_trip_exactly() {
        let ds = PredictionDataset::new(
            vec![
                vec![0.1, 0.2, 0.7000000000000001],
                vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
            ],
            vec![2, 0],
            Some(vec![0, 3]),
            InputKind::Probabilities,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("preds.csv");
        write_predictions(&path, &ds).unwrap();
        assert_eq!(load_predictions(&path, InputKind::Probabilities).unwrap(), ds);
    }

    #[test]
    fn adjustment_file_round_trips_and_validates() {
        let priors = ClassPriors::new(vec![0.7, 0.2, 0.1]).unwrap();
        let g = SimplexWeights::new(vec![0.1, 0.3, 0.6]).unwrap();
        let adj = PosthocAdjustment::new(g, priors, 0.4, DivergenceKind::ReverseKl).unwrap();
        let file = AdjustmentFile::from_adjustment(&adj, SimplexWeights::uniform(3));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("adj.json");
        write_adjustment(&path, &file).unwrap();
        let back = read_adjustment(&path).unwrap();
        assert_eq!(back, file);
        let SlicePredictor::Adjusted(rebuilt) = &back.predictor().unwrap().slices[0] else {
            panic!("expected a single adjustment")
        };
        assert_eq!(rebuilt, &adj);

        let mut tampered = file.clone();
        tampered.adjustments[0].multipliers[1] *= 1.0 + 1e-15;
        assert!(tampered.validate().is_err());
        let mut future = file;
        future.schema_version = 2;
        assert!(future.validate().is_err());
    }

    #[test]
    fn curve_and_target_files() {
        let dir = tempfile::tempdir().unwrap();
        let curve = RobustCurve {
            points: vec![
                CurvePoint {
                    delta: 0.0,
                    value: 0.7,
                    weights: SimplexWeights::uniform(2),
                },
                CurvePoint {
                    delta: 0.05,
                    value: 0.6686436803270066,
                    weights: SimplexWeights::new(vec![0.34321840163503325, 0.6567815983649667]).unwrap(),
                },
            ],
        };
        let path = dir.path().join("curve.csv");
        write_curve(&path, &curve).unwrap();
        assert_eq!(read_curve(&path).unwrap(), curve);

        let target = dir.path().join("target.json");
        std::fs::write(&target, "[0.25, 0.75]").unwrap();
        assert_eq!(read_target(&target).unwrap().as_slice(), &[0.25, 0.75]);
        std::fs::write(&target, "[0.25, 0.7]").unwrap();
        assert!(read_target(&target).is_err());
    }
}
