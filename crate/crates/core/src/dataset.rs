//! In-memory prediction datasets: one row of model scores per validation
//! example, plus its label and an optional spurious attribute.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::posthoc::{softmax, ClassPriors};
use crate::{Error, Result};

/// Tolerance on the row sum of probability rows.
pub const ROW_SUM_TOLERANCE: f64 = 1e-6;

/// How the score columns of a dataset are to be read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InputKind {
    #[serde(rename = "probs")]
    Probabilities,
    #[serde(rename = "logits")]
    Logits,
}

impl InputKind {
    /// Column prefix used when writing prediction files.
    pub fn column_prefix(self) -> char {
        match self {
            InputKind::Probabilities => 'p',
            InputKind::Logits => 'l',
        }
    }
}

impl fmt::Display for InputKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputKind::Probabilities => f.pad("probs"),
            InputKind::Logits => f.pad("logits"),
        }
    }
}

impl FromStr for InputKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "probs" | "probabilities" => Ok(InputKind::Probabilities),
            "logits" => Ok(InputKind::Logits),
            other => Err(Error::InvalidArgument(format!(
                "unknown input kind '{other}' (expected probs or logits)"
            ))),
        }
    }
}

/// A row-level validation failure, before it is tied to a file location.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct RowIssue {
    pub row: usize,
    pub message: String,
}

/// Validated `n × m` model scores with labels and optional attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionDataset {
    scores: Vec<f64>,
    num_classes: usize,
    labels: Vec<usize>,
    attributes: Option<Vec<usize>>,
    num_attributes: usize,
    class_counts: Vec<usize>,
    kind: InputKind,
}

impl PredictionDataset {
    pub fn new(
        rows: Vec<Vec<f64>>,
        labels: Vec<usize>,
        attributes: Option<Vec<usize>>,
        kind: InputKind,
    ) -> Result<Self> {
        let num_classes = rows.first().map_or(0, Vec::len);
        let scores: Vec<f64> = rows.iter().flatten().copied().collect();
        if let Some(row) = rows.iter().position(|r| r.len() != num_classes) {
            return Err(Error::InvalidArgument(format!(
                "row {row}: expected {num_classes} scores, found {}",
                rows[row].len()
            )));
        }
        Self::from_flat(scores, num_classes, labels, attributes, kind)
            .map_err(|issue| Error::InvalidArgument(format!("row {}: {}", issue.row, issue.message)))
    }

    /// Builds a dataset from row-major scores, reporting the first offending
    /// row on failure.
    pub(crate) fn from_flat(
        scores: Vec<f64>,
        num_classes: usize,
        labels: Vec<usize>,
        attributes: Option<Vec<usize>>,
        kind: InputKind,
    ) -> std::result::Result<Self, RowIssue> {
        let whole = |message: String| RowIssue { row: 0, message };
        if num_classes < 2 {
            return Err(whole(format!("need at least 2 classes, found {num_classes}")));
        }
        if labels.is_empty() {
            return Err(whole("dataset has no rows".into()));
        }
        if scores.len() != labels.len() * num_classes {
            return Err(whole(format!(
                "{} scores do not fill {} rows of {num_classes}",
                scores.len(),
                labels.len()
            )));
        }
        if let Some(attrs) = &attributes {
            if attrs.len() != labels.len() {
                return Err(whole(format!("{} attributes for {} rows", attrs.len(), labels.len())));
            }
        }
        for (row, chunk) in scores.chunks_exact(num_classes).enumerate() {
            validate_row(chunk, kind).map_err(|message| RowIssue { row, message })?;
            if labels[row] >= num_classes {
                return Err(RowIssue {
                    row,
                    message: format!("label {} outside [0, {num_classes})", labels[row]),
                });
            }
        }
        let mut class_counts = vec![0; num_classes];
        for &y in &labels {
            class_counts[y] += 1;
        }
        let num_attributes = attributes.as_ref().map_or(0, |a| a.iter().max().map_or(0, |m| m + 1));
        Ok(Self {
            scores,
            num_classes,
            labels,
            attributes,
            num_attributes,
            class_counts,
            kind,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn kind(&self) -> InputKind {
        self.kind
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.scores[i * self.num_classes..(i + 1) * self.num_classes]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.scores.chunks_exact(self.num_classes)
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn attribute(&self, i: usize) -> Option<usize> {
        self.attributes.as_ref().map(|a| a[i])
    }

    pub fn attributes(&self) -> Option<&[usize]> {
        self.attributes.as_deref()
    }

    /// Number of distinct attribute values (`max + 1`), zero without an
    /// attribute column.
    pub fn num_attributes(&self) -> usize {
        self.num_attributes
    }

    pub fn class_counts(&self) -> &[usize] {
        &self.class_counts
    }

    /// Row `i` as class probabilities, applying softmax to logit rows.
    pub fn probabilities(&self, i: usize) -> Vec<f64> {
        match self.kind {
            InputKind::Probabilities => self.row(i).to_vec(),
            InputKind::Logits => softmax(self.row(i))
                .expect("logit rows are validated finite")
                .into_vec(),
        }
    }

    /// Empirical class prior `π̂_i = n_i / n`.
    pub fn empirical_priors(&self) -> Result<ClassPriors> {
        ClassPriors::from_counts(&self.class_counts)
    }

    /// Fails with [`Error::EmptyClass`] when some class has no rows.
    pub fn require_all_classes(&self) -> Result<()> {
        match self.class_counts.iter().position(|&c| c == 0) {
            Some(class) => Err(Error::EmptyClass(class)),
            None => Ok(()),
        }
    }

    /// The rows at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidArgument("empty subset".into()));
        }
        let mut scores = Vec::with_capacity(indices.len() * self.num_classes);
        for &i in indices {
            scores.extend_from_slice(self.row(i));
        }
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        let attributes = self
            .attributes
            .as_ref()
            .map(|a| indices.iter().map(|&i| a[i]).collect());
        let mut out = Self::from_flat(scores, self.num_classes, labels, attributes, self.kind)
            .map_err(|issue| Error::InvalidArgument(issue.message))?;
        out.num_attributes = out.num_attributes.max(self.num_attributes);
        Ok(out)
    }
}

fn validate_row(row: &[f64], kind: InputKind) -> std::result::Result<(), String> {
    if let Some(j) = row.iter().position(|v| !v.is_finite()) {
        return Err(format!("score column {j} is not finite ({})", row[j]));
    }
    if kind == InputKind::Probabilities {
        if let Some(j) = row.iter().position(|&v| v < 0.0) {
            return Err(format!("probability column {j} is negative ({})", row[j]));
        }
        let total: f64 = row.iter().sum();
        if (total - 1.0).abs() > ROW_SUM_TOLERANCE {
            return Err(format!("probabilities sum to {total}, not 1"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_counts_follow_labels() {
        let ds = PredictionDataset::new(
            vec![vec![0.9, 0.1], vec![0.3, 0.7], vec![0.2, 0.8]],
            vec![0, 1, 1],
            None,
            InputKind::Probabilities,
        )
        .unwrap();
        assert_eq!(ds.class_counts(), &[1, 2]);
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.row(1), &[0.3, 0.7]);
        assert_eq!(ds.num_attributes(), 0);
    }

    #[test]
    fn rejects_bad_rows() {
        let bad_sum = PredictionDataset::new(
            vec![vec![0.5, 0.5], vec![0.5, 0.3]],
            vec![0, 1],
            None,
            InputKind::Probabilities,
        );
        let msg = bad_sum.unwrap_err().to_string();
        assert!(msg.contains("row 1"), "{msg}");

        let bad_label = PredictionDataset::new(vec![vec![0.5, 0.5]], vec![2], None, InputKind::Probabilities);
        assert!(bad_label.is_err());

        let nan = PredictionDataset::new(vec![vec![f64::NAN, 1.0]], vec![0], None, InputKind::Logits);
        assert!(nan.is_err());
    }

    #[test]
    fn logits_need_not_sum_to_one() {
        let ds = PredictionDataset::new(vec![vec![2.0, -1.0]], vec![0], Some(vec![3]), InputKind::Logits).unwrap();
        let p = ds.probabilities(0);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(ds.num_attributes(), 4);
    }

    #[test]
    fn empty_class_is_reported() {
        let ds = PredictionDataset::new(vec![vec![0.5, 0.5]], vec![0], None, InputKind::Probabilities).unwrap();
        assert!(matches!(ds.require_all_classes(), Err(Error::EmptyClass(1))));
        assert!(matches!(ds.empirical_priors(), Err(Error::EmptyClass(1))));
    }
}
