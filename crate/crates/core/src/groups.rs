//! Group prior shift: evaluation over `(attribute, class)` groups, learning
//! one adjustment per attribute value, and the single-scalar sweep for
//! binary tasks.
//!
//! Group `(a, y)` has index `a · |Y| + y`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{InputKind, PredictionDataset};
use crate::learner::{learn, LearnOutcome, LearnerConfig};
use crate::metric::{delta_worst, per_class_accuracy_with, AccuracyVector, DeltaBall};
use crate::posthoc::{argmax_additive, argmax_multiplicative, ClassPriors, PosthocAdjustment, Predictor};
use crate::{Error, Result};

/// Index of group `(attribute, class)`.
pub fn group_index(attribute: usize, class: usize, num_classes: usize) -> usize {
    attribute * num_classes + class
}

/// Whether accuracies are taken per class or per `(attribute, class)` group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalLevel {
    #[default]
    Class,
    Group,
}

/// How group information is used when learning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupMode {
    /// Ignore attributes; learn from class labels alone.
    #[default]
    ClassOnly,
    /// Learn one adjustment per attribute value, each with the attribute's
    /// own class priors.
    PerAttribute,
}

impl fmt::Display for EvalLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            EvalLevel::Class => "class",
            EvalLevel::Group => "group",
        })
    }
}

impl FromStr for EvalLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "class" => Ok(EvalLevel::Class),
            "group" => Ok(EvalLevel::Group),
            other => Err(Error::InvalidArgument(format!("unknown level '{other}'"))),
        }
    }
}

impl fmt::Display for GroupMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            GroupMode::ClassOnly => "class_only",
            GroupMode::PerAttribute => "per_attribute",
        })
    }
}

impl FromStr for GroupMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "class_only" => Ok(GroupMode::ClassOnly),
            "per_attribute" => Ok(GroupMode::PerAttribute),
            other => Err(Error::InvalidArgument(format!("unknown group mode '{other}'"))),
        }
    }
}

/// Attribute-specific class priors `π_{a,i} = P(y = i | a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupPriors(pub Vec<ClassPriors>);

impl GroupPriors {
    /// Empirical `π̂_{a,·}` for every attribute value in the dataset.
    pub fn from_dataset(dataset: &PredictionDataset) -> Result<Self> {
        let attributes = dataset.attributes().ok_or(Error::MissingAttributes)?;
        let m = dataset.num_classes();
        let mut counts = vec![vec![0usize; m]; dataset.num_attributes()];
        for (&a, &y) in attributes.iter().zip(dataset.labels()) {
            counts[a][y] += 1;
        }
        counts
            .iter()
            .enumerate()
            .map(|(a, c)| {
                ClassPriors::from_counts(c).map_err(|e| match e {
                    Error::EmptyClass(class) => Error::EmptyGroup { attribute: a, class },
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }
}

/// One adjustment per attribute value; rows are rescaled by the adjustment
/// of their own attribute.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupAdjustment {
    pub adjustments: Vec<PosthocAdjustment>,
}

impl GroupAdjustment {
    pub fn new(adjustments: Vec<PosthocAdjustment>) -> Result<Self> {
        let Some(first) = adjustments.first() else {
            return Err(Error::InvalidArgument(
                "group adjustment needs at least one attribute".into(),
            ));
        };
        let m = first.num_classes();
        if let Some(a) = adjustments.iter().find(|a| a.num_classes() != m) {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: a.num_classes(),
            });
        }
        Ok(Self { adjustments })
    }
}

fn attribute_of(attribute: Option<usize>, available: usize) -> Result<usize> {
    let a = attribute.ok_or(Error::MissingAttributes)?;
    if a >= available {
        return Err(Error::InvalidArgument(format!(
            "attribute {a} has no adjustment ({available} available)"
        )));
    }
    Ok(a)
}

impl Predictor for GroupAdjustment {
    fn num_classes(&self) -> usize {
        self.adjustments[0].num_classes()
    }

    fn predict_row(&self, row: &[f64], kind: InputKind, attribute: Option<usize>) -> Result<usize> {
        let a = attribute_of(attribute, self.adjustments.len())?;
        self.adjustments[a].predict_row(row, kind, attribute)
    }
}

/// Result of [`learn_group`].
#[derive(Debug, Clone, PartialEq)]
pub enum GroupLearned {
    ClassOnly(Box<LearnOutcome>),
    PerAttribute(Vec<LearnOutcome>),
}

impl GroupLearned {
    pub fn outcomes(&self) -> &[LearnOutcome] {
        match self {
            GroupLearned::ClassOnly(o) => std::slice::from_ref(o.as_ref()),
            GroupLearned::PerAttribute(v) => v,
        }
    }

    /// The per-attribute adjustments, if learned per attribute.
    pub fn group_adjustment(&self) -> Option<GroupAdjustment> {
        match self {
            GroupLearned::ClassOnly(_) => None,
            GroupLearned::PerAttribute(v) => Some(GroupAdjustment {
                adjustments: v.iter().map(|o| o.adjustment.clone()).collect(),
            }),
        }
    }
}

impl Predictor for GroupLearned {
    fn num_classes(&self) -> usize {
        self.outcomes()[0].predictor().num_classes()
    }

    fn predict_row(&self, row: &[f64], kind: InputKind, attribute: Option<usize>) -> Result<usize> {
        match self {
            GroupLearned::ClassOnly(o) => o.predictor().predict_row(row, kind, attribute),
            GroupLearned::PerAttribute(v) => {
                let a = attribute_of(attribute, v.len())?;
                v[a].predictor().predict_row(row, kind, attribute)
            }
        }
    }
}

/// Learns a class-only adjustment, or one adjustment per attribute slice.
pub fn learn_group(dataset: &PredictionDataset, config: &LearnerConfig, mode: GroupMode) -> Result<GroupLearned> {
    match mode {
        GroupMode::ClassOnly => {
            let priors = dataset.empirical_priors()?;
            Ok(GroupLearned::ClassOnly(Box::new(learn(dataset, &priors, config)?)))
        }
        GroupMode::PerAttribute => {
            let attributes = dataset.attributes().ok_or(Error::MissingAttributes)?;
            let priors = GroupPriors::from_dataset(dataset)?;
            let mut outcomes = Vec::with_capacity(priors.0.len());
            for (a, slice_priors) in priors.0.iter().enumerate() {
                let rows: Vec<usize> = (0..dataset.len()).filter(|&i| attributes[i] == a).collect();
                if rows.is_empty() {
                    return Err(Error::EmptyAttribute(a));
                }
                let slice = dataset.subset(&rows)?;
                outcomes.push(learn(&slice, slice_priors, config)?);
            }
            Ok(GroupLearned::PerAttribute(outcomes))
        }
    }
}

/// Accuracy in every `(attribute, class)` group, indexed `a · |Y| + y`.
pub fn group_accuracy_with<P: Predictor + ?Sized>(
    dataset: &PredictionDataset,
    predictor: &P,
) -> Result<AccuracyVector> {
    let attributes = dataset.attributes().ok_or(Error::MissingAttributes)?;
    let m = dataset.num_classes();
    let k = dataset.num_attributes();
    let mut correct = vec![0usize; k * m];
    let mut count = vec![0usize; k * m];
    for (i, row) in dataset.rows().enumerate() {
        let (a, y) = (attributes[i], dataset.label(i));
        let g = group_index(a, y, m);
        count[g] += 1;
        if predictor.predict_row(row, dataset.kind(), Some(a))? == y {
            correct[g] += 1;
        }
    }
    if let Some(g) = count.iter().position(|&c| c == 0) {
        return Err(Error::EmptyGroup {
            attribute: g / m,
            class: g % m,
        });
    }
    AccuracyVector::new(correct.iter().zip(&count).map(|(&c, &n)| c as f64 / n as f64).collect())
}

/// Group accuracies of the unadjusted classifier, or of an adjusted one.
pub fn group_accuracy(dataset: &PredictionDataset, predictor: Option<&dyn Predictor>) -> Result<AccuracyVector> {
    match predictor {
        Some(p) => group_accuracy_with(dataset, p),
        None => group_accuracy_with(
            dataset,
            &crate::posthoc::Unadjusted {
                num_classes: dataset.num_classes(),
            },
        ),
    }
}

/// Accuracies at the requested level.
pub fn accuracy_at_level<P: Predictor + ?Sized>(
    dataset: &PredictionDataset,
    predictor: &P,
    level: EvalLevel,
) -> Result<AccuracyVector> {
    match level {
        EvalLevel::Class => per_class_accuracy_with(dataset, predictor),
        EvalLevel::Group => group_accuracy_with(dataset, predictor),
    }
}

/// Binary rescaling of the class-1 score by `w`: predict 1 iff `w p_1 > p_0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryScalar {
    pub w: f64,
}

impl Predictor for BinaryScalar {
    fn num_classes(&self) -> usize {
        2
    }

    fn predict_row(&self, row: &[f64], kind: InputKind, _attribute: Option<usize>) -> Result<usize> {
        match kind {
            InputKind::Probabilities => argmax_multiplicative(row, &[1.0, self.w]),
            InputKind::Logits => argmax_additive(row, &[0.0, self.w.ln()]),
        }
    }
}

/// 81 log-spaced points covering `[1e-2, 1e2]`; contains 1 exactly.
pub fn default_w_grid() -> Vec<f64> {
    (0..=80).map(|i| 10f64.powf(-2.0 + 4.0 * i as f64 / 80.0)).collect()
}

/// Outcome of [`binary_scalar_sweep`].
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub best_w: f64,
    pub best_value: f64,
    /// `(w, δ-worst accuracy)` for every grid point, in grid order.
    pub candidates: Vec<(f64, f64)>,
}

/// Picks the class-1 scale `w` maximizing the δ-worst accuracy on
/// `dataset` (lowest `w` among ties).
pub fn binary_scalar_sweep(
    dataset: &PredictionDataset,
    ball: &DeltaBall,
    grid: &[f64],
    level: EvalLevel,
) -> Result<SweepResult> {
    if dataset.num_classes() != 2 {
        return Err(Error::InvalidArgument(format!(
            "scalar sweep needs exactly 2 classes, found {}",
            dataset.num_classes()
        )));
    }
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty sweep grid".into()));
    }
    if let Some(w) = grid.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
        return Err(Error::InvalidArgument(format!("sweep grid entry {w} must be positive")));
    }
    let mut candidates = Vec::with_capacity(grid.len());
    let mut best: Option<(f64, f64)> = None;
    for &w in grid {
        let acc = accuracy_at_level(dataset, &BinaryScalar { w }, level)?;
        let value = delta_worst(&acc, ball)?.value;
        candidates.push((w, value));
        let better = match best {
            None => true,
            Some((bw, bv)) => value > bv || (value == bv && w < bw),
        };
        if better {
            best = Some((w, value));
        }
    }
    let (best_w, best_value) = best.expect("grid is nonempty");
    Ok(SweepResult {
        best_w,
        best_value,
        candidates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergence::{DivergenceKind, DivergenceSpec, SimplexWeights};
    use crate::learner::{GUpdate, LossKind, ScorerMode};
    use crate::posthoc::Unadjusted;
    use crate::synth::SpuriousMixtureSpec;

    fn four_groups(rows: Vec<Vec<f64>>) -> PredictionDataset {
        PredictionDataset::new(rows, vec![0, 1, 0, 1], Some(vec![0, 0, 1, 1]), InputKind::Probabilities).unwrap()
    }

    #[test]
    fn group_accuracy_examples() {
        let all = four_groups(vec![vec![0.9, 0.1], vec![0.2, 0.8], vec![0.7, 0.3], vec![0.4, 0.6]]);
        assert_eq!(group_accuracy(&all, None).unwrap().as_slice(), &[1.0; 4]);

        let half = four_groups(vec![vec![0.9, 0.1], vec![0.2, 0.8], vec![0.3, 0.7], vec![0.6, 0.4]]);
        assert_eq!(group_accuracy(&half, None).unwrap().as_slice(), &[1.0, 1.0, 0.0, 0.0]);

        let flat = PredictionDataset::new(vec![vec![0.5, 0.5]; 2], vec![0, 1], None, InputKind::Probabilities).unwrap();
        assert!(matches!(group_accuracy(&flat, None), Err(Error::MissingAttributes)));
        let missing = PredictionDataset::new(
            vec![vec![0.5, 0.5]; 3],
            vec![0, 1, 0],
            Some(vec![0, 0, 1]),
            InputKind::Probabilities,
        )
        .unwrap();
        assert!(matches!(
            group_accuracy(&missing, None),
            Err(Error::EmptyGroup { attribute: 1, class: 1 })
        ));
    }

    fn skewed(n: usize, stream: u64) -> PredictionDataset {
        let spec = SpuriousMixtureSpec::skewed(0.9, 0.3, 11).unwrap();
        spec.to_dataset(&spec.sample_stream(n, stream).unwrap()).unwrap()
    }

    #[test]
    fn adjustment_flipping_minority_groups_matches_tabulation() {
        let ds = skewed(2000, 0);
        let priors = ClassPriors::uniform(2).unwrap();
        let adj = PosthocAdjustment::new(
            SimplexWeights::new(vec![0.3, 0.7]).unwrap(),
            priors,
            0.0,
            DivergenceKind::Kl,
        )
        .unwrap();
        let got = group_accuracy(&ds, Some(&adj)).unwrap();
        let attributes = ds.attributes().unwrap();
        let mut hits = [0usize; 4];
        let mut counts = [0usize; 4];
        for (i, (row, &a)) in ds.rows().zip(attributes).enumerate() {
            let pred = usize::from(0.7 * row[1] > 0.3 * row[0]);
            let g = 2 * a + ds.label(i);
            counts[g] += 1;
            hits[g] += usize::from(pred == ds.label(i));
        }
        for g in 0..4 {
            assert_eq!(got.as_slice()[g], hits[g] as f64 / counts[g] as f64);
        }
    }

    #[test]
    fn group_accuracy_recovers_overall_accuracy() {
        let ds = skewed(3000, 1);
        let acc = group_accuracy(&ds, None).unwrap();
        let attributes = ds.attributes().unwrap();
        let mut counts = [0usize; 4];
        let mut correct = 0usize;
        for i in 0..ds.len() {
            counts[group_index(attributes[i], ds.label(i), 2)] += 1;
            correct += usize::from(crate::posthoc::argmax(ds.row(i)) == ds.label(i));
        }
        let weighted: f64 = acc
            .as_slice()
            .iter()
            .zip(counts)
            .map(|(a, c)| a * c as f64 / ds.len() as f64)
            .sum();
        assert!((weighted - correct as f64 / ds.len() as f64).abs() < 1e-9);
        assert!(acc.as_slice().iter().all(|a| (0.0..=1.0).contains(a)));
    }

    fn config(m: usize) -> LearnerConfig {
        LearnerConfig {
            delta_train: 0.3,
            divergence: DivergenceSpec::uniform(DivergenceKind::Kl, m),
            iterations: 40,
            eta_lambda: 0.5,
            eta_g: 0.05,
            lambda_cap: 20.0,
            loss: LossKind::ZeroOne,
            g_update: GUpdate::Simplified,
            scorer_mode: ScorerMode::Average,
            lambda_init: 1.0,
            g_floor: 1e-12,
        }
    }

    #[test]
    fn single_attribute_matches_class_only() {
        let base = skewed(500, 2);
        let ds = PredictionDataset::new(
            base.rows().map(<[f64]>::to_vec).collect(),
            base.labels().to_vec(),
            Some(vec![0; base.len()]),
            InputKind::Probabilities,
        )
        .unwrap();
        let cfg = config(2);
        let GroupLearned::ClassOnly(class_only) = learn_group(&ds, &cfg, GroupMode::ClassOnly).unwrap() else {
            panic!("expected a class-only outcome")
        };
        let GroupLearned::PerAttribute(per) = learn_group(&ds, &cfg, GroupMode::PerAttribute).unwrap() else {
            panic!("expected per-attribute outcomes")
        };
        assert_eq!(per.len(), 1);
        assert_eq!(per[0], *class_only);
    }

    #[test]
    fn identical_slices_give_identical_adjustments() {
        let base = skewed(400, 3);
        let mut rows: Vec<Vec<f64>> = base.rows().map(<[f64]>::to_vec).collect();
        rows.extend(base.rows().map(<[f64]>::to_vec));
        let mut labels = base.labels().to_vec();
        labels.extend_from_slice(base.labels());
        let attributes = (0..2 * base.len()).map(|i| i / base.len()).collect();
        let ds = PredictionDataset::new(rows, labels, Some(attributes), InputKind::Probabilities).unwrap();
        let learned = learn_group(&ds, &config(2), GroupMode::PerAttribute).unwrap();
        let group = learned.group_adjustment().unwrap();
        assert_eq!(group.adjustments[0], group.adjustments[1]);
    }

    #[test]
    fn per_attribute_adjustments_up_weight_each_slice_minority() {
        // Attribute 0 is mostly class 0 and attribute 1 mostly class 1.
        let spec = SpuriousMixtureSpec::skewed(0.9, 0.5, 5).unwrap();
        let ds = spec.to_dataset(&spec.sample_stream(4000, 0).unwrap()).unwrap();
        let learned = learn_group(&ds, &config(2), GroupMode::PerAttribute).unwrap();
        let group = learned.group_adjustment().unwrap();
        let b0 = group.adjustments[0].multipliers();
        let b1 = group.adjustments[1].multipliers();
        assert!(b0[1] > b0[0], "{b0:?}");
        assert!(b1[0] > b1[1], "{b1:?}");
    }

    #[test]
    fn per_attribute_errors() {
        let ds = PredictionDataset::new(
            vec![vec![0.6, 0.4]; 4],
            vec![0, 1, 0, 0],
            Some(vec![0, 0, 1, 1]),
            InputKind::Probabilities,
        )
        .unwrap();
        assert!(matches!(
            learn_group(&ds, &config(2), GroupMode::PerAttribute),
            Err(Error::EmptyGroup { attribute: 1, class: 1 })
        ));
        let gap = PredictionDataset::new(
            vec![vec![0.6, 0.4]; 2],
            vec![0, 1],
            Some(vec![2, 2]),
            InputKind::Probabilities,
        )
        .unwrap();
        assert!(learn_group(&gap, &config(2), GroupMode::PerAttribute).is_err());
    }

    #[test]
    fn unit_scale_is_the_unadjusted_classifier() {
        let ds = skewed(1000, 4);
        let plain = Unadjusted { num_classes: 2 };
        for i in 0..ds.len() {
            let row = ds.row(i);
            assert_eq!(
                BinaryScalar { w: 1.0 }.predict_row(row, ds.kind(), None).unwrap(),
                plain.predict_row(row, ds.kind(), None).unwrap()
            );
        }
        let ball = DeltaBall::uniform(DivergenceKind::Kl, 4, 0.5).unwrap();
        let single = binary_scalar_sweep(&ds, &ball, &[1.0], EvalLevel::Group).unwrap();
        assert_eq!(single.best_w, 1.0);
        let unadjusted = delta_worst(&group_accuracy(&ds, None).unwrap(), &ball).unwrap().value;
        assert_eq!(single.best_value, unadjusted);
    }

    #[test]
    fn sweep_is_its_own_exhaustive_oracle() {
        let val = skewed(2000, 5);
        let ball = DeltaBall::uniform(DivergenceKind::Kl, 4, 1.0).unwrap();
        let grid = default_w_grid();
        assert_eq!(grid.len(), 81);
        assert!(grid.contains(&1.0));
        let out = binary_scalar_sweep(&val, &ball, &grid, EvalLevel::Group).unwrap();
        let mut best = (0.0, f64::NEG_INFINITY);
        for &w in &grid {
            let acc = group_accuracy_with(&val, &BinaryScalar { w }).unwrap();
            let v = delta_worst(&acc, &ball).unwrap().value;
            if v > best.1 {
                best = (w, v);
            }
        }
        assert_eq!((out.best_w, out.best_value), best);
        let at_one = out.candidates.iter().find(|(w, _)| *w == 1.0).unwrap().1;
        assert!(out.best_value >= at_one);
        // Class 1 is the minority, so the sweep scales it up.
        assert!(out.best_w > 1.0);
    }

    #[test]
    fn sweep_ties_go_to_the_smallest_scale() {
        let ds = PredictionDataset::new(
            vec![vec![0.9, 0.1], vec![0.1, 0.9]],
            vec![0, 1],
            None,
            InputKind::Probabilities,
        )
        .unwrap();
        let ball = DeltaBall::uniform(DivergenceKind::Kl, 2, 0.1).unwrap();
        let out = binary_scalar_sweep(&ds, &ball, &[2.0, 0.5, 1.0], EvalLevel::Class).unwrap();
        assert_eq!(out.best_w, 0.5);
    }

    #[test]
    fn sweep_rejects_bad_input() {
        let three = PredictionDataset::new(vec![vec![0.2, 0.3, 0.5]], vec![2], None, InputKind::Probabilities).unwrap();
        let ball = DeltaBall::uniform(DivergenceKind::Kl, 3, 0.1).unwrap();
        assert!(binary_scalar_sweep(&three, &ball, &[1.0], EvalLevel::Class).is_err());
        let two = skewed(100, 6);
        let ball = DeltaBall::uniform(DivergenceKind::Kl, 2, 0.1).unwrap();
        assert!(binary_scalar_sweep(&two, &ball, &[], EvalLevel::Class).is_err());
        assert!(binary_scalar_sweep(&two, &ball, &[1.0, -2.0], EvalLevel::Class).is_err());
    }

    #[test]
    fn logit_rows_sweep_identically() {
        let probs = skewed(800, 7);
        let logits = PredictionDataset::new(
            probs.rows().map(|r| r.iter().map(|p| p.ln()).collect()).collect(),
            probs.labels().to_vec(),
            probs.attributes().map(<[usize]>::to_vec),
            InputKind::Logits,
        )
        .unwrap();
        let ball = DeltaBall::uniform(DivergenceKind::Kl, 4, 0.5).unwrap();
        let a = binary_scalar_sweep(&probs, &ball, &default_w_grid(), EvalLevel::Group).unwrap();
        let b = binary_scalar_sweep(&logits, &ball, &default_w_grid(), EvalLevel::Group).unwrap();
        assert_eq!(a.best_w, b.best_w);
    }

    #[test]
    fn keywords_round_trip() {
        for l in [EvalLevel::Class, EvalLevel::Group] {
            assert_eq!(l.to_string().parse::<EvalLevel>().unwrap(), l);
        }
        for g in [GroupMode::ClassOnly, GroupMode::PerAttribute] {
            assert_eq!(g.to_string().parse::<GroupMode>().unwrap(), g);
        }
    }
}
