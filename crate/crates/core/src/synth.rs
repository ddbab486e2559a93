//! Synthetic classification tasks with known class probabilities.
//!
//! Classes are isotropic Gaussians sharing one standard deviation, so the
//! true conditional-class probability `η_y(x) ∝ π_y exp(-‖x - μ_y‖² / 2σ²)`
//! is available in closed form and can stand in for a perfectly calibrated
//! pretrained model.
//!
//! # Random numbers
//!
//! All sampling uses `ChaCha8Rng` seeded with `seed_from_u64(seed)`. Each
//! draw consumes one uniform `f64` for the label (inverse CDF over the
//! priors in class order) followed by `d` standard normals for the point
//! (`rand_distr::StandardNormal`), in that order. Independent splits of the
//! same task use distinct ChaCha streams (`set_stream`), so a validation
//! split on stream 0 and a test split on stream 1 never overlap.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dataset::{InputKind, PredictionDataset};
use crate::divergence::SimplexWeights;
use crate::posthoc::ClassPriors;
use crate::{Error, Result};

/// Long-tailed priors `π_i ∝ ρ^(-i/(m-1))`, so that `max π / min π = ρ`.
pub fn geometric_priors(m: usize, rho: f64) -> Result<ClassPriors> {
    if m < 2 {
        return Err(Error::InvalidArgument("need at least 2 classes".into()));
    }
    if !(rho >= 1.0 && rho.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "imbalance ratio must be >= 1, got {rho}"
        )));
    }
    let raw: Vec<f64> = (0..m).map(|i| rho.powf(-(i as f64) / (m - 1) as f64)).collect();
    let total: f64 = raw.iter().sum();
    ClassPriors::new(raw.into_iter().map(|x| x / total).collect())
}

/// A mixture of isotropic Gaussians with a shared standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixtureSpec {
    pub means: Vec<Vec<f64>>,
    pub sigma: f64,
    /// Mixture weights; zero entries are allowed.
    pub priors: SimplexWeights,
    pub seed: u64,
}

/// Points drawn from a mixture together with their labels.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSample {
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl MixtureSample {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

impl GaussianMixtureSpec {
    pub fn new(means: Vec<Vec<f64>>, sigma: f64, priors: SimplexWeights, seed: u64) -> Result<Self> {
        let spec = Self {
            means,
            sigma,
            priors,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Class `i` centred at `separation · e_i` in `m` dimensions.
    pub fn simplex_corners(priors: SimplexWeights, separation: f64, sigma: f64, seed: u64) -> Result<Self> {
        let m = priors.len();
        let means = (0..m)
            .map(|i| {
                let mut mu = vec![0.0; m];
                mu[i] = separation;
                mu
            })
            .collect();
        Self::new(means, sigma, priors, seed)
    }

    /// Two classes on the real line, centred at `mu0 < mu1`.
    pub fn binary_line(mu0: f64, mu1: f64, sigma: f64, priors: SimplexWeights, seed: u64) -> Result<Self> {
        Self::new(vec![vec![mu0], vec![mu1]], sigma, priors, seed)
    }

    fn validate(&self) -> Result<()> {
        let m = self.means.len();
        if m < 2 {
            return Err(Error::InvalidArgument("mixture needs at least 2 classes".into()));
        }
        if self.priors.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: self.priors.len(),
            });
        }
        let d = self.means[0].len();
        if d == 0 || self.means.iter().any(|mu| mu.len() != d) {
            return Err(Error::InvalidArgument("means must share a positive dimension".into()));
        }
        if self.means.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("mixture mean".into()));
        }
        for i in 0..m {
            for j in i + 1..m {
                if self.means[i] == self.means[j] {
                    return Err(Error::InvalidArgument(format!("means {i} and {j} coincide")));
                }
            }
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        Ok(())
    }

    pub fn num_classes(&self) -> usize {
        self.means.len()
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    /// Draws `n` labelled points from stream 0.
    pub fn sample(&self, n: usize) -> Result<MixtureSample> {
        self.sample_stream(n, 0)
    }

    /// Draws `n` labelled points from the given ChaCha stream.
    pub fn sample_stream(&self, n: usize, stream: u64) -> Result<MixtureSample> {
        if n == 0 {
            return Err(Error::InvalidArgument("sample size must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        let cumulative: Vec<f64> = self
            .priors
            .iter()
            .scan(0.0, |acc, &p| {
                *acc += p;
                Some(*acc)
            })
            .collect();
        let last_positive = self.priors.iter().rposition(|&p| p > 0.0).expect("priors have mass");
        let mut points = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let u: f64 = rng.random();
            let y = cumulative
                .iter()
                .zip(self.priors.iter())
                .position(|(&c, &p)| p > 0.0 && u < c)
                .unwrap_or(last_positive);
            let x = self.means[y]
                .iter()
                .map(|&mu| {
                    let z: f64 = rng.sample(StandardNormal);
                    mu + self.sigma * z
                })
                .collect();
            points.push(x);
            labels.push(y);
        }
        Ok(MixtureSample { points, labels })
    }

    /// Unnormalized log posterior `log π_y - ‖x - μ_y‖² / 2σ²`.
    fn log_joint(&self, point: &[f64]) -> Result<Vec<f64>> {
        if point.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: point.len(),
            });
        }
        let scale = 2.0 * self.sigma * self.sigma;
        Ok(self
            .means
            .iter()
            .zip(self.priors.iter())
            .map(|(mu, &p)| {
                let sq: f64 = mu.iter().zip(point).map(|(m, x)| (x - m) * (x - m)).sum();
                p.ln() - sq / scale
            })
            .collect())
    }

    /// The true conditional-class probability `η(x)`.
    pub fn true_eta(&self, point: &[f64]) -> Result<SimplexWeights> {
        SimplexWeights::from_log_weights(&self.log_joint(point)?)
    }

    /// A prediction dataset whose scores are the true `η` of each point, as
    /// probabilities or as (max-centred) log posteriors.
    pub fn to_dataset(&self, sample: &MixtureSample, kind: InputKind) -> Result<PredictionDataset> {
        let rows = sample
            .points
            .iter()
            .map(|x| match kind {
                InputKind::Probabilities => Ok(self.true_eta(x)?.into_vec()),
                InputKind::Logits => {
                    let eta = self.true_eta(x)?;
                    if eta.iter().any(|&p| p == 0.0) {
                        return Err(Error::NonFinite("log posterior of a zero-probability class".into()));
                    }
                    Ok(eta.iter().map(|p| p.ln()).collect())
                }
            })
            .collect::<Result<Vec<_>>>()?;
        PredictionDataset::new(rows, sample.labels.clone(), None, kind)
    }
}

/// `Σ_i g_i · err_i`, with `err_i` the error rate of `classify` on the
/// points labelled `i`.
pub fn weighted_class_error<F>(sample: &MixtureSample, g: &SimplexWeights, mut classify: F) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<usize>,
{
    let m = g.len();
    let mut wrong = vec![0usize; m];
    let mut count = vec![0usize; m];
    for (x, &y) in sample.points.iter().zip(&sample.labels) {
        if y >= m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: y + 1,
            });
        }
        count[y] += 1;
        if classify(x)? != y {
            wrong[y] += 1;
        }
    }
    let mut total = 0.0;
    for i in 0..m {
        if g[i] == 0.0 {
            continue;
        }
        if count[i] == 0 {
            return Err(Error::EmptyClass(i));
        }
        total += g[i] * wrong[i] as f64 / count[i] as f64;
    }
    Ok(total)
}

/// The best threshold rule found by scanning a grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdOracle {
    /// Predict class 1 iff `x > threshold`.
    pub threshold: f64,
    pub weighted_error: f64,
}

/// Brute-force minimizer of the `g`-weighted class-conditional error over
/// threshold rules `x > t ⇒ class 1` on a sample of `n_eval` points drawn
/// from a one-dimensional binary `spec` (with `μ_0 < μ_1`). Ties go to the
/// largest threshold.
pub fn binary_threshold_oracle(
    spec: &GaussianMixtureSpec,
    g: &SimplexWeights,
    n_eval: usize,
    thresholds: &[f64],
) -> Result<ThresholdOracle> {
    if spec.num_classes() != 2 || spec.dim() != 1 {
        return Err(Error::InvalidArgument(
            "threshold oracle needs a 1-D binary mixture".into(),
        ));
    }
    if spec.means[0][0] >= spec.means[1][0] {
        return Err(Error::InvalidArgument("threshold oracle expects mu0 < mu1".into()));
    }
    if g.len() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: g.len(),
        });
    }
    if thresholds.is_empty() {
        return Err(Error::InvalidArgument("empty threshold grid".into()));
    }
    let sample = spec.sample(n_eval)?;
    let mut by_class = [Vec::new(), Vec::new()];
    for (x, &y) in sample.points.iter().zip(&sample.labels) {
        by_class[y].push(x[0]);
    }
    for (i, xs) in by_class.iter_mut().enumerate() {
        if xs.is_empty() {
            return Err(Error::EmptyClass(i));
        }
        xs.sort_by(f64::total_cmp);
    }
    let (n0, n1) = (by_class[0].len() as f64, by_class[1].len() as f64);
    let mut best: Option<ThresholdOracle> = None;
    for &t in thresholds {
        let class0_at_or_below = by_class[0].partition_point(|&x| x <= t) as f64;
        let class1_at_or_below = by_class[1].partition_point(|&x| x <= t) as f64;
        let err0 = (n0 - class0_at_or_below) / n0;
        let err1 = class1_at_or_below / n1;
        let weighted_error = g[0] * err0 + g[1] * err1;
        let better = match best {
            None => true,
            Some(b) => weighted_error < b.weighted_error || (weighted_error == b.weighted_error && t > b.threshold),
        };
        if better {
            best = Some(ThresholdOracle {
                threshold: t,
                weighted_error,
            });
        }
    }
    Ok(best.expect("grid is nonempty"))
}

/// A two-class, two-attribute mixture with a spurious feature.
///
/// Group `(a, y)` (index `2a + y`) is centred at
/// `(core · (2y - 1), spurious · (2a - 1))`. The "pretrained model" sees only
/// `x`, so its scores are `P(y | x)` with the attribute marginalized out.
#[derive(Debug, Clone, PartialEq)]
pub struct SpuriousMixtureSpec {
    pub core_shift: f64,
    pub spurious_shift: f64,
    pub sigma: f64,
    /// Group priors `P(a, y)` indexed by `2a + y`.
    pub group_priors: SimplexWeights,
    pub seed: u64,
}

/// Labelled points with their attribute.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSample {
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub attributes: Vec<usize>,
}

impl SpuriousMixtureSpec {
    pub fn new(
        core_shift: f64,
        spurious_shift: f64,
        sigma: f64,
        group_priors: SimplexWeights,
        seed: u64,
    ) -> Result<Self> {
        if group_priors.len() != 4 {
            return Err(Error::DimensionMismatch {
                expected: 4,
                got: group_priors.len(),
            });
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
        }
        Ok(Self {
            core_shift,
            spurious_shift,
            sigma,
            group_priors,
            seed,
        })
    }

    /// Waterbirds-like skew: the attribute agrees with the label in a
    /// fraction `agreement` of each class, and class 1 has prior `class1`.
    pub fn skewed(agreement: f64, class1: f64, seed: u64) -> Result<Self> {
        let c0 = 1.0 - class1;
        let priors = vec![
            c0 * agreement,
            class1 * (1.0 - agreement),
            c0 * (1.0 - agreement),
            class1 * agreement,
        ];
        Self::new(1.0, 2.0, 1.0, SimplexWeights::new(priors)?, seed)
    }

    fn mixture(&self) -> Result<GaussianMixtureSpec> {
        let means = (0..4)
            .map(|group| {
                let (a, y) = (group / 2, group % 2);
                vec![
                    self.core_shift * (2.0 * y as f64 - 1.0),
                    self.spurious_shift * (2.0 * a as f64 - 1.0),
                ]
            })
            .collect();
        GaussianMixtureSpec::new(means, self.sigma, self.group_priors.clone(), self.seed)
    }

    pub fn sample_stream(&self, n: usize, stream: u64) -> Result<GroupSample> {
        let groups = self.mixture()?.sample_stream(n, stream)?;
        Ok(GroupSample {
            points: groups.points,
            labels: groups.labels.iter().map(|g| g % 2).collect(),
            attributes: groups.labels.iter().map(|g| g / 2).collect(),
        })
    }

    /// `P(y | x)` with the attribute marginalized out.
    pub fn class_posterior(&self, point: &[f64]) -> Result<SimplexWeights> {
        let groups = self.mixture()?.true_eta(point)?;
        SimplexWeights::from_unnormalized(vec![groups[0] + groups[2], groups[1] + groups[3]])
    }

    pub fn to_dataset(&self, sample: &GroupSample) -> Result<PredictionDataset> {
        let rows = sample
            .points
            .iter()
            .map(|x| Ok(self.class_posterior(x)?.into_vec()))
            .collect::<Result<Vec<_>>>()?;
        PredictionDataset::new(
            rows,
            sample.labels.clone(),
            Some(sample.attributes.clone()),
            InputKind::Probabilities,
        )
    }
}
