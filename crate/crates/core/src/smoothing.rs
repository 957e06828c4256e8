//! Label smoothing: smoothed targets, smoothed cross-entropy, per-sample
//! strength assignment and the two batch objectives (per-sample smoothing for
//! diverse augmentation, group-wise constant smoothing for negative
//! augmentation).

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::seeding;

/// Probabilities are clamped to this floor inside every logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

#[inline]
pub fn safe_ln(p: f64) -> f64 {
    p.max(PROB_FLOOR).ln()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmoothedTarget {
    pub distribution: Vec<f64>,
    pub alpha: f64,
    pub true_class: usize,
}

/// `(1 - alpha) * onehot(true_class) + alpha * uniform`.
pub fn smooth_label(true_class: usize, alpha: f64, classes: usize) -> SmoothedTarget {
    debug_assert!(true_class < classes);
    let u = 1.0 / classes as f64;
    let distribution = (0..classes)
        .map(|k| {
            let q = if k == true_class { 1.0 } else { 0.0 };
            (1.0 - alpha) * q + alpha * u
        })
        .collect();
    SmoothedTarget {
        distribution,
        alpha,
        true_class,
    }
}

/// `H(target, p) = -sum target_k ln p_k`.
pub fn cross_entropy(target: &[f64], p: &[f64]) -> f64 {
    -target
        .iter()
        .zip(p)
        .map(|(&t, &pk)| if t == 0.0 { 0.0 } else { t * safe_ln(pk) })
        .sum::<f64>()
}

/// Plain cross-entropy against a one-hot label.
#[inline]
pub fn plain_ce(p: &[f64], true_class: usize) -> f64 {
    -safe_ln(p[true_class])
}

/// Cross-entropy against the uniform distribution.
#[inline]
pub fn uniform_ce(p: &[f64]) -> f64 {
    -p.iter().map(|&pk| safe_ln(pk)).sum::<f64>() / p.len() as f64
}

/// Smoothed cross-entropy through the decomposition
/// `(1 - alpha) H(q, p) + alpha H(u, p)`.
pub fn smoothed_ce(p: &[f64], true_class: usize, alpha: f64) -> f64 {
    (1.0 - alpha) * plain_ce(p, true_class) + alpha * uniform_ce(p)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AlphaMode {
    /// `alpha_max * (1 - w)`
    Resmooth,
    /// `alpha_max * w`
    Reverse,
    UniformGiven,
    UniformAvg,
    UniformOptimal,
    RandomSampling,
    RandomSplit,
}

impl AlphaMode {
    pub const ALL: [AlphaMode; 7] = [
        AlphaMode::Resmooth,
        AlphaMode::Reverse,
        AlphaMode::UniformGiven,
        AlphaMode::UniformAvg,
        AlphaMode::UniformOptimal,
        AlphaMode::RandomSampling,
        AlphaMode::RandomSplit,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AlphaMode::Resmooth => "resmooth",
            AlphaMode::Reverse => "reverse",
            AlphaMode::UniformGiven => "uniform_given",
            AlphaMode::UniformAvg => "uniform_avg",
            AlphaMode::UniformOptimal => "uniform_optimal",
            AlphaMode::RandomSampling => "random_sampling",
            AlphaMode::RandomSplit => "random_split",
        }
    }
}

impl fmt::Display for AlphaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AlphaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AlphaMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown alpha mode `{s}`")))
    }
}

/// How per-sample smoothing strengths are derived from ID posteriors.
#[derive(Clone, Debug, PartialEq)]
pub struct AlphaPolicy {
    pub mode: AlphaMode,
    pub alpha_max: f64,
    /// Constant for `uniform_optimal`.
    pub constant: Option<f64>,
    pub seed: u64,
}

impl AlphaPolicy {
    pub fn new(mode: AlphaMode, alpha_max: f64) -> Self {
        Self {
            mode,
            alpha_max,
            constant: None,
            seed: 0,
        }
    }

    pub fn with_constant(mut self, constant: f64) -> Self {
        self.constant = Some(constant);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Strengths for one list of ID posteriors, random modes drawing from the
/// policy's own seed.
pub fn assign_alphas(weights: &[f64], policy: &AlphaPolicy) -> Result<Vec<f64>> {
    assign_alphas_with(weights, policy, &mut seeding::rng(policy.seed))
}

pub fn assign_alphas_with<R: Rng + ?Sized>(
    weights: &[f64],
    policy: &AlphaPolicy,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let a = policy.alpha_max;
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::InvalidArgument(format!("alpha_max = {a} outside [0, 1]")));
    }
    let resmooth = || weights.iter().map(|&w| a * (1.0 - w)).collect::<Vec<_>>();
    let out = match policy.mode {
        AlphaMode::Resmooth => resmooth(),
        AlphaMode::Reverse => weights.iter().map(|&w| a * w).collect(),
        AlphaMode::UniformGiven => vec![a; weights.len()],
        AlphaMode::UniformAvg => {
            let r = resmooth();
            let mean = r.iter().sum::<f64>() / r.len().max(1) as f64;
            vec![mean; r.len()]
        }
        AlphaMode::UniformOptimal => {
            let c = policy.constant.ok_or(Error::MissingConstant)?;
            vec![c; weights.len()]
        }
        AlphaMode::RandomSampling => weights.iter().map(|_| rng.random::<f64>() * a).collect(),
        AlphaMode::RandomSplit => {
            let mut r = resmooth();
            r.shuffle(rng);
            r
        }
    };
    Ok(out)
}

fn check_lengths<P: AsRef<[f64]>>(preds: &[P], classes: &[usize], alphas: Option<&[f64]>) -> Result<()> {
    if preds.len() != classes.len() || alphas.is_some_and(|a| a.len() != preds.len()) {
        return Err(Error::InvalidArgument(
            "predictions, classes and strengths differ in length".into(),
        ));
    }
    Ok(())
}

/// Mean over samples of the per-sample smoothed cross-entropy.
pub fn loss_div<P: AsRef<[f64]>>(predictions: &[P], classes: &[usize], alphas: &[f64]) -> Result<f64> {
    check_lengths(predictions, classes, Some(alphas))?;
    if predictions.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let total: f64 = predictions
        .iter()
        .zip(classes)
        .zip(alphas)
        .map(|((p, &y), &a)| smoothed_ce(p.as_ref(), y, a))
        .sum();
    Ok(total / predictions.len() as f64)
}

/// Mean plain cross-entropy over the ID group plus mean constant-strength
/// smoothed cross-entropy over the OOD group. An empty group contributes 0.
pub fn loss_neg<P: AsRef<[f64]>>(
    id_predictions: &[P],
    id_classes: &[usize],
    ood_predictions: &[P],
    ood_classes: &[usize],
    alpha: f64,
) -> Result<f64> {
    check_lengths(id_predictions, id_classes, None)?;
    check_lengths(ood_predictions, ood_classes, None)?;
    if id_predictions.is_empty() && ood_predictions.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let id_term = if id_predictions.is_empty() {
        0.0
    } else {
        id_predictions
            .iter()
            .zip(id_classes)
            .map(|(p, &y)| plain_ce(p.as_ref(), y))
            .sum::<f64>()
            / id_predictions.len() as f64
    };
    let ood_term = if ood_predictions.is_empty() {
        0.0
    } else {
        ood_predictions
            .iter()
            .zip(ood_classes)
            .map(|(p, &y)| smoothed_ce(p.as_ref(), y, alpha))
            .sum::<f64>()
            / ood_predictions.len() as f64
    };
    Ok(id_term + ood_term)
}
