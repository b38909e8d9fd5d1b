//! Standard and distributed softmax cross-entropy over logit vectors, with
//! analytic gradients and a finite-difference verifier.
//!
//! The distributed loss replaces the one-hot target with a vector of `k`
//! non-zero entries, each `1/k`; the active set is a label, its
//! ancestors, and optionally its ambiguity partners. With `k = 1` it reduces
//! exactly to the standard loss. Both are computed as negative
//! log-likelihoods in log-sum-exp form with max subtraction, so huge logits
//! never overflow.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use crate::labelspace::{HierarchyError, LabelHierarchy, LabelId};

#[derive(Debug, Clone, PartialEq)]
pub enum LossError {
    /// Fewer than two classes.
    TooFewClasses(usize),
    NonFiniteLogit,
    DimensionMismatch {
        logits: usize,
        target: usize,
    },
    /// The target vector is not k entries of 1/k summing to one.
    InvalidDistribution,
    TargetOutOfRange {
        target: usize,
        classes: usize,
    },
    InvalidEpsilon(f64),
    /// A label required by the distribution has no slot in the index map.
    MissingIndex(LabelId),
    /// Index values do not densely cover 0..len.
    IndexGap,
    Hierarchy(HierarchyError),
}

impl fmt::Display for LossError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LossError::TooFewClasses(c) => write!(f, "need at least 2 classes, got {c}"),
            LossError::NonFiniteLogit => write!(f, "non-finite logit"),
            LossError::DimensionMismatch { logits, target } => {
                write!(f, "logit dimension {logits} != target dimension {target}")
            }
            LossError::InvalidDistribution => {
                write!(f, "target entries must be k values of 1/k summing to 1")
            }
            LossError::TargetOutOfRange { target, classes } => {
                write!(
                    f,
                    "target index {target} out of range for {classes} classes"
                )
            }
            LossError::InvalidEpsilon(e) => write!(f, "epsilon {e} must be positive"),
            LossError::MissingIndex(id) => write!(f, "label {id} missing from index map"),
            LossError::IndexGap => write!(f, "label index map does not cover 0..len densely"),
            LossError::Hierarchy(e) => write!(f, "{e}"),
        }
    }
}

impl From<HierarchyError> for LossError {
    fn from(e: HierarchyError) -> Self {
        LossError::Hierarchy(e)
    }
}

/// Raw classifier outputs for C >= 2 classes, all finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Logits(Vec<f64>);

impl Logits {
    pub fn new(values: Vec<f64>) -> Result<Self, LossError> {
        if values.len() < 2 {
            return Err(LossError::TooFewClasses(values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LossError::NonFiniteLogit);
        }
        Ok(Logits(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Target vector with k >= 1 non-zero entries, each exactly 1/k.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelDistribution {
    weights: Vec<f64>,
    k: usize,
}

/// Tolerance when accepting serialized weights as 1/k: CSV files carry six
/// decimals, so 1/3 arrives as 0.333333.
const WEIGHT_TOLERANCE: f64 = 1e-4;

impl LabelDistribution {
    /// Exact construction from the active index set.
    pub fn from_active(len: usize, active: &[usize]) -> Result<Self, LossError> {
        if active.is_empty() {
            return Err(LossError::InvalidDistribution);
        }
        let mut weights = alloc::vec![0.0; len];
        let mut distinct = 0usize;
        for &i in active {
            if i >= len {
                return Err(LossError::TargetOutOfRange {
                    target: i,
                    classes: len,
                });
            }
            if weights[i] == 0.0 {
                distinct += 1;
                weights[i] = 1.0;
            }
        }
        let k = distinct;
        for w in weights.iter_mut() {
            if *w != 0.0 {
                *w = 1.0 / k as f64;
            }
        }
        Ok(LabelDistribution { weights, k })
    }

    /// Accepts a serialized weight vector: entries must be zero or within
    /// [`WEIGHT_TOLERANCE`] of 1/k, where k is the non-zero count; the
    /// stored weights are snapped to exactly 1/k.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self, LossError> {
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(LossError::InvalidDistribution);
        }
        let active: Vec<usize> = weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != 0.0)
            .map(|(i, _)| i)
            .collect();
        if active.is_empty() {
            return Err(LossError::InvalidDistribution);
        }
        let k = active.len();
        let expected = 1.0 / k as f64;
        for &i in &active {
            if libm::fabs(weights[i] - expected) > WEIGHT_TOLERANCE {
                return Err(LossError::InvalidDistribution);
            }
        }
        Self::from_active(weights.len(), &active)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn active_indices(&self) -> Vec<usize> {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != 0.0)
            .map(|(i, _)| i)
            .collect()
    }
}

/// log(sum(exp(x))) with max subtraction.
fn log_sum_exp(x: &[f64]) -> f64 {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = x.iter().map(|&v| libm::exp(v - max)).sum();
    max + libm::log(sum)
}

/// Softmax probabilities; positive entries summing to one.
pub fn softmax(x: &Logits) -> Vec<f64> {
    let max = x
        .as_slice()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.as_slice().iter().map(|&v| libm::exp(v - max)).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Negative log-likelihood of the target class.
pub fn standard_softmax_ce(x: &Logits, target: usize) -> Result<f64, LossError> {
    if target >= x.len() {
        return Err(LossError::TargetOutOfRange {
            target,
            classes: x.len(),
        });
    }
    let loss = log_sum_exp(x.as_slice()) - x.as_slice()[target];
    Ok(loss.max(0.0))
}

/// Cross-entropy against a distributed target: `-sum_c y_c log softmax(x)_c`.
/// Reduces exactly to [`standard_softmax_ce`] when k = 1.
pub fn distributed_softmax_ce(x: &Logits, y: &LabelDistribution) -> Result<f64, LossError> {
    if x.len() != y.len() {
        return Err(LossError::DimensionMismatch {
            logits: x.len(),
            target: y.len(),
        });
    }
    let weighted: f64 = x
        .as_slice()
        .iter()
        .zip(y.weights())
        .map(|(&xi, &yi)| yi * xi)
        .sum();
    let loss = log_sum_exp(x.as_slice()) - weighted;
    Ok(loss.max(0.0))
}

/// Analytic gradient of [`distributed_softmax_ce`] with respect to the
/// logits: `softmax(x) - y`. Entries sum to zero.
pub fn distributed_softmax_grad(x: &Logits, y: &LabelDistribution) -> Result<Vec<f64>, LossError> {
    if x.len() != y.len() {
        return Err(LossError::DimensionMismatch {
            logits: x.len(),
            target: y.len(),
        });
    }
    Ok(softmax(x)
        .into_iter()
        .zip(y.weights())
        .map(|(p, &yi)| p - yi)
        .collect())
}

/// Maximum relative discrepancy between the analytic gradient and central
/// finite differences: `max_i |analytic_i - central_i| / max(1, |analytic_i|)`.
pub fn finite_diff_check(
    x: &Logits,
    y: &LabelDistribution,
    epsilon: f64,
) -> Result<f64, LossError> {
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(LossError::InvalidEpsilon(epsilon));
    }
    let analytic = distributed_softmax_grad(x, y)?;
    let mut worst = 0.0f64;
    for (i, &grad) in analytic.iter().enumerate() {
        let mut plus = x.clone();
        plus.0[i] += epsilon;
        let mut minus = x.clone();
        minus.0[i] -= epsilon;
        let central = (distributed_softmax_ce(&plus, y)? - distributed_softmax_ce(&minus, y)?)
            / (2.0 * epsilon);
        if !central.is_finite() {
            return Err(LossError::NonFiniteLogit);
        }
        let rel = libm::fabs(grad - central) / libm::fabs(grad).max(1.0);
        worst = worst.max(rel);
    }
    Ok(worst)
}

/// Builds the distributed target for `leaf`: the active set is the leaf, its
/// ancestors, and (when `include_ambiguity` is set) its ambiguity partners,
/// each weighted 1/k. `label_index` must map labels to a dense 0..len range.
pub fn build_label_distribution(
    hierarchy: &LabelHierarchy,
    leaf: &LabelId,
    include_ambiguity: bool,
    label_index: &BTreeMap<LabelId, usize>,
) -> Result<LabelDistribution, LossError> {
    let len = label_index.len();
    // dense-cover check: values must be a permutation of 0..len
    let mut seen = alloc::vec![false; len];
    for &slot in label_index.values() {
        if slot >= len || seen[slot] {
            return Err(LossError::IndexGap);
        }
        seen[slot] = true;
    }
    let mut active_labels = alloc::vec![leaf.clone()];
    active_labels.extend(hierarchy.ancestors(leaf)?);
    if include_ambiguity {
        active_labels.extend(hierarchy.ambiguity_partners(leaf)?);
    }
    let mut active = Vec::with_capacity(active_labels.len());
    for label in &active_labels {
        let slot = label_index
            .get(label)
            .copied()
            .ok_or_else(|| LossError::MissingIndex(label.clone()))?;
        active.push(slot);
    }
    LabelDistribution::from_active(len, &active)
}
