//! Weighted-vote fusion of binary modality predictions.
//!
//! Each modality contributes a vote `s_i ∈ {0, 1}` with weight `v_i`; the
//! condition succeeds when `Σ v_i·s_i ≥ λ`. [`VoteRule::StrictEq1`] divides the
//! sum by the number of modalities before comparing, which is kept for
//! auditing only: with weights summing to one it makes `λ = 0.5` unreachable
//! for three or more modalities.
//!
//! [`fused_accuracy`] computes the exact sensitivity and specificity of a
//! fused condition by enumerating all `2^N` joint vote outcomes, assuming
//! modality errors are independent given the ground truth.

use serde::{Deserialize, Serialize};

/// Allowed deviation of `Σ v_i` from one.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;
/// Slack on the threshold comparison so that decimal weights tie correctly.
pub const VOTE_TOL: f64 = 1e-12;
pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const MAX_ORACLE_MODALITIES: usize = 20;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FusionError {
    #[error("modality mismatch: {0}")]
    ModalityMismatch(String),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("threshold {0} is outside [0, 1]")]
    InvalidThreshold(f64),
    #[error("at least one modality is required")]
    Empty,
    #[error("{0} modalities exceeds the oracle limit of {MAX_ORACLE_MODALITIES}")]
    TooManyModalities(usize),
    #[error("probability `{name}` = {value} is outside [0, 1]")]
    InvalidProbability { name: String, value: f64 },
}

/// How the weighted sum is compared against the threshold.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoteRule {
    /// `Σ v_i·s_i ≥ λ`
    #[default]
    WeightedSum,
    /// `(Σ v_i·s_i) / N ≥ λ`
    StrictEq1,
}

impl VoteRule {
    pub fn from_strict_flag(strict_eq1: bool) -> Self {
        if strict_eq1 {
            VoteRule::StrictEq1
        } else {
            VoteRule::WeightedSum
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionPolicy {
    modalities: Vec<String>,
    weights: Vec<f64>,
    threshold: f64,
}

impl FusionPolicy {
    pub fn new(
        modalities: Vec<String>,
        weights: Vec<f64>,
        threshold: f64,
    ) -> Result<Self, FusionError> {
        if modalities.is_empty() {
            return Err(FusionError::Empty);
        }
        if modalities.len() != weights.len() {
            return Err(FusionError::InvalidWeights(format!(
                "{} modalities but {} weights",
                modalities.len(),
                weights.len()
            )));
        }
        for (i, m) in modalities.iter().enumerate() {
            if modalities[..i].contains(m) {
                return Err(FusionError::ModalityMismatch(format!(
                    "duplicate modality `{m}`"
                )));
            }
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(FusionError::InvalidWeights(format!(
                "weight {w} is negative or not finite"
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(FusionError::InvalidWeights(format!(
                "weights sum to {sum}, expected 1"
            )));
        }
        if !(0.0..=1.0).contains(&threshold) {
            return Err(FusionError::InvalidThreshold(threshold));
        }
        Ok(Self {
            modalities,
            weights,
            threshold,
        })
    }

    /// Equal weights `1/N` and the default threshold.
    pub fn equal(modalities: &[&str]) -> Result<Self, FusionError> {
        let n = modalities.len().max(1);
        Self::new(
            modalities.iter().map(|s| s.to_string()).collect(),
            vec![1.0 / n as f64; modalities.len()],
            DEFAULT_THRESHOLD,
        )
    }

    /// Accuracy-proportional weights (see [`default_weights`]).
    pub fn from_accuracies(
        accuracies: &[ModalityAccuracy],
        threshold: f64,
    ) -> Result<Self, FusionError> {
        let weights = default_weights(accuracies)?;
        Self::new(
            accuracies.iter().map(|a| a.modality.clone()).collect(),
            weights,
            threshold,
        )
    }

    pub fn modalities(&self) -> &[String] {
        &self.modalities
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn len(&self) -> usize {
        self.modalities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modalities.is_empty()
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.modalities == other.modalities
            && (self.threshold - other.threshold).abs() <= tol
            && self.weights.len() == other.weights.len()
            && self
                .weights
                .iter()
                .zip(&other.weights)
                .all(|(a, b)| (a - b).abs() <= tol)
    }

    /// Decision for votes given in policy order.
    fn decide(&self, votes: impl Iterator<Item = bool>, rule: VoteRule) -> Verdict {
        let weighted_sum: f64 = self
            .weights
            .iter()
            .zip(votes)
            .filter(|(_, s)| *s)
            .map(|(w, _)| w)
            .sum();
        let score = match rule {
            VoteRule::WeightedSum => weighted_sum,
            VoteRule::StrictEq1 => weighted_sum / self.len() as f64,
        };
        Verdict {
            weighted_sum,
            score,
            success: score >= self.threshold - VOTE_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModalityPrediction {
    pub modality: String,
    /// `true` is a success vote (`s = 1`).
    pub vote: bool,
}

impl ModalityPrediction {
    pub fn new(modality: impl Into<String>, vote: bool) -> Self {
        Self {
            modality: modality.into(),
            vote,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    /// `Σ v_i·s_i`
    pub weighted_sum: f64,
    /// The value compared against the threshold under the active rule.
    pub score: f64,
    pub success: bool,
}

/// Fuses one prediction per policy modality, in any order.
pub fn vote(
    predictions: &[ModalityPrediction],
    policy: &FusionPolicy,
    rule: VoteRule,
) -> Result<Verdict, FusionError> {
    let mut votes = vec![None; policy.len()];
    for p in predictions {
        let i = policy
            .modalities
            .iter()
            .position(|m| *m == p.modality)
            .ok_or_else(|| {
                FusionError::ModalityMismatch(format!("unexpected modality `{}`", p.modality))
            })?;
        if votes[i].replace(p.vote).is_some() {
            return Err(FusionError::ModalityMismatch(format!(
                "duplicate vote for `{}`",
                p.modality
            )));
        }
    }
    if let Some(i) = votes.iter().position(Option::is_none) {
        return Err(FusionError::ModalityMismatch(format!(
            "missing vote for `{}`",
            policy.modalities[i]
        )));
    }
    Ok(policy.decide(votes.into_iter().flatten(), rule))
}

/// Confusion model of one modality's classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalityAccuracy {
    pub modality: String,
    /// P(vote = 1 | truth = success)
    pub sensitivity: f64,
    /// P(vote = 0 | truth = failure)
    pub specificity: f64,
}

impl ModalityAccuracy {
    pub fn new(
        modality: impl Into<String>,
        sensitivity: f64,
        specificity: f64,
    ) -> Result<Self, FusionError> {
        let modality = modality.into();
        for (label, v) in [("sensitivity", sensitivity), ("specificity", specificity)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(FusionError::InvalidProbability {
                    name: format!("{modality}.{label}"),
                    value: v,
                });
            }
        }
        Ok(Self {
            modality,
            sensitivity,
            specificity,
        })
    }

    /// Sensitivity and specificity both equal to `accuracy`.
    pub fn symmetric(modality: impl Into<String>, accuracy: f64) -> Result<Self, FusionError> {
        Self::new(modality, accuracy, accuracy)
    }

    pub fn balanced(&self) -> f64 {
        (self.sensitivity + self.specificity) / 2.0
    }
}

/// Weights proportional to each modality's balanced accuracy, summing to one.
pub fn default_weights(accuracies: &[ModalityAccuracy]) -> Result<Vec<f64>, FusionError> {
    if accuracies.is_empty() {
        return Err(FusionError::Empty);
    }
    let balanced: Vec<f64> = accuracies.iter().map(ModalityAccuracy::balanced).collect();
    if let Some(a) = accuracies.iter().find(|a| a.balanced() <= 0.0) {
        return Err(FusionError::InvalidProbability {
            name: format!("{}.balanced_accuracy", a.modality),
            value: a.balanced(),
        });
    }
    let total: f64 = balanced.iter().sum();
    Ok(balanced.into_iter().map(|a| a / total).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusedAccuracy {
    /// P(fused = success | truth = success)
    pub sensitivity: f64,
    /// P(fused = failure | truth = failure)
    pub specificity: f64,
    /// `prior·sensitivity + (1 − prior)·specificity`
    pub accuracy: f64,
}

/// Exact fused sensitivity/specificity by enumerating every joint vote vector.
///
/// `accuracies` are matched to policy modalities by name. Cost is
/// `O(2^N · N)`; `N` is capped at [`MAX_ORACLE_MODALITIES`].
pub fn fused_accuracy(
    policy: &FusionPolicy,
    accuracies: &[ModalityAccuracy],
    prior_success: f64,
    rule: VoteRule,
) -> Result<FusedAccuracy, FusionError> {
    let n = policy.len();
    if n > MAX_ORACLE_MODALITIES {
        return Err(FusionError::TooManyModalities(n));
    }
    if !(0.0..=1.0).contains(&prior_success) {
        return Err(FusionError::InvalidProbability {
            name: "prior_success".into(),
            value: prior_success,
        });
    }
    let acc = align(policy, accuracies)?;

    let mut sensitivity = 0.0;
    let mut false_alarm = 0.0;
    for mask in 0u32..(1u32 << n) {
        let bit = |i: usize| mask & (1 << i) != 0;
        if !policy.decide((0..n).map(bit), rule).success {
            continue;
        }
        let mut p_given_success = 1.0;
        let mut p_given_failure = 1.0;
        for (i, a) in acc.iter().enumerate() {
            if bit(i) {
                p_given_success *= a.sensitivity;
                p_given_failure *= 1.0 - a.specificity;
            } else {
                p_given_success *= 1.0 - a.sensitivity;
                p_given_failure *= a.specificity;
            }
        }
        sensitivity += p_given_success;
        false_alarm += p_given_failure;
    }
    let specificity = 1.0 - false_alarm;
    Ok(FusedAccuracy {
        sensitivity,
        specificity,
        accuracy: prior_success * sensitivity + (1.0 - prior_success) * specificity,
    })
}

/// Reorders `accuracies` to follow the policy's modality order.
pub fn align<'a>(
    policy: &FusionPolicy,
    accuracies: &'a [ModalityAccuracy],
) -> Result<Vec<&'a ModalityAccuracy>, FusionError> {
    if accuracies.len() != policy.len() {
        return Err(FusionError::ModalityMismatch(format!(
            "{} accuracies for {} modalities",
            accuracies.len(),
            policy.len()
        )));
    }
    policy
        .modalities
        .iter()
        .map(|m| {
            accuracies
                .iter()
                .find(|a| a.modality == *m)
                .ok_or_else(|| FusionError::ModalityMismatch(format!("no accuracy for `{m}`")))
        })
        .collect()
}
