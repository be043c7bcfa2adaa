use serde::{Deserialize, Serialize};

use crate::fusion::{fused_accuracy, ModalityAccuracy, VoteRule};

use super::{HarnessError, Prepared};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub condition: String,
    pub modalities: Vec<String>,
    pub weights: Vec<f64>,
    pub lambda: f64,
    pub rule: VoteRule,
    pub prior_success: f64,
    pub accuracies: Vec<ModalityAccuracy>,
    pub sensitivity: f64,
    pub specificity: f64,
    pub accuracy: f64,
}

/// Exact fused accuracy of a prepared condition.
pub fn oracle(
    prepared: &Prepared,
    condition: &str,
    prior_success: f64,
) -> Result<OracleReport, HarnessError> {
    let sensors = prepared.setup.sensors.get(condition).ok_or_else(|| {
        let known: Vec<&str> = prepared.setup.sensors.keys().map(String::as_str).collect();
        HarnessError::Config(format!(
            "no fused condition `{condition}` (known: {})",
            known.join(", ")
        ))
    })?;
    let accuracies: Vec<ModalityAccuracy> = sensors
        .surrogates
        .iter()
        .map(|s| s.accuracy.clone())
        .collect();
    let fa = fused_accuracy(
        &sensors.policy,
        &accuracies,
        prior_success,
        prepared.setup.rule,
    )?;
    Ok(OracleReport {
        condition: condition.to_string(),
        modalities: sensors.policy.modalities().to_vec(),
        weights: sensors.policy.weights().to_vec(),
        lambda: sensors.policy.threshold(),
        rule: prepared.setup.rule,
        prior_success,
        accuracies,
        sensitivity: fa.sensitivity,
        specificity: fa.specificity,
        accuracy: fa.accuracy,
    })
}
