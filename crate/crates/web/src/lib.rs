//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export takes and returns JSON strings so the page needs no
//! generated TypeScript glue beyond `wasm-bindgen --target web`.

use mmbt_core::dsl::{self, ValidateOptions};
use mmbt_core::fusion::{
    default_weights, fused_accuracy, vote, FusionPolicy, ModalityAccuracy, ModalityPrediction,
    VoteRule,
};
use mmbt_core::harness::{self, RunConfig};
use mmbt_core::labsim::Task;
use serde::Deserialize;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Largest run the page may request; keeps the tab responsive.
pub const MAX_TRIALS: u64 = 50_000;

#[derive(Debug, Deserialize)]
pub struct ModalityInput {
    pub name: String,
    pub sensitivity: f64,
    pub specificity: f64,
    /// Missing weights fall back to accuracy-proportional defaults.
    #[serde(default)]
    pub weight: Option<f64>,
}

#[derive(Debug, Deserialize)]
pub struct OracleInput {
    pub modalities: Vec<ModalityInput>,
    #[serde(default = "half")]
    pub lambda: f64,
    #[serde(default = "half")]
    pub prior: f64,
    #[serde(default)]
    pub strict_eq1: bool,
}

fn half() -> f64 {
    0.5
}

fn task(name: &str) -> Result<Task, String> {
    Task::parse(name).ok_or_else(|| format!("unknown task `{name}`"))
}

pub fn shipped_tree_text(name: &str) -> Result<String, String> {
    Ok(harness::shipped_tree(task(name)?).to_string())
}

/// Parse and validate a tree; returns diagnostics and, if it parsed, the canonical text.
pub fn validate_json(text: &str) -> Value {
    match dsl::parse(text) {
        Err(diags) => json!({ "ok": false, "diagnostics": diags, "canonical": null }),
        Ok(tree) => {
            let diags = dsl::validate(&tree, &ValidateOptions::default());
            let ok = !diags.iter().any(|d| d.is_error());
            json!({ "ok": ok, "diagnostics": diags, "canonical": dsl::serialize(&tree) })
        }
    }
}

/// Exact fused accuracy plus the full vote truth table.
pub fn oracle_json(input: &OracleInput) -> Result<Value, String> {
    let accs = input
        .modalities
        .iter()
        .map(|m| ModalityAccuracy::new(m.name.clone(), m.sensitivity, m.specificity))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let weights = if input.modalities.iter().all(|m| m.weight.is_some()) {
        input.modalities.iter().filter_map(|m| m.weight).collect()
    } else {
        default_weights(&accs).map_err(|e| e.to_string())?
    };
    let names: Vec<String> = accs.iter().map(|a| a.modality.clone()).collect();
    let policy =
        FusionPolicy::new(names.clone(), weights, input.lambda).map_err(|e| e.to_string())?;
    let rule = VoteRule::from_strict_flag(input.strict_eq1);
    let fa = fused_accuracy(&policy, &accs, input.prior, rule).map_err(|e| e.to_string())?;

    let mut table = Vec::new();
    for mask in 0u32..1 << names.len() {
        let preds: Vec<ModalityPrediction> = names
            .iter()
            .enumerate()
            .map(|(i, n)| ModalityPrediction::new(n.clone(), mask & (1 << i) != 0))
            .collect();
        let v = vote(&preds, &policy, rule).map_err(|e| e.to_string())?;
        table.push(json!({
            "votes": preds.iter().map(|p| u8::from(p.vote)).collect::<Vec<_>>(),
            "weighted_sum": v.weighted_sum,
            "success": v.success,
        }));
    }
    let best_single = accs
        .iter()
        .map(|a| input.prior * a.sensitivity + (1.0 - input.prior) * a.specificity)
        .fold(0.0, f64::max);
    Ok(json!({
        "weights": policy.weights(),
        "lambda": policy.threshold(),
        "sensitivity": fa.sensitivity,
        "specificity": fa.specificity,
        "accuracy": fa.accuracy,
        "best_single": best_single,
        "truth_table": table,
    }))
}

/// Monte Carlo run of a shipped task, optionally with a custom tree.
pub fn simulate_json(
    name: &str,
    tree: &str,
    trials: u64,
    seed: u64,
    faults: bool,
) -> Result<Value, String> {
    if trials == 0 || trials > MAX_TRIALS {
        return Err(format!("trials must be in 1..={MAX_TRIALS}"));
    }
    let task = task(name)?;
    let cfg = RunConfig::shipped(task)
        .with_trials(trials)
        .with_seed(seed)
        .with_faults(faults, faults);
    let text = if tree.trim().is_empty() {
        harness::shipped_tree(task)
    } else {
        tree
    };
    let prepared = harness::prepare(cfg, text).map_err(|e| e.to_string())?;
    let out = harness::run_trials(&prepared, 1).map_err(|e| e.to_string())?;
    Ok(out.summary.to_json())
}

fn js(r: Result<Value, String>) -> Result<String, JsValue> {
    r.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn shipped_tree(task: &str) -> Result<String, JsValue> {
    shipped_tree_text(task).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn validate_tree(text: &str) -> String {
    validate_json(text).to_string()
}

#[wasm_bindgen]
pub fn fusion_oracle(input: &str) -> Result<String, JsValue> {
    js(serde_json::from_str::<OracleInput>(input)
        .map_err(|e| e.to_string())
        .and_then(|i| oracle_json(&i)))
}

#[wasm_bindgen]
pub fn simulate(
    task: &str,
    tree: &str,
    trials: u32,
    seed: u32,
    faults: bool,
) -> Result<String, JsValue> {
    js(simulate_json(
        task,
        tree,
        u64::from(trials),
        u64::from(seed),
        faults,
    ))
}
