use std::collections::BTreeSet;
use std::io::Write;

use serde_json::{json, Value};

use crate::bt::{Leaf, MemorySink};

use super::run::{run_trial, TrialReport};
use super::{HarnessError, Prepared};

/// JSONL lines for one trial: tick records in visit order, each fused
/// condition's record followed by its vote record.
pub fn trace_lines(
    prepared: &Prepared,
    seed: u64,
    trial: u64,
) -> Result<(Vec<String>, TrialReport), HarnessError> {
    let fused: BTreeSet<&str> = prepared
        .executor
        .leaves()
        .filter_map(|(id, leaf)| match leaf {
            Leaf::Condition(c) if c.policy.is_some() => Some(id),
            _ => None,
        })
        .collect();
    let mut sink = MemorySink::new();
    let report = run_trial(prepared, seed, trial, Some(&mut sink))?;
    let mut votes = report.votes.iter();
    let mut lines = Vec::with_capacity(sink.records.len() + report.votes.len());
    for rec in &sink.records {
        let mut v = serde_json::to_value(rec).expect("tick record serializes");
        if let Value::Object(m) = &mut v {
            m.insert("trial".into(), json!(trial));
        }
        lines.push(v.to_string());
        if fused.contains(rec.node_id.as_str()) {
            if let Some(vote) = votes.next() {
                lines.push(
                    json!({
                        "trial": trial,
                        "condition": vote.condition,
                        "votes": vote.votes,
                        "weighted_sum": vote.weighted_sum,
                        "verdict": vote.verdict,
                    })
                    .to_string(),
                );
            }
        }
    }
    Ok((lines, report))
}

/// Writes traces for `trials` in order.
pub fn write_trace(
    prepared: &Prepared,
    seed: u64,
    trials: impl IntoIterator<Item = u64>,
    out: &mut dyn Write,
) -> Result<Vec<TrialReport>, HarnessError> {
    let io = |e: std::io::Error| HarnessError::Io(format!("writing trace: {e}"));
    let mut reports = Vec::new();
    for t in trials {
        let (lines, report) = trace_lines(prepared, seed, t)?;
        for l in lines {
            writeln!(out, "{l}").map_err(io)?;
        }
        reports.push(report);
    }
    out.flush().map_err(io)?;
    Ok(reports)
}
