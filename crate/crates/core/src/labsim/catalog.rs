use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bt::ActionSpec;

use super::SimError;

/// Nominal duration in seconds of every action a world can execute.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionCatalog {
    durations: BTreeMap<String, f64>,
}

impl ActionCatalog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_map(durations: BTreeMap<String, f64>) -> Result<Self, SimError> {
        for (name, d) in &durations {
            if !d.is_finite() || *d < 0.0 {
                return Err(SimError::Param(format!(
                    "duration of `{name}` must be a non-negative number, got {d}"
                )));
            }
        }
        Ok(Self { durations })
    }

    pub fn with(mut self, name: impl Into<String>, seconds: f64) -> Self {
        self.durations.insert(name.into(), seconds);
        self
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.durations.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.durations.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// A `duration=` argument on the node overrides the catalog entry.
    pub fn duration_of(&self, spec: &ActionSpec) -> Result<f64, SimError> {
        if let Some(d) = spec.number_arg("duration") {
            if d.is_finite() && d >= 0.0 {
                return Ok(d);
            }
            return Err(SimError::Param(format!(
                "`{}` has invalid duration {d}",
                spec.name
            )));
        }
        self.get(&spec.name).ok_or_else(|| {
            SimError::Param(format!("no catalog duration for action `{}`", spec.name))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bt::ArgValue;

    #[test]
    fn override_and_missing() {
        let c = ActionCatalog::new().with("grip", 2.0);
        assert_eq!(c.duration_of(&ActionSpec::new("grip")).unwrap(), 2.0);
        let spec = ActionSpec::new("grip").with_arg("duration", ArgValue::Number(0.5));
        assert_eq!(c.duration_of(&spec).unwrap(), 0.5);
        assert!(c.duration_of(&ActionSpec::new("wave")).is_err());
        assert!(ActionCatalog::from_map([("x".to_string(), -1.0)].into()).is_err());
    }
}
