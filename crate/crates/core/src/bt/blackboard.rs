use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Multi-channel time series sampled at a fixed period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    /// Seconds between consecutive samples.
    pub period: f64,
    /// One row per sample, one column per channel.
    pub samples: Vec<Vec<f64>>,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    /// Column `c` as a contiguous vector.
    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.samples.iter().map(|row| row[c]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Real(f64),
    Series(TimeSeries),
    Text(String),
}

impl Value {
    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Bool(_) => "bool",
            Value::Int(_) => "int",
            Value::Real(_) => "real",
            Value::Series(_) => "series",
            Value::Text(_) => "text",
        }
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}
impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}
impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Real(v)
    }
}
impl From<TimeSeries> for Value {
    fn from(v: TimeSeries) -> Self {
        Value::Series(v)
    }
}
impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_string())
    }
}
impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Text(v)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BlackboardError {
    #[error("blackboard key `{0}` is absent")]
    KeyAbsent(String),
    #[error("blackboard key `{key}` holds {found}, expected {expected}")]
    TypeMismatch {
        key: String,
        expected: &'static str,
        found: &'static str,
    },
}

/// Shared key/value store visible to every node of a tree instance.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Blackboard {
    entries: BTreeMap<String, Value>,
}

macro_rules! typed_get {
    ($fn:ident, $variant:ident, $ty:ty, $label:literal) => {
        pub fn $fn(&self, key: &str) -> Result<$ty, BlackboardError> {
            match self.get(key)? {
                Value::$variant(v) => Ok(v.clone()),
                other => Err(BlackboardError::TypeMismatch {
                    key: key.to_string(),
                    expected: $label,
                    found: other.type_name(),
                }),
            }
        }
    };
}

impl Blackboard {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn put(&mut self, key: impl Into<String>, value: impl Into<Value>) {
        self.entries.insert(key.into(), value.into());
    }

    pub fn get(&self, key: &str) -> Result<&Value, BlackboardError> {
        self.entries
            .get(key)
            .ok_or_else(|| BlackboardError::KeyAbsent(key.to_string()))
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    typed_get!(get_bool, Bool, bool, "bool");
    typed_get!(get_int, Int, i64, "int");
    typed_get!(get_real, Real, f64, "real");
    typed_get!(get_series, Series, TimeSeries, "series");
    typed_get!(get_text, Text, String, "text");
}

impl fmt::Display for Blackboard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k}: {}", v.type_name())?;
        }
        Ok(())
    }
}
