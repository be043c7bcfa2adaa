use std::io;

use serde::{Deserialize, Serialize};

use super::node::Status;

/// One node visit within one tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    #[serde(rename = "tick")]
    pub tick_index: u64,
    pub node_id: String,
    #[serde(rename = "kind")]
    pub node_kind: String,
    pub status: Status,
    pub t_enter: f64,
    pub t_exit: f64,
}

/// Receives tick records in visit order once a tick has completed.
pub trait TraceSink {
    fn record(&mut self, record: &TickRecord) -> io::Result<()>;
}

/// Collects records in memory.
#[derive(Debug, Default, Clone)]
pub struct MemorySink {
    pub records: Vec<TickRecord>,
}

impl MemorySink {
    pub fn new() -> Self {
        Self::default()
    }
}

impl TraceSink for MemorySink {
    fn record(&mut self, record: &TickRecord) -> io::Result<()> {
        self.records.push(record.clone());
        Ok(())
    }
}

impl<F> TraceSink for F
where
    F: FnMut(&TickRecord) -> io::Result<()>,
{
    fn record(&mut self, record: &TickRecord) -> io::Result<()> {
        self(record)
    }
}
