use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{ServerId, TerminalId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub task_id: u64,
    pub priority: f64,
    pub size_bits: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TerminalSlot {
    pub processed: Vec<Completion>,
    pub comp_queue_bits: f64,
    pub tran_queue_bits: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ServerSlot {
    pub processed: Vec<Completion>,
    pub requests: usize,
    pub accepted: usize,
    pub reward: f64,
    pub queue_bits: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub terminal: TerminalId,
    pub task_id: u64,
    pub offloaded: bool,
    pub server: Option<ServerId>,
    /// Whether the server accepted the request; false for local decisions.
    pub accepted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SlotEvent {
    /// No server covers the terminal, so its new task stays local.
    NoCoverage { terminal: TerminalId },
    /// The head of the offloading queue cannot reach its server this slot.
    UploadStalled { terminal: TerminalId, server: ServerId },
}

/// Everything that happened in one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotLog {
    pub slot: u64,
    pub terminals: Vec<TerminalSlot>,
    pub servers: Vec<ServerSlot>,
    pub decisions: Vec<DecisionRecord>,
    pub events: Vec<SlotEvent>,
    pub generated_bits: f64,
}

impl SlotLog {
    /// Priority sum of every task completed this slot, terminals first.
    pub fn processed_priority(&self) -> f64 {
        let local: f64 = self.terminals.iter().flat_map(|t| &t.processed).map(|c| c.priority).sum();
        let remote: f64 = self.servers.iter().flat_map(|s| &s.processed).map(|c| c.priority).sum();
        local + remote
    }

    pub fn completions(&self) -> impl Iterator<Item = &Completion> {
        self.terminals
            .iter()
            .flat_map(|t| &t.processed)
            .chain(self.servers.iter().flat_map(|s| &s.processed))
    }
}

/// Average per-slot priority of completed tasks over `total_slots`.
pub fn importance_metric(logs: &[SlotLog], total_slots: u64) -> f64 {
    if total_slots == 0 {
        return 0.0;
    }
    logs.iter().map(SlotLog::processed_priority).sum::<f64>() / total_slots as f64
}

/// One JSON object per line.
pub fn write_ndjson<W: Write>(mut w: W, logs: &[SlotLog]) -> Result<()> {
    for log in logs {
        serde_json::to_writer(&mut w, log)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Per-slot summary: `slot, reward_<n>..., i_to_date, queue_bits_<n>...`.
pub fn write_summary_csv<W: Write>(w: W, logs: &[SlotLog]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let n = logs.first().map_or(0, |l| l.servers.len());
    let mut header = vec!["slot".to_string()];
    header.extend((0..n).map(|i| format!("reward_{i}")));
    header.push("i_to_date".into());
    header.extend((0..n).map(|i| format!("queue_bits_{i}")));
    out.write_record(&header)?;
    let mut total = 0.0;
    for (k, log) in logs.iter().enumerate() {
        total += log.processed_priority();
        let mut row = vec![log.slot.to_string()];
        row.extend(log.servers.iter().map(|s| s.reward.to_string()));
        row.push((total / (k + 1) as f64).to_string());
        row.extend(log.servers.iter().map(|s| s.queue_bits.to_string()));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}
