//! Delay, energy, rate and capacity formulas for terminals and edge servers.
//!
//! Everything here is a pure function of its inputs. Units are bits, seconds,
//! watts and joules throughout.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type TerminalId = usize;
pub type ServerId = usize;

/// One indivisible computation task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: u64,
    pub size_bits: f64,
    pub priority: f64,
    pub created_slot: u64,
    pub owner: TerminalId,
}

impl TaskSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.size_bits > 0.0) || !self.size_bits.is_finite() {
            return Err(Error::InvalidInput(format!(
                "task {} size_bits must be > 0, got {}",
                self.id, self.size_bits
            )));
        }
        if !(self.priority > 0.0) || !self.priority.is_finite() {
            return Err(Error::InvalidInput(format!(
                "task {} priority must be > 0, got {}",
                self.id, self.priority
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerminalProfile {
    /// CPU cycles per second.
    pub cpu_hz: f64,
    pub bits_per_cycle: f64,
    /// Power while computing, W.
    pub p_comp: f64,
    /// Power while idle waiting on a server, W.
    pub p_idle: f64,
    /// Transmit power, W.
    pub p_tran: f64,
}

impl TerminalProfile {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("cpu_hz", self.cpu_hz),
            ("bits_per_cycle", self.bits_per_cycle),
            ("p_comp", self.p_comp),
            ("p_idle", self.p_idle),
            ("p_tran", self.p_tran),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidProfile(format!(
                    "terminal {name} must be > 0, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Bits the terminal can process per second.
    pub fn throughput(&self) -> f64 {
        self.cpu_hz * self.bits_per_cycle
    }

    pub fn slot_capacity_bits(&self, slot_s: f64) -> f64 {
        slot_s * self.bits_per_cycle * self.cpu_hz
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerProfile {
    pub cpu_hz: f64,
    pub bits_per_cycle: f64,
    pub coverage_radius_m: f64,
}

impl ServerProfile {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("cpu_hz", self.cpu_hz),
            ("bits_per_cycle", self.bits_per_cycle),
            ("coverage_radius_m", self.coverage_radius_m),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidProfile(format!(
                    "server {name} must be > 0, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn throughput(&self) -> f64 {
        self.cpu_hz * self.bits_per_cycle
    }

    pub fn slot_capacity_bits(&self, slot_s: f64) -> f64 {
        slot_s * self.bits_per_cycle * self.cpu_hz
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadioParams {
    pub bandwidth_hz: f64,
    pub noise_power_w: f64,
    pub pathloss_exponent: f64,
    /// Channel power gain at 1 m.
    pub reference_gain: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        Self {
            bandwidth_hz: 10e6,
            noise_power_w: 1e-13,
            pathloss_exponent: 3.0,
            reference_gain: 1e-3,
        }
    }
}

impl RadioParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_hz > 0.0) {
            return Err(Error::InvalidProfile(format!(
                "bandwidth_hz must be > 0, got {}",
                self.bandwidth_hz
            )));
        }
        if !(self.noise_power_w > 0.0) {
            return Err(Error::InvalidProfile(format!(
                "noise_power_w must be > 0, got {}",
                self.noise_power_w
            )));
        }
        if !(self.pathloss_exponent >= 2.0) {
            return Err(Error::InvalidProfile(format!(
                "pathloss_exponent must be >= 2, got {}",
                self.pathloss_exponent
            )));
        }
        if !(self.reference_gain > 0.0) {
            return Err(Error::InvalidProfile(format!(
                "reference_gain must be > 0, got {}",
                self.reference_gain
            )));
        }
        Ok(())
    }

    /// The same link with its bandwidth split evenly between `sharers` terminals.
    pub fn shared(&self, sharers: usize) -> Self {
        Self {
            bandwidth_hz: self.bandwidth_hz / sharers.max(1) as f64,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostPair {
    pub delay_s: f64,
    pub energy_j: f64,
}

/// Delay and energy of processing a task on the terminal itself, behind its
/// current computing queue.
pub fn local_cost(profile: &TerminalProfile, comp_queue_bits: f64, task_bits: f64) -> Result<CostPair> {
    profile.validate()?;
    check_bits(comp_queue_bits, task_bits)?;
    let delay_s = (comp_queue_bits + task_bits) / (profile.cpu_hz * profile.bits_per_cycle);
    Ok(CostPair {
        delay_s,
        energy_j: profile.p_comp * delay_s,
    })
}

/// Shannon rate of the uplink: `W log2(1 + P |h|^2 / sigma^2)`.
pub fn achievable_rate(radio: &RadioParams, p_tran: f64, channel_gain: f64) -> Result<f64> {
    if !(channel_gain >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "channel gain must be >= 0, got {channel_gain}"
        )));
    }
    if channel_gain == 0.0 {
        return Ok(0.0);
    }
    let snr = p_tran * channel_gain / radio.noise_power_w;
    Ok(radio.bandwidth_hz * snr.ln_1p() / std::f64::consts::LN_2)
}

/// Time to push the offloading queue plus the new task through the uplink.
pub fn transmission_delay(tran_queue_bits: f64, task_bits: f64, rate: f64) -> Result<f64> {
    if !(rate > 0.0) {
        return Err(Error::LinkUnavailable(rate));
    }
    Ok((tran_queue_bits + task_bits) / rate)
}

/// Queueing plus processing delay on the server.
pub fn server_processing_delay(server: &ServerProfile, server_queue_bits: f64, task_bits: f64) -> Result<f64> {
    server.validate()?;
    check_bits(server_queue_bits, task_bits)?;
    Ok((server_queue_bits + task_bits) / (server.cpu_hz * server.bits_per_cycle))
}

/// Total delay and terminal-side energy of offloading a task: uplink time at
/// transmit power, then idle power while the server queues and runs it.
pub fn offload_cost(
    profile: &TerminalProfile,
    tran_queue_bits: f64,
    task_bits: f64,
    rate: f64,
    server: &ServerProfile,
    server_queue_bits: f64,
) -> Result<CostPair> {
    profile.validate()?;
    check_bits(tran_queue_bits, task_bits)?;
    let tran = transmission_delay(tran_queue_bits, task_bits, rate)?;
    let remote = server_processing_delay(server, server_queue_bits, task_bits)?;
    Ok(CostPair {
        delay_s: tran + remote,
        energy_j: profile.p_tran * tran + profile.p_idle * remote,
    })
}

/// Fraction of one slot's processing capacity left after the current backlog.
///
/// Not clamped: a backlog of two slots gives -1.
pub fn remaining_resources(server: &ServerProfile, queue_bits: f64, slot_s: f64) -> Result<f64> {
    if !(slot_s > 0.0) {
        return Err(Error::InvalidInput(format!("slot length must be > 0, got {slot_s}")));
    }
    Ok(1.0 - queue_bits / (server.cpu_hz * slot_s * server.bits_per_cycle))
}

fn check_bits(queue_bits: f64, task_bits: f64) -> Result<()> {
    if !(task_bits > 0.0) {
        return Err(Error::InvalidInput(format!("task_bits must be > 0, got {task_bits}")));
    }
    if !(queue_bits >= 0.0) {
        return Err(Error::InvalidInput(format!("queue bits must be >= 0, got {queue_bits}")));
    }
    Ok(())
}

/// Anything that occupies a queue and has a size in bits.
pub trait Payload {
    fn size_bits(&self) -> f64;
}

impl Payload for TaskSpec {
    fn size_bits(&self) -> f64 {
        self.size_bits
    }
}

/// Result of one slot of service on a [`BitQueue`].
#[derive(Debug, Clone, PartialEq)]
pub struct Drained<T> {
    /// Items completed this slot, in FIFO order.
    pub processed: Vec<T>,
    /// Bits of work actually performed, including progress on an unfinished head.
    pub work_bits: f64,
}

impl<T> Drained<T> {
    /// Number of completed items (the per-slot task count).
    pub fn count(&self) -> usize {
        self.processed.len()
    }
}

/// FIFO queue that tracks its total size in bits.
///
/// `total_bits` counts whole entries, including any part of the head that has
/// already been worked on; `head_progress` records that part.
#[derive(Debug, Clone, PartialEq)]
pub struct BitQueue<T = TaskSpec> {
    entries: VecDeque<T>,
    total_bits: f64,
    head_progress: f64,
}

impl<T> Default for BitQueue<T> {
    fn default() -> Self {
        Self {
            entries: VecDeque::new(),
            total_bits: 0.0,
            head_progress: 0.0,
        }
    }
}

impl<T: Payload> BitQueue<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, item: T) {
        self.total_bits += item.size_bits();
        self.entries.push_back(item);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_bits(&self) -> f64 {
        self.total_bits
    }

    pub fn head_progress(&self) -> f64 {
        self.head_progress
    }

    /// Bits still to be worked on.
    pub fn remaining_bits(&self) -> f64 {
        self.total_bits - self.head_progress
    }

    pub fn front(&self) -> Option<&T> {
        self.entries.front()
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.entries.iter()
    }

    fn pop_front(&mut self) -> Option<T> {
        let item = self.entries.pop_front()?;
        self.head_progress = 0.0;
        if self.entries.is_empty() {
            // Avoid drift from repeated float subtraction.
            self.total_bits = 0.0;
        } else {
            self.total_bits -= item.size_bits();
        }
        Some(item)
    }

    /// Process one slot of indivisible tasks with `capacity_bits` of compute.
    ///
    /// Removes the longest FIFO prefix that fits. A head task larger than a
    /// whole slot's capacity absorbs the leftover capacity as progress and
    /// completes in the slot where its remaining bits fit.
    pub fn drain_slot(&mut self, capacity_bits: f64) -> Drained<T> {
        let mut budget = capacity_bits.max(0.0);
        let mut processed = Vec::new();
        let mut work_bits = 0.0;
        while let Some(head) = self.entries.front() {
            let size = head.size_bits();
            let rest = size - self.head_progress;
            if rest <= budget {
                budget -= rest;
                work_bits += rest;
                processed.push(self.pop_front().expect("nonempty"));
            } else {
                if size > capacity_bits {
                    self.head_progress += budget;
                    work_bits += budget;
                }
                break;
            }
        }
        Drained { processed, work_bits }
    }

    /// Number of items `drain_slot(capacity_bits)` would complete, without
    /// mutating the queue.
    pub fn preview_slot(&self, capacity_bits: f64) -> usize {
        let mut budget = capacity_bits.max(0.0);
        let mut progress = self.head_progress;
        let mut count = 0;
        for item in &self.entries {
            let rest = item.size_bits() - progress;
            if rest > budget {
                break;
            }
            budget -= rest;
            progress = 0.0;
            count += 1;
        }
        count
    }

    /// Move `budget_bits` of a bit stream out of the queue head, as a link
    /// does. Items whose last bit leaves are returned.
    pub fn transmit(&mut self, budget_bits: f64) -> Drained<T> {
        self.transmit_while(budget_bits, |_| true)
    }

    /// Like [`BitQueue::transmit`], but stops at the first head for which
    /// `keep` is false.
    pub fn transmit_while(&mut self, budget_bits: f64, keep: impl Fn(&T) -> bool) -> Drained<T> {
        let mut budget = budget_bits.max(0.0);
        let mut processed = Vec::new();
        let mut work_bits = 0.0;
        while let Some(head) = self.entries.front().filter(|h| keep(h)) {
            let rest = head.size_bits() - self.head_progress;
            if rest <= budget {
                budget -= rest;
                work_bits += rest;
                processed.push(self.pop_front().expect("nonempty"));
            } else {
                self.head_progress += budget;
                work_bits += budget;
                break;
            }
        }
        Drained { processed, work_bits }
    }
}

impl<T: Payload> FromIterator<T> for BitQueue<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut q = BitQueue::new();
        for item in iter {
            q.push(item);
        }
        q
    }
}
