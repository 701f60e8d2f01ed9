//! Per-server offload-request scheduling with a double deep Q-network.
//!
//! Each server sees, once per slot, the tasks terminals asked it to run and its
//! own spare capacity. It answers with one accept/reject bit per terminal. The
//! joint action space `{0,1}^M` is enumerated as `2^M` network outputs; bit `m`
//! of an action index is the decision for terminal `m`. Bits for terminals that
//! sent no request are always zero, which keeps the all-reject action 0
//! feasible in every state.

mod agent;
mod checkpoint;
mod network;
mod replay;

pub use agent::{compute_target, sync_target, train_step, Agent, TargetRule, TrainReport};
pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
pub use network::{Activations, BatchActivations, Dense, Gradients, QNetwork};
pub use replay::{Experience, ReplayBuffer};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BitQueue, Payload, TaskSpec};

/// Largest terminal count whose joint action space is enumerated.
pub const MAX_TERMINALS: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulerState {
    /// Requested task size per terminal, zero where no request.
    pub sizes: Vec<f64>,
    /// Requested task priority per terminal, zero where no request.
    pub priorities: Vec<f64>,
    /// Remaining resources of the server at slot start.
    pub rho: f64,
}

impl SchedulerState {
    pub fn empty(num_terminals: usize, rho: f64) -> Self {
        Self {
            sizes: vec![0.0; num_terminals],
            priorities: vec![0.0; num_terminals],
            rho,
        }
    }

    pub fn num_terminals(&self) -> usize {
        self.sizes.len()
    }

    /// Bit set of terminals with a pending request.
    pub fn request_bits(&self) -> usize {
        self.sizes
            .iter()
            .enumerate()
            .filter(|(_, &s)| s > 0.0)
            .fold(0, |acc, (m, _)| acc | (1 << m))
    }

    /// Network input: sizes and priorities scaled to roughly unit range, then rho.
    pub fn features(&self, size_scale: f64, priority_scale: f64) -> Vec<f64> {
        let mut x = Vec::with_capacity(2 * self.sizes.len() + 1);
        x.extend(self.sizes.iter().map(|s| s / size_scale));
        x.extend(self.priorities.iter().map(|p| p / priority_scale));
        x.push(self.rho);
        x
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionVector {
    pub bits: Vec<bool>,
}

impl ActionVector {
    pub fn reject_all(num_terminals: usize) -> Self {
        Self {
            bits: vec![false; num_terminals],
        }
    }

    pub fn from_index(index: usize, num_terminals: usize) -> Self {
        Self {
            bits: (0..num_terminals).map(|m| index >> m & 1 == 1).collect(),
        }
    }

    pub fn index(&self) -> usize {
        self.bits
            .iter()
            .enumerate()
            .fold(0, |acc, (m, &b)| acc | (usize::from(b) << m))
    }

    pub fn accepts(&self, terminal: usize) -> bool {
        self.bits.get(terminal).copied().unwrap_or(false)
    }

    pub fn accepted_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentConfig {
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_min: f64,
    pub epsilon_decay: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub target_sync_period: u64,
    /// Reward per unit of priority for a completed task.
    pub base_reward: f64,
    /// Factor applied to rewards before they are stored for training, so
    /// that Q-values stay in a range plain SGD can fit.
    pub reward_scale: f64,
    pub hidden_layers: Vec<usize>,
    /// Divisor applied to task sizes before they enter the network.
    pub size_scale: f64,
    /// Divisor applied to priorities before they enter the network.
    pub priority_scale: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            epsilon_start: 1.0,
            epsilon_min: 0.05,
            epsilon_decay: 0.995,
            learning_rate: 0.01,
            batch_size: 64,
            buffer_capacity: 2000,
            target_sync_period: 100,
            base_reward: 10.0,
            reward_scale: 0.01,
            hidden_layers: vec![128, 128],
            size_scale: 2e6,
            priority_scale: 5.0,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, why: String| Err(Error::config(format!("agent.{field}"), why));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma", format!("must lie in [0, 1), got {}", self.gamma));
        }
        for (name, v) in [
            ("epsilon_start", self.epsilon_start),
            ("epsilon_min", self.epsilon_min),
            ("epsilon_decay", self.epsilon_decay),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(name, format!("must lie in [0, 1], got {v}"));
            }
        }
        if self.epsilon_min > self.epsilon_start {
            return bad("epsilon_min", "must not exceed epsilon_start".into());
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate", format!("must be > 0, got {}", self.learning_rate));
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be > 0".into());
        }
        if self.buffer_capacity < self.batch_size {
            return bad("buffer_capacity", "must be at least batch_size".into());
        }
        if self.target_sync_period == 0 {
            return bad("target_sync_period", "must be > 0".into());
        }
        if !(self.base_reward > 0.0) {
            return bad("base_reward", format!("must be > 0, got {}", self.base_reward));
        }
        if !(self.reward_scale > 0.0) {
            return bad("reward_scale", format!("must be > 0, got {}", self.reward_scale));
        }
        if self.hidden_layers.is_empty() || self.hidden_layers.contains(&0) {
            return bad("hidden_layers", "need at least one layer of nonzero width".into());
        }
        if !(self.size_scale > 0.0) || !(self.priority_scale > 0.0) {
            return bad("size_scale", "feature scales must be > 0".into());
        }
        Ok(())
    }

    /// Layer widths for `num_terminals` terminals: `2M+1` in, `2^M` out.
    pub fn layer_sizes(&self, num_terminals: usize) -> Vec<usize> {
        let mut sizes = vec![2 * num_terminals + 1];
        sizes.extend(&self.hidden_layers);
        sizes.push(1 << num_terminals);
        sizes
    }
}

/// Place each terminal's request (if any) at its index.
pub fn encode_state(requests: &[(usize, TaskSpec)], rho: f64, num_terminals: usize) -> Result<SchedulerState> {
    let mut state = SchedulerState::empty(num_terminals, rho);
    for &(m, task) in requests {
        if m >= num_terminals {
            return Err(Error::InvalidRequest {
                terminal: m,
                num_terminals,
            });
        }
        state.sizes[m] = task.size_bits;
        state.priorities[m] = task.priority;
    }
    Ok(state)
}

/// Action indices whose accepted terminals all sent a request, ascending.
pub fn feasible_mask(state: &SchedulerState) -> Vec<usize> {
    subsets(state.request_bits())
}

/// All subsets of `bits`, ascending.
pub fn subsets(bits: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(1 << bits.count_ones());
    let mut s = 0usize;
    loop {
        out.push(s);
        if s == bits {
            break;
        }
        // Next subset in increasing order.
        s = (s.wrapping_sub(bits)) & bits;
    }
    out
}

pub fn task_reward(base_reward: f64, priority: f64) -> f64 {
    base_reward * priority
}

/// Reward of the tasks the server would complete this slot if it ran `queue`.
pub fn immediate_benefit<T: Payload + HasPriority>(queue: &BitQueue<T>, slot_capacity_bits: f64, base_reward: f64) -> f64 {
    let done = queue.preview_slot(slot_capacity_bits);
    queue.iter().take(done).map(|t| t.priority() * base_reward).sum()
}

/// Rewards of accepted requests spread over the slots they will wait.
pub fn expected_benefit(rewards: &[f64], action: &ActionVector, waiting_slots: u64) -> Result<f64> {
    if waiting_slots < 1 {
        return Err(Error::config("waiting_slots", "must be >= 1"));
    }
    let sum: f64 = rewards
        .iter()
        .zip(&action.bits)
        .filter(|(_, &b)| b)
        .map(|(r, _)| r)
        .sum();
    Ok(sum / waiting_slots as f64)
}

pub fn slot_reward(immediate: f64, expected: f64) -> f64 {
    immediate + expected
}

/// Backlog after acceptance, in whole slots of server capacity, at least 1.
pub fn waiting_slots(queue_bits: f64, accepted_bits: f64, slot_capacity_bits: f64) -> u64 {
    let slots = ((queue_bits + accepted_bits) / slot_capacity_bits).ceil();
    (slots as u64).max(1)
}

/// Anything carrying a task priority.
pub trait HasPriority {
    fn priority(&self) -> f64;
}

impl HasPriority for TaskSpec {
    fn priority(&self) -> f64 {
        self.priority
    }
}

/// Reward of scheduling `action` on a server whose queue is `queue`: the queue
/// with accepted tasks appended is run for one slot, and accepted rewards are
/// spread over the resulting backlog.
pub fn evaluate_action(
    state: &SchedulerState,
    queue: &BitQueue,
    action: &ActionVector,
    slot_capacity_bits: f64,
    base_reward: f64,
) -> Result<f64> {
    let mut after = queue.clone();
    let mut accepted_bits = 0.0;
    for (m, _) in action.bits.iter().enumerate().filter(|(_, &b)| b) {
        if state.sizes[m] <= 0.0 {
            return Err(Error::InvalidInput(format!("action accepts terminal {m} which sent no request")));
        }
        accepted_bits += state.sizes[m];
        after.push(TaskSpec {
            id: u64::MAX,
            size_bits: state.sizes[m],
            priority: state.priorities[m],
            created_slot: 0,
            owner: m,
        });
    }
    let c_r = immediate_benefit(&after, slot_capacity_bits, base_reward);
    let rewards: Vec<f64> = state.priorities.iter().map(|&p| task_reward(base_reward, p)).collect();
    let n = waiting_slots(queue.total_bits(), accepted_bits, slot_capacity_bits);
    Ok(slot_reward(c_r, expected_benefit(&rewards, action, n)?))
}

/// Epsilon-greedy over `mask`: uniform with probability `epsilon`, otherwise
/// the masked argmax (lowest index on ties). An empty mask yields action 0.
pub fn select_action<R: Rng + ?Sized>(q_values: &[f64], mask: &[usize], epsilon: f64, rng: &mut R) -> usize {
    if mask.is_empty() {
        return 0;
    }
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        return mask[rng.gen_range(0..mask.len())];
    }
    let mut best = mask[0];
    for &a in &mask[1..] {
        if q_values[a] > q_values[best] || (q_values[a] == q_values[best] && a < best) {
            best = a;
        }
    }
    best
}

pub fn decay_epsilon(cfg: &AgentConfig, epsilon: f64) -> f64 {
    (epsilon * cfg.epsilon_decay).max(cfg.epsilon_min)
}
