//! Comparison schedulers: single-estimator DQN, depth-limited exhaustive
//! search over joint actions, and the accept-all / local-only bounds.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BitQueue, TaskSpec};
use crate::scheduler::{
    encode_state, evaluate_action, feasible_mask, train_step, ActionVector, AgentConfig, Experience, QNetwork,
    SchedulerState, TargetRule, TrainReport, MAX_TERMINALS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyTag {
    RDdqn,
    Dqn,
    Exhaustive,
    AcceptAll,
    LocalOnly,
}

impl PolicyTag {
    pub const ALL: [PolicyTag; 5] = [
        PolicyTag::RDdqn,
        PolicyTag::Dqn,
        PolicyTag::Exhaustive,
        PolicyTag::AcceptAll,
        PolicyTag::LocalOnly,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyTag::RDdqn => "r_ddqn",
            PolicyTag::Dqn => "dqn",
            PolicyTag::Exhaustive => "exhaustive",
            PolicyTag::AcceptAll => "accept_all",
            PolicyTag::LocalOnly => "local_only",
        }
    }

    pub fn is_learned(self) -> bool {
        matches!(self, PolicyTag::RDdqn | PolicyTag::Dqn)
    }

    pub fn target_rule(self) -> Option<TargetRule> {
        match self {
            PolicyTag::RDdqn => Some(TargetRule::Double),
            PolicyTag::Dqn => Some(TargetRule::Standard),
            _ => None,
        }
    }
}

impl fmt::Display for PolicyTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyTag::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::config("policy", format!("unknown policy `{s}`")))
    }
}

/// A scheduling policy together with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyKind {
    pub tag: PolicyTag,
    /// Look-ahead depth of the exhaustive search, ignored by other policies.
    #[serde(default = "default_depth")]
    pub depth: usize,
}

fn default_depth() -> usize {
    1
}

impl PolicyKind {
    pub fn new(tag: PolicyTag) -> Self {
        Self { tag, depth: 1 }
    }

    pub fn exhaustive(depth: usize) -> Self {
        Self {
            tag: PolicyTag::Exhaustive,
            depth,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tag == PolicyTag::Exhaustive && self.depth == 0 {
            return Err(Error::config("policy.depth", "must be >= 1"));
        }
        Ok(())
    }
}

/// Standard DQN update: the target network both chooses and values the
/// bootstrap action.
pub fn dqn_train_step(batch: &[&Experience], q_eval: &mut QNetwork, q_target: &QNetwork, cfg: &AgentConfig) -> Result<TrainReport> {
    train_step(batch, q_eval, q_target, cfg, TargetRule::Standard)
}

/// Double DQN update: the online network chooses, the target network values.
pub fn ddqn_train_step(batch: &[&Experience], q_eval: &mut QNetwork, q_target: &QNetwork, cfg: &AgentConfig) -> Result<TrainReport> {
    train_step(batch, q_eval, q_target, cfg, TargetRule::Double)
}

/// Requests the exhaustive search assumes will arrive `step` slots ahead.
pub trait RequestForecast {
    fn requests(&self, step: usize) -> Vec<(usize, TaskSpec)>;
}

/// Assume nothing new arrives.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoArrivals;

impl RequestForecast for NoArrivals {
    fn requests(&self, _step: usize) -> Vec<(usize, TaskSpec)> {
        Vec::new()
    }
}

/// Best first action over a `depth`-slot horizon with no future arrivals.
pub fn exhaustive_schedule(
    state: &SchedulerState,
    queue: &BitQueue,
    slot_capacity_bits: f64,
    depth: usize,
    base_reward: f64,
) -> Result<ActionVector> {
    exhaustive_schedule_with(state, queue, slot_capacity_bits, depth, base_reward, &NoArrivals).map(|(a, _)| a)
}

/// Enumerate every feasible action, roll the queue forward `depth` slots
/// under `forecast`, and return the first action of the best sequence along
/// with its total reward. Ties go to the lowest action index.
pub fn exhaustive_schedule_with(
    state: &SchedulerState,
    queue: &BitQueue,
    slot_capacity_bits: f64,
    depth: usize,
    base_reward: f64,
    forecast: &dyn RequestForecast,
) -> Result<(ActionVector, f64)> {
    let m = state.num_terminals();
    if m > MAX_TERMINALS {
        return Err(Error::ActionSpaceTooLarge(m, MAX_TERMINALS));
    }
    if depth == 0 {
        return Err(Error::config("policy.depth", "must be >= 1"));
    }
    let search = Search {
        capacity: slot_capacity_bits,
        base_reward,
        forecast,
        num_terminals: m,
    };
    let (best, value) = search.best(state, queue, depth, 0)?;
    Ok((ActionVector::from_index(best, m), value))
}

struct Search<'a> {
    capacity: f64,
    base_reward: f64,
    forecast: &'a dyn RequestForecast,
    num_terminals: usize,
}

impl Search<'_> {
    fn best(&self, state: &SchedulerState, queue: &BitQueue, depth: usize, step: usize) -> Result<(usize, f64)> {
        let mut best = (0, f64::NEG_INFINITY);
        for a in feasible_mask(state) {
            let action = ActionVector::from_index(a, self.num_terminals);
            let mut total = evaluate_action(state, queue, &action, self.capacity, self.base_reward)?;
            if depth > 1 {
                let mut next_queue = queue.clone();
                for m in (0..self.num_terminals).filter(|&m| action.accepts(m)) {
                    next_queue.push(TaskSpec {
                        id: u64::MAX,
                        size_bits: state.sizes[m],
                        priority: state.priorities[m],
                        created_slot: step as u64,
                        owner: m,
                    });
                }
                next_queue.drain_slot(self.capacity);
                let rho = 1.0 - next_queue.total_bits() / self.capacity;
                let next_state = encode_state(&self.forecast.requests(step + 1), rho, self.num_terminals)?;
                total += self.best(&next_state, &next_queue, depth - 1, step + 1)?.1;
            }
            if total > best.1 {
                best = (a, total);
            }
        }
        Ok(best)
    }
}

/// Accept every request.
pub fn accept_all_schedule(state: &SchedulerState) -> ActionVector {
    ActionVector {
        bits: state.sizes.iter().map(|&s| s > 0.0).collect(),
    }
}

/// Offloading decision override of the local-only bound: never offload.
pub fn local_only_policy() -> bool {
    false
}
