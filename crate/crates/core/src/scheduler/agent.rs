use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::Checkpoint;
use super::network::{Activations, BatchActivations, QNetwork};
use super::replay::{Experience, ReplayBuffer};
use super::{decay_epsilon, feasible_mask, select_action, AgentConfig, SchedulerState, MAX_TERMINALS};
use crate::error::{Error, Result};

/// How the bootstrap value of the next state is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetRule {
    /// Online network picks the next action, target network values it.
    Double,
    /// Target network both picks and values the next action.
    Standard,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean squared error before the update.
    pub mean_loss: f64,
    pub targets: Vec<f64>,
}

/// Regression target `R + gamma * Q_target(s', a*)` for one transition, with
/// `a*` restricted to the actions feasible in `s'`.
pub fn compute_target(exp: &Experience, q_eval: &QNetwork, q_target: &QNetwork, cfg: &AgentConfig, rule: TargetRule) -> f64 {
    if cfg.gamma == 0.0 {
        return exp.reward;
    }
    let x_next = exp.next_state.features(cfg.size_scale, cfg.priority_scale);
    let mask = feasible_mask(&exp.next_state);
    let mut acts = Activations::default();
    let bootstrap = match rule {
        TargetRule::Double => {
            q_eval.hidden_into(&x_next, &mut acts);
            let (best, _) = q_eval.best_action(&acts, &mask);
            q_target.hidden_into(&x_next, &mut acts);
            q_target.action_value(&acts, best)
        }
        TargetRule::Standard => {
            q_target.hidden_into(&x_next, &mut acts);
            q_target.best_action(&acts, &mask).1
        }
    };
    exp.reward + cfg.gamma * bootstrap
}

/// One gradient step of `q_eval` on the mean squared TD error over `batch`.
///
/// All targets and predictions use the weights from before the step.
pub fn train_step(
    batch: &[&Experience],
    q_eval: &mut QNetwork,
    q_target: &QNetwork,
    cfg: &AgentConfig,
    rule: TargetRule,
) -> Result<TrainReport> {
    if batch.is_empty() {
        return Err(Error::InvalidCall("train step on an empty batch".into()));
    }
    if q_eval.sizes() != q_target.sizes() {
        return Err(Error::InvalidCall("online and target networks differ in shape".into()));
    }
    let rows = batch.len();
    let n = rows as f64;
    let features = |pick: fn(&Experience) -> &SchedulerState| {
        let mut m = Vec::with_capacity(rows * q_eval.input_dim());
        for exp in batch {
            m.extend(pick(exp).features(cfg.size_scale, cfg.priority_scale));
        }
        m
    };
    let xs = features(|e| &e.state);
    let mut acts = BatchActivations::default();
    let targets: Vec<f64> = if cfg.gamma == 0.0 {
        batch.iter().map(|e| e.reward).collect()
    } else {
        let next = features(|e| &e.next_state);
        let mut tgt = BatchActivations::default();
        q_target.hidden_batch(&next, rows, &mut tgt);
        if rule == TargetRule::Double {
            q_eval.hidden_batch(&next, rows, &mut acts);
        }
        batch
            .iter()
            .enumerate()
            .map(|(b, exp)| {
                let mask = feasible_mask(&exp.next_state);
                let bootstrap = match rule {
                    TargetRule::Double => {
                        let (best, _) = q_eval.batch_best_action(&acts, b, &mask);
                        q_target.batch_action_value(&tgt, b, best)
                    }
                    TargetRule::Standard => q_target.batch_best_action(&tgt, b, &mask).1,
                };
                exp.reward + cfg.gamma * bootstrap
            })
            .collect()
    };
    q_eval.hidden_batch(&xs, rows, &mut acts);
    let actions: Vec<usize> = batch.iter().map(|e| e.action).collect();
    let mut loss = 0.0;
    let d_out: Vec<f64> = actions
        .iter()
        .zip(&targets)
        .enumerate()
        .map(|(b, (&a, &y))| {
            let err = q_eval.batch_action_value(&acts, b, a) - y;
            loss += err * err;
            2.0 * err / n
        })
        .collect();
    let mut grads = q_eval.zero_gradients();
    q_eval.accumulate_batch_gradient(&xs, &acts, &actions, &d_out, &mut grads);
    q_eval.apply_sgd(&grads, cfg.learning_rate);
    Ok(TrainReport {
        mean_loss: loss / n,
        targets,
    })
}

/// Hard copy of the online weights into the target network.
pub fn sync_target(q_eval: &QNetwork, q_target: &mut QNetwork) {
    q_target.copy_from(q_eval);
}

#[derive(Debug, Clone)]
struct Pending {
    state: SchedulerState,
    action: usize,
    reward: Option<f64>,
}

/// Scheduling agent owned by one server.
///
/// Per slot the server calls [`Agent::act`] with the observed state and then
/// [`Agent::record_reward`]. The transition is completed by the next `act`
/// call, which also runs a training step once the replay buffer is full.
#[derive(Debug, Clone)]
pub struct Agent {
    cfg: AgentConfig,
    rule: TargetRule,
    num_terminals: usize,
    q_eval: QNetwork,
    q_target: QNetwork,
    replay: ReplayBuffer,
    epsilon: f64,
    train_steps: u64,
    rng: ChaCha8Rng,
    pending: Option<Pending>,
    learning: bool,
    losses: Vec<f64>,
}

impl Agent {
    pub fn new(cfg: AgentConfig, rule: TargetRule, num_terminals: usize, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if num_terminals == 0 || num_terminals > MAX_TERMINALS {
            return Err(Error::ActionSpaceTooLarge(num_terminals, MAX_TERMINALS));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q_eval = QNetwork::new(&cfg.layer_sizes(num_terminals), &mut rng);
        let q_target = q_eval.clone();
        Ok(Self {
            replay: ReplayBuffer::new(cfg.buffer_capacity),
            epsilon: cfg.epsilon_start,
            cfg,
            rule,
            num_terminals,
            q_eval,
            q_target,
            train_steps: 0,
            rng,
            pending: None,
            learning: true,
            losses: Vec::new(),
        })
    }

    pub fn from_checkpoint(cfg: AgentConfig, rule: TargetRule, ckpt: Checkpoint, seed: u64) -> Result<Self> {
        let mut agent = Agent::new(cfg, rule, ckpt.num_terminals, seed)?;
        let expected = agent.cfg.layer_sizes(ckpt.num_terminals);
        if ckpt.q_eval.sizes() != expected {
            return Err(Error::Checkpoint(format!(
                "layer sizes {:?} do not match config {:?}",
                ckpt.q_eval.sizes(),
                expected
            )));
        }
        agent.q_eval = ckpt.q_eval;
        agent.q_target = ckpt.q_target;
        agent.train_steps = ckpt.train_steps;
        agent.epsilon = ckpt.epsilon;
        Ok(agent)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            num_terminals: self.num_terminals,
            train_steps: self.train_steps,
            epsilon: self.epsilon,
            q_eval: self.q_eval.clone(),
            q_target: self.q_target.clone(),
        }
    }

    pub fn config(&self) -> &AgentConfig {
        &self.cfg
    }

    pub fn rule(&self) -> TargetRule {
        self.rule
    }

    pub fn num_terminals(&self) -> usize {
        self.num_terminals
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn train_steps(&self) -> u64 {
        self.train_steps
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
    }

    pub fn q_eval(&self) -> &QNetwork {
        &self.q_eval
    }

    pub fn q_target(&self) -> &QNetwork {
        &self.q_target
    }

    /// Switch between training (epsilon-greedy, stores and learns) and
    /// evaluation (greedy, no updates).
    pub fn set_learning(&mut self, learning: bool) {
        self.learning = learning;
        self.pending = None;
    }

    pub fn is_learning(&self) -> bool {
        self.learning
    }

    /// Choose an action index for `state`.
    pub fn act(&mut self, state: &SchedulerState) -> Result<usize> {
        if state.num_terminals() != self.num_terminals {
            return Err(Error::InvalidInput(format!(
                "state has {} terminals, agent expects {}",
                state.num_terminals(),
                self.num_terminals
            )));
        }
        if self.learning {
            if let Some(p) = self.pending.take() {
                if let Some(reward) = p.reward {
                    self.replay.push(Experience {
                        state: p.state,
                        action: p.action,
                        reward,
                        next_state: state.clone(),
                    });
                    if self.replay.is_full() {
                        self.learn()?;
                    }
                }
            }
        }

        let mask = feasible_mask(state);
        let x = state.features(self.cfg.size_scale, self.cfg.priority_scale);
        let acts = self.q_eval.hidden(&x);
        let mut q = vec![0.0; self.q_eval.output_dim()];
        for &a in &mask {
            q[a] = self.q_eval.action_value(&acts, a);
        }
        let epsilon = if self.learning { self.epsilon } else { 0.0 };
        let action = select_action(&q, &mask, epsilon, &mut self.rng);
        if self.learning {
            self.pending = Some(Pending {
                state: state.clone(),
                action,
                reward: None,
            });
        }
        Ok(action)
    }

    /// Reward for the action returned by the latest `act`.
    pub fn record_reward(&mut self, reward: f64) {
        if let Some(p) = self.pending.as_mut() {
            p.reward = Some(reward * self.cfg.reward_scale);
        }
    }

    /// Drop the half-built transition at an episode boundary.
    pub fn end_episode(&mut self) {
        self.pending = None;
    }

    fn learn(&mut self) -> Result<()> {
        let batch = self.replay.sample(self.cfg.batch_size, &mut self.rng);
        let report = train_step(&batch, &mut self.q_eval, &self.q_target, &self.cfg, self.rule)?;
        if !report.mean_loss.is_finite() {
            return Err(Error::Diverged { steps: self.train_steps });
        }
        self.losses.push(report.mean_loss);
        self.epsilon = decay_epsilon(&self.cfg, self.epsilon);
        self.train_steps += 1;
        if self.train_steps % self.cfg.target_sync_period == 0 {
            sync_target(&self.q_eval, &mut self.q_target);
        }
        Ok(())
    }

    /// Losses of the training steps since the last call.
    pub fn take_losses(&mut self) -> Vec<f64> {
        std::mem::take(&mut self.losses)
    }
}
