//! Training and evaluation loops shared by the CLI commands and the tests.

use crate::baselines::{PolicyKind, PolicyTag};
use crate::error::{Error, Result};
use crate::scheduler::{Agent, AgentConfig, Checkpoint};
use crate::sim::{build_schedulers, derive_seed, importance_metric, Scheduler, SlotLog, World, WorldConfig};

const TRAIN_STREAM: u64 = 1;
const AGENT_STREAM: u64 = 2;
const EVAL_STREAM: u64 = 3;

/// Loss statistics of one training episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeStats {
    pub episode: u64,
    /// Mean loss over every training step taken by any server this episode;
    /// `None` while the replay buffers are still filling.
    pub mean_loss: Option<f64>,
    pub epsilon: f64,
}

pub struct Trained {
    pub curve: Vec<EpisodeStats>,
    pub schedulers: Vec<Scheduler>,
}

impl Trained {
    pub fn checkpoints(&self) -> Vec<Checkpoint> {
        self.schedulers
            .iter()
            .filter_map(|s| s.agent().map(Agent::checkpoint))
            .collect()
    }
}

/// Seed of the world used for training episode `episode`.
pub fn train_world_seed(seed: u64, episode: u64) -> u64 {
    derive_seed(derive_seed(seed, TRAIN_STREAM), episode)
}

/// Seed of the world used for evaluation run `k`.
pub fn eval_world_seed(seed: u64, k: u64) -> u64 {
    derive_seed(derive_seed(seed, EVAL_STREAM), k)
}

/// Train one learned scheduler per server for `episodes` episodes. Agents
/// persist across episodes; every episode is a fresh world.
pub fn train(world: &WorldConfig, agent: &AgentConfig, tag: PolicyTag, episodes: u64, seed: u64) -> Result<Trained> {
    train_with(world, agent, tag, episodes, seed, |_| {})
}

/// [`train`] with a callback after every episode.
pub fn train_with(
    world: &WorldConfig,
    agent: &AgentConfig,
    tag: PolicyTag,
    episodes: u64,
    seed: u64,
    mut on_episode: impl FnMut(&EpisodeStats),
) -> Result<Trained> {
    if !tag.is_learned() {
        return Err(Error::config("policy", format!("`{}` is not a learned policy", tag.as_str())));
    }
    let mut schedulers = build_schedulers(PolicyKind::new(tag), agent, world, derive_seed(seed, AGENT_STREAM))?;
    let mut curve = Vec::with_capacity(episodes as usize);
    for episode in 1..=episodes {
        let cfg = WorldConfig {
            seed: train_world_seed(seed, episode),
            ..world.clone()
        };
        let mut w = World::new(cfg, schedulers, agent.base_reward, false)?;
        w.run()?;
        schedulers = w.into_schedulers();
        let mut losses = Vec::new();
        for s in &mut schedulers {
            if let Some(a) = s.agent_mut() {
                losses.extend(a.take_losses());
            }
        }
        let stats = EpisodeStats {
            episode,
            mean_loss: (!losses.is_empty()).then(|| losses.iter().sum::<f64>() / losses.len() as f64),
            epsilon: schedulers[0].agent().map_or(0.0, Agent::epsilon),
        };
        on_episode(&stats);
        curve.push(stats);
    }
    Ok(Trained { curve, schedulers })
}

/// Schedulers for evaluation: learned policies are restored from
/// `checkpoints` (one per server) and run greedily without learning.
pub fn eval_schedulers(
    world: &WorldConfig,
    agent: &AgentConfig,
    policy: PolicyKind,
    checkpoints: Option<&[Checkpoint]>,
) -> Result<Vec<Scheduler>> {
    if !policy.tag.is_learned() {
        return build_schedulers(policy, agent, world, 0);
    }
    let rule = policy.tag.target_rule().expect("learned policy");
    let ckpts = checkpoints.ok_or_else(|| Error::InvalidCall(format!("`{}` needs checkpoints", policy.tag.as_str())))?;
    if ckpts.len() != world.num_servers() {
        return Err(Error::Checkpoint(format!(
            "{} checkpoints for {} servers",
            ckpts.len(),
            world.num_servers()
        )));
    }
    ckpts
        .iter()
        .map(|c| {
            if c.num_terminals != world.num_terminals {
                return Err(Error::Checkpoint(format!(
                    "checkpoint trained for {} terminals, world has {}",
                    c.num_terminals, world.num_terminals
                )));
            }
            let mut a = Agent::from_checkpoint(agent.clone(), rule, c.clone(), 0)?;
            a.set_learning(false);
            Ok(Scheduler::Learned(Box::new(a)))
        })
        .collect()
}

/// Run one episode and return its slot logs.
pub fn run_episode(world: &WorldConfig, agent: &AgentConfig, policy: PolicyKind, checkpoints: Option<&[Checkpoint]>) -> Result<Vec<SlotLog>> {
    let schedulers = eval_schedulers(world, agent, policy, checkpoints)?;
    World::new(world.clone(), schedulers, agent.base_reward, policy.tag == PolicyTag::LocalOnly)?.run()
}

/// Importance metric of `runs` evaluation episodes with distinct seeds.
pub fn evaluate(
    world: &WorldConfig,
    agent: &AgentConfig,
    policy: PolicyKind,
    checkpoints: Option<&[Checkpoint]>,
    runs: u64,
    seed: u64,
) -> Result<Vec<f64>> {
    (0..runs)
        .map(|k| {
            let cfg = WorldConfig {
                seed: eval_world_seed(seed, k),
                ..world.clone()
            };
            let logs = run_episode(&cfg, agent, policy, checkpoints)?;
            Ok(importance_metric(&logs, cfg.total_slots))
        })
        .collect()
}

/// Mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Mean loss over the first and last `fraction` of the episodes. Episodes
/// without training steps are skipped.
pub fn window_means(curve: &[EpisodeStats], fraction: f64) -> (f64, f64) {
    let w = ((curve.len() as f64 * fraction).round() as usize).max(1).min(curve.len());
    let mean = |s: &[EpisodeStats]| {
        let v: Vec<f64> = s.iter().filter_map(|e| e.mean_loss).collect();
        if v.is_empty() {
            f64::NAN
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    };
    (mean(&curve[..w]), mean(&curve[curve.len() - w..]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> (WorldConfig, AgentConfig) {
        let world = WorldConfig {
            num_terminals: 3,
            total_slots: 20,
            ..WorldConfig::default()
        };
        let agent = AgentConfig {
            hidden_layers: vec![8],
            batch_size: 8,
            buffer_capacity: 30,
            ..AgentConfig::default()
        };
        (world, agent)
    }

    #[test]
    fn training_is_reproducible() {
        let (world, agent) = tiny();
        let a = train(&world, &agent, PolicyTag::RDdqn, 4, 3).unwrap();
        let b = train(&world, &agent, PolicyTag::RDdqn, 4, 3).unwrap();
        assert_eq!(a.curve, b.curve);
        assert_eq!(a.checkpoints(), b.checkpoints());
        // 3 servers x 20 slots per episode; the buffer of 30 fills mid-episode 2.
        assert!(a.curve[0].mean_loss.is_none());
        assert!(a.curve[3].mean_loss.is_some());
    }

    #[test]
    fn baselines_cannot_be_trained() {
        let (world, agent) = tiny();
        assert!(train(&world, &agent, PolicyTag::Exhaustive, 1, 0).is_err());
    }

    #[test]
    fn checkpoints_restore_greedy_agents() {
        let (world, agent) = tiny();
        let t = train(&world, &agent, PolicyTag::Dqn, 3, 1).unwrap();
        let ck = t.checkpoints();
        let a = evaluate(&world, &agent, PolicyKind::new(PolicyTag::Dqn), Some(&ck), 3, 5).unwrap();
        let b = evaluate(&world, &agent, PolicyKind::new(PolicyTag::Dqn), Some(&ck), 3, 5).unwrap();
        assert_eq!(a, b);
        assert!(evaluate(&world, &agent, PolicyKind::new(PolicyTag::Dqn), None, 1, 5).is_err());
        let wrong = WorldConfig { num_terminals: 4, ..world };
        assert!(evaluate(&wrong, &agent, PolicyKind::new(PolicyTag::Dqn), Some(&ck), 1, 5).is_err());
    }

    #[test]
    fn statistics() {
        assert_eq!(mean_std(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!((m, s), (2.0, 1.0));
        let curve: Vec<EpisodeStats> = [None, Some(4.0), Some(2.0), Some(1.0)]
            .iter()
            .enumerate()
            .map(|(i, &l)| EpisodeStats { episode: i as u64 + 1, mean_loss: l, epsilon: 1.0 })
            .collect();
        assert_eq!(window_means(&curve, 0.5), (4.0, 1.5));
    }
}
