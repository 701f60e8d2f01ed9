//! The slotted world: terminals, servers, and the per-slot protocol.
//!
//! Each slot runs, in order: mobility and the servers' load broadcast, task
//! generation, the terminals' offloading decisions, request scheduling at the
//! servers, then queue service (local compute, uplinks, server compute).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::WorldConfig;
use super::log::{Completion, DecisionRecord, ServerSlot, SlotEvent, SlotLog, TerminalSlot};
use super::mobility::{channel_gain, step_mobility, Heading, Kinematics};
use crate::baselines::{accept_all_schedule, exhaustive_schedule, PolicyKind, PolicyTag};
use crate::decision::{alpha_for_speed, decide, evaluate_benefit, select_server, Candidate, OffloadDecision};
use crate::error::{Error, Result};
use crate::model::{
    achievable_rate, local_cost, offload_cost, remaining_resources, BitQueue, Drained, Payload, ServerId,
    ServerProfile, TaskSpec, TerminalId, TerminalProfile,
};
use crate::scheduler::{encode_state, evaluate_action, ActionVector, Agent, AgentConfig, SchedulerState};

/// A task waiting in a terminal's offloading queue, bound for `server`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Upload {
    pub task: TaskSpec,
    pub server: ServerId,
}

impl Payload for Upload {
    fn size_bits(&self) -> f64 {
        self.task.size_bits
    }
}

/// Request scheduler run by one server.
#[derive(Debug, Clone)]
pub enum Scheduler {
    Learned(Box<Agent>),
    Exhaustive { depth: usize },
    AcceptAll,
}

impl Scheduler {
    pub fn schedule(&mut self, state: &SchedulerState, queue: &BitQueue, capacity_bits: f64, base_reward: f64) -> Result<ActionVector> {
        match self {
            Scheduler::Learned(agent) => {
                let a = agent.act(state)?;
                Ok(ActionVector::from_index(a, state.num_terminals()))
            }
            Scheduler::Exhaustive { depth } => exhaustive_schedule(state, queue, capacity_bits, *depth, base_reward),
            Scheduler::AcceptAll => Ok(accept_all_schedule(state)),
        }
    }

    fn record_reward(&mut self, reward: f64) {
        if let Scheduler::Learned(agent) = self {
            agent.record_reward(reward);
        }
    }

    fn end_episode(&mut self) {
        if let Scheduler::Learned(agent) = self {
            agent.end_episode();
        }
    }

    pub fn agent(&self) -> Option<&Agent> {
        match self {
            Scheduler::Learned(a) => Some(a),
            _ => None,
        }
    }

    pub fn agent_mut(&mut self) -> Option<&mut Agent> {
        match self {
            Scheduler::Learned(a) => Some(a),
            _ => None,
        }
    }
}

/// Fresh schedulers for every server under `policy`. Learned agents get
/// independent seeds derived from `seed`.
pub fn build_schedulers(policy: PolicyKind, agent_cfg: &AgentConfig, world: &WorldConfig, seed: u64) -> Result<Vec<Scheduler>> {
    policy.validate()?;
    (0..world.num_servers())
        .map(|n| {
            Ok(match policy.tag {
                PolicyTag::RDdqn | PolicyTag::Dqn => {
                    let rule = policy.tag.target_rule().expect("learned policy");
                    let agent = Agent::new(agent_cfg.clone(), rule, world.num_terminals, derive_seed(seed, 1000 + n as u64))?;
                    Scheduler::Learned(Box::new(agent))
                }
                PolicyTag::Exhaustive => Scheduler::Exhaustive { depth: policy.depth },
                PolicyTag::AcceptAll | PolicyTag::LocalOnly => Scheduler::AcceptAll,
            })
        })
        .collect()
}

/// SplitMix64 step, used to give every random stream its own seed.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct TerminalState {
    pub id: TerminalId,
    pub kinematics: Kinematics,
    pub profile: TerminalProfile,
    pub comp_queue: BitQueue,
    pub tran_queue: BitQueue<Upload>,
}

#[derive(Debug, Clone)]
pub struct ServerState {
    pub id: ServerId,
    pub x_m: f64,
    pub y_m: f64,
    pub profile: ServerProfile,
    pub task_queue: BitQueue,
    pub scheduler: Scheduler,
    /// Terminals that sent this server a request in the previous slot.
    pub prev_requesters: usize,
}

impl ServerState {
    fn covers(&self, k: &Kinematics) -> bool {
        k.distance_to(self.x_m, self.y_m) <= self.profile.coverage_radius_m
    }
}

/// Totals used by the bit-conservation audit.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BitLedger {
    pub generated: f64,
    pub processed: f64,
}

pub struct World {
    cfg: WorldConfig,
    base_reward: f64,
    local_only: bool,
    slot: u64,
    rng: ChaCha8Rng,
    next_task_id: u64,
    ledger: BitLedger,
    pub terminals: Vec<TerminalState>,
    pub servers: Vec<ServerState>,
}

impl World {
    /// Build a world with one scheduler per server. `local_only` forces every
    /// terminal to process its own tasks.
    pub fn new(cfg: WorldConfig, schedulers: Vec<Scheduler>, base_reward: f64, local_only: bool) -> Result<Self> {
        cfg.validate()?;
        if schedulers.len() != cfg.num_servers() {
            return Err(Error::config(
                "world.servers",
                format!("{} servers but {} schedulers", cfg.num_servers(), schedulers.len()),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let terminals = (0..cfg.num_terminals)
            .map(|id| TerminalState {
                id,
                kinematics: Kinematics {
                    x_m: rng.gen_range(0.0..=cfg.arena.width_m),
                    y_m: rng.gen_range(0.0..=cfg.arena.height_m),
                    speed_mps: 0.0,
                    heading: Heading::East,
                },
                profile: cfg.terminal,
                comp_queue: BitQueue::new(),
                tran_queue: BitQueue::new(),
            })
            .collect();
        let servers = cfg
            .servers
            .iter()
            .zip(schedulers)
            .enumerate()
            .map(|(id, (site, scheduler))| ServerState {
                id,
                x_m: site.x_m,
                y_m: site.y_m,
                profile: site.profile,
                task_queue: BitQueue::new(),
                scheduler,
                prev_requesters: 0,
            })
            .collect();
        Ok(World {
            cfg,
            base_reward,
            local_only,
            slot: 0,
            rng,
            next_task_id: 0,
            ledger: BitLedger::default(),
            terminals,
            servers,
        })
    }

    pub fn config(&self) -> &WorldConfig {
        &self.cfg
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn ledger(&self) -> BitLedger {
        self.ledger
    }

    /// Bits sitting in any queue (local, uplink, or server).
    pub fn queued_bits(&self) -> f64 {
        let terminals: f64 = self
            .terminals
            .iter()
            .map(|t| t.comp_queue.total_bits() + t.tran_queue.total_bits())
            .sum();
        terminals + self.servers.iter().map(|s| s.task_queue.total_bits()).sum::<f64>()
    }

    pub fn into_schedulers(self) -> Vec<Scheduler> {
        self.servers.into_iter().map(|s| s.scheduler).collect()
    }

    /// Run all remaining slots and close the episode.
    pub fn run(&mut self) -> Result<Vec<SlotLog>> {
        let mut logs = Vec::with_capacity(self.cfg.total_slots as usize);
        while self.slot < self.cfg.total_slots {
            logs.push(self.run_slot()?);
        }
        for s in &mut self.servers {
            s.scheduler.end_episode();
        }
        Ok(logs)
    }

    /// Advance one slot.
    pub fn run_slot(&mut self) -> Result<SlotLog> {
        if self.slot >= self.cfg.total_slots {
            return Err(Error::InvalidCall(format!("episode already ran {} slots", self.cfg.total_slots)));
        }
        self.slot += 1;
        let slot = self.slot;
        let m_count = self.cfg.num_terminals;
        let slot_s = self.cfg.slot_s;
        let mut events = Vec::new();

        // Mobility, then each server broadcasts its load.
        for t in &mut self.terminals {
            t.kinematics = step_mobility(&t.kinematics, &self.cfg, &mut self.rng);
        }
        let broadcast: Vec<(f64, f64)> = self
            .servers
            .iter()
            .map(|s| {
                let l = s.task_queue.total_bits();
                remaining_resources(&s.profile, l, slot_s).map(|rho| (l, rho))
            })
            .collect::<Result<_>>()?;

        // Task generation.
        let gen = self.cfg.tasks;
        let mut new_tasks: Vec<Option<TaskSpec>> = Vec::with_capacity(m_count);
        let mut generated_bits = 0.0;
        for m in 0..m_count {
            if self.rng.gen::<f64>() < gen.gen_prob {
                let size_bits = if gen.size_max_bits > gen.size_min_bits {
                    self.rng.gen_range(gen.size_min_bits..=gen.size_max_bits)
                } else {
                    gen.size_min_bits
                };
                let priority = f64::from(self.rng.gen_range(gen.priority_min..=gen.priority_max));
                let task = TaskSpec {
                    id: self.next_task_id,
                    size_bits,
                    priority,
                    created_slot: slot,
                    owner: m,
                };
                self.next_task_id += 1;
                generated_bits += size_bits;
                new_tasks.push(Some(task));
            } else {
                new_tasks.push(None);
            }
        }
        self.ledger.generated += generated_bits;

        // Stage one: every terminal with a new task decides against the
        // slot-start broadcast.
        let mut decisions: Vec<(TaskSpec, OffloadDecision)> = Vec::new();
        for (m, task) in new_tasks.iter().enumerate() {
            let Some(task) = *task else { continue };
            let decision = if self.local_only {
                OffloadDecision::LOCAL
            } else {
                let d = self.decide_for(m, &task, &broadcast)?;
                if d.is_none() {
                    events.push(SlotEvent::NoCoverage { terminal: m });
                }
                d.unwrap_or(OffloadDecision::LOCAL)
            };
            decisions.push((task, decision));
        }

        // Stage two: each server schedules the requests it received.
        let mut server_logs: Vec<ServerSlot> = broadcast
            .iter()
            .map(|&(l, rho)| ServerSlot {
                queue_bits: l,
                rho,
                ..ServerSlot::default()
            })
            .collect();
        let mut accepted = vec![false; decisions.len()];
        for (n, server) in self.servers.iter_mut().enumerate() {
            let requests: Vec<(usize, TaskSpec)> = decisions
                .iter()
                .filter(|(_, d)| d.chosen_server == Some(n))
                .map(|(t, _)| (t.owner, *t))
                .collect();
            server.prev_requesters = requests.len();
            let state = encode_state(&requests, broadcast[n].1, m_count)?;
            let capacity = server.profile.slot_capacity_bits(slot_s);
            let action = server.scheduler.schedule(&state, &server.task_queue, capacity, self.base_reward)?;
            for m in 0..m_count {
                if action.accepts(m) && !requests.iter().any(|&(r, _)| r == m) {
                    return Err(Error::Invariant(format!("server {n} accepted terminal {m} without a request")));
                }
            }
            let reward = evaluate_action(&state, &server.task_queue, &action, capacity, self.base_reward)?;
            server.scheduler.record_reward(reward);
            for (i, (t, d)) in decisions.iter().enumerate() {
                if d.chosen_server == Some(n) && action.accepts(t.owner) {
                    accepted[i] = true;
                }
            }
            let log = &mut server_logs[n];
            log.requests = requests.len();
            log.accepted = action.accepted_count();
            log.reward = reward;
        }

        let mut decision_log = Vec::with_capacity(decisions.len());
        for ((task, d), ok) in decisions.iter().zip(&accepted) {
            let t = &mut self.terminals[task.owner];
            match (d.chosen_server, ok) {
                (Some(server), true) => t.tran_queue.push(Upload { task: *task, server }),
                _ => t.comp_queue.push(*task),
            }
            decision_log.push(DecisionRecord {
                terminal: task.owner,
                task_id: task.id,
                offloaded: d.offloaded,
                server: d.chosen_server,
                accepted: *ok,
            });
        }

        // Local compute.
        let mut terminal_logs = Vec::with_capacity(m_count);
        for t in &mut self.terminals {
            let cap = t.profile.slot_capacity_bits(slot_s);
            let out = serve(&mut t.comp_queue, cap, |q, c| q.drain_slot(c))?;
            self.ledger.processed += out.processed.iter().map(|x| x.size_bits).sum::<f64>();
            terminal_logs.push(TerminalSlot {
                processed: out.processed.iter().map(completion).collect(),
                ..TerminalSlot::default()
            });
        }

        // Uplinks: the bandwidth of each server is split evenly between the
        // terminals currently transmitting to it.
        let reachable: Vec<Option<ServerId>> = self
            .terminals
            .iter()
            .map(|t| {
                t.tran_queue
                    .front()
                    .map(|u| u.server)
                    .filter(|&n| self.servers[n].covers(&t.kinematics))
            })
            .collect();
        let mut uploaders = vec![0usize; self.servers.len()];
        for n in reachable.iter().flatten() {
            uploaders[*n] += 1;
        }
        for (m, t) in self.terminals.iter_mut().enumerate() {
            let Some(head) = t.tran_queue.front() else { continue };
            let n = head.server;
            if reachable[m].is_none() {
                events.push(SlotEvent::UploadStalled { terminal: m, server: n });
                continue;
            }
            let server = &mut self.servers[n];
            let d = t.kinematics.distance_to(server.x_m, server.y_m);
            let rate = achievable_rate(&self.cfg.radio.shared(uploaders[n]), t.profile.p_tran, channel_gain(d, &self.cfg.radio))?;
            let sent = t.tran_queue.transmit_while(rate * slot_s, |u| u.server == n);
            for u in sent.processed {
                server.task_queue.push(u.task);
            }
        }

        // Server compute.
        for (server, log) in self.servers.iter_mut().zip(&mut server_logs) {
            let cap = server.profile.slot_capacity_bits(slot_s);
            let out = serve(&mut server.task_queue, cap, |q, c| q.drain_slot(c))?;
            self.ledger.processed += out.processed.iter().map(|x| x.size_bits).sum::<f64>();
            log.processed = out.processed.iter().map(completion).collect();
        }

        for (t, log) in self.terminals.iter().zip(&mut terminal_logs) {
            log.comp_queue_bits = t.comp_queue.total_bits();
            log.tran_queue_bits = t.tran_queue.total_bits();
        }
        self.audit()?;

        Ok(SlotLog {
            slot,
            terminals: terminal_logs,
            servers: server_logs,
            decisions: decision_log,
            events,
            generated_bits,
        })
    }

    /// Offloading decision for terminal `m`. `None` when no server covers it.
    fn decide_for(&self, m: TerminalId, task: &TaskSpec, broadcast: &[(f64, f64)]) -> Result<Option<OffloadDecision>> {
        let t = &self.terminals[m];
        let local = local_cost(&t.profile, t.comp_queue.total_bits(), task.size_bits)?;
        let next = t.kinematics.advanced(self.cfg.slot_s, &self.cfg.arena);
        let mut candidates = Vec::new();
        for (n, s) in self.servers.iter().enumerate() {
            if !s.covers(&t.kinematics) {
                continue;
            }
            let d_now = t.kinematics.distance_to(s.x_m, s.y_m);
            let radio = self.cfg.radio.shared(s.prev_requesters);
            let rate = achievable_rate(&radio, t.profile.p_tran, channel_gain(d_now, &self.cfg.radio))?;
            let offload = offload_cost(&t.profile, t.tran_queue.total_bits(), task.size_bits, rate, &s.profile, broadcast[n].0)?;
            let benefit = evaluate_benefit(local, offload, self.cfg.lambda)?;
            if decide(&benefit) {
                candidates.push(Candidate {
                    server_id: n,
                    d_now_m: d_now,
                    d_next_m: next.distance_to(s.x_m, s.y_m),
                    benefit: benefit.overall,
                });
            }
        }
        let covered = self.servers.iter().any(|s| s.covers(&t.kinematics));
        if !covered {
            return Ok(None);
        }
        let alpha = alpha_for_speed(self.cfg.alpha0, t.kinematics.speed_mps, self.cfg.speed_ref_mps);
        Ok(Some(match select_server(&candidates, alpha) {
            Some(best) => OffloadDecision::offload_to(best.server_id),
            None => OffloadDecision::LOCAL,
        }))
    }

    fn audit(&self) -> Result<()> {
        let held = self.queued_bits();
        let BitLedger { generated, processed } = self.ledger;
        if ((processed + held) - generated).abs() > 1e-9 * generated.max(1.0) {
            return Err(Error::Invariant(format!(
                "slot {}: generated {generated} bits but processed {processed} + queued {held}",
                self.slot
            )));
        }
        Ok(())
    }
}

fn completion(t: &TaskSpec) -> Completion {
    Completion {
        task_id: t.id,
        priority: t.priority,
        size_bits: t.size_bits,
    }
}

/// Serve one slot of `queue` and check the per-slot capacity bound: bits of
/// work done (whole tasks finished, less progress carried in, plus progress
/// carried out) never exceed `capacity`.
fn serve(
    queue: &mut BitQueue,
    capacity: f64,
    op: impl FnOnce(&mut BitQueue, f64) -> Drained<TaskSpec>,
) -> Result<Drained<TaskSpec>> {
    let before = queue.head_progress();
    let out = op(queue, capacity);
    let finished: f64 = out.processed.iter().map(|t| t.size_bits).sum();
    let work = finished - before + queue.head_progress();
    if work > capacity * (1.0 + 1e-12) + 1e-9 {
        return Err(Error::Invariant(format!(
            "{work} bits of work exceed slot capacity {capacity}"
        )));
    }
    if before == 0.0 && queue.head_progress() == 0.0 && finished > capacity * (1.0 + 1e-12) {
        return Err(Error::Invariant(format!(
            "completed {finished} bits with capacity {capacity}"
        )));
    }
    Ok(out)
}
