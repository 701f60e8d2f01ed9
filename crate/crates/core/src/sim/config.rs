use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{RadioParams, ServerProfile, TerminalProfile};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Arena {
    pub width_m: f64,
    pub height_m: f64,
}

impl Arena {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        (0.0..=self.width_m).contains(&x) && (0.0..=self.height_m).contains(&y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerSite {
    pub x_m: f64,
    pub y_m: f64,
    pub profile: ServerProfile,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskGenConfig {
    /// Probability that a terminal generates a task in a slot.
    pub gen_prob: f64,
    pub size_min_bits: f64,
    pub size_max_bits: f64,
    /// Priorities are drawn uniformly from the integers in this range.
    pub priority_min: u32,
    pub priority_max: u32,
}

impl Default for TaskGenConfig {
    fn default() -> Self {
        Self {
            gen_prob: 0.6,
            size_min_bits: 2e5,
            size_max_bits: 2e6,
            priority_min: 1,
            priority_max: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorldConfig {
    pub num_terminals: usize,
    pub total_slots: u64,
    pub slot_s: f64,
    pub arena: Arena,
    pub servers: Vec<ServerSite>,
    pub terminal: TerminalProfile,
    pub radio: RadioParams,
    /// Weight of delay against energy in the offloading benefit.
    pub lambda: f64,
    /// Benefit weight per unit of `speed / speed_ref_mps` in the server score.
    pub alpha0: f64,
    pub speed_ref_mps: f64,
    /// Speed is drawn uniformly from this range at every slot.
    pub speed_min_mps: f64,
    pub speed_max_mps: f64,
    pub tasks: TaskGenConfig,
    pub seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        let server = |x_m: f64| ServerSite {
            x_m,
            y_m: 200.0,
            profile: ServerProfile {
                cpu_hz: 1e10,
                bits_per_cycle: 3e-3,
                coverage_radius_m: 200.0,
            },
        };
        Self {
            num_terminals: 10,
            total_slots: 200,
            slot_s: 0.1,
            arena: Arena {
                width_m: 600.0,
                height_m: 400.0,
            },
            servers: vec![server(150.0), server(300.0), server(450.0)],
            terminal: TerminalProfile {
                cpu_hz: 1e9,
                bits_per_cycle: 2e-3,
                p_comp: 0.9,
                p_idle: 0.1,
                p_tran: 0.5,
            },
            radio: RadioParams::default(),
            lambda: 0.5,
            alpha0: 0.1,
            speed_ref_mps: 1.0,
            speed_min_mps: 5.0,
            speed_max_mps: 20.0,
            tasks: TaskGenConfig::default(),
            seed: 0,
        }
    }
}

impl WorldConfig {
    pub fn num_servers(&self) -> usize {
        self.servers.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, why: String| Err(Error::config(format!("world.{field}"), why));
        if self.num_terminals == 0 {
            return bad("num_terminals", "must be >= 1".into());
        }
        if self.servers.is_empty() {
            return bad("servers", "need at least one server".into());
        }
        if self.total_slots == 0 {
            return bad("total_slots", "must be >= 1".into());
        }
        if !(self.slot_s > 0.0) {
            return bad("slot_s", format!("must be > 0, got {}", self.slot_s));
        }
        if !(self.arena.width_m > 0.0 && self.arena.height_m > 0.0) {
            return bad("arena", "dimensions must be > 0".into());
        }
        for (i, s) in self.servers.iter().enumerate() {
            if !self.arena.contains(s.x_m, s.y_m) {
                return bad(&format!("servers[{i}]"), "position outside the arena".into());
            }
            s.profile
                .validate()
                .map_err(|e| Error::config(format!("world.servers[{i}].profile"), e.to_string()))?;
        }
        self.terminal
            .validate()
            .map_err(|e| Error::config("world.terminal", e.to_string()))?;
        self.radio.validate().map_err(|e| Error::config("world.radio", e.to_string()))?;
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad("lambda", format!("must lie in [0, 1], got {}", self.lambda));
        }
        if !(self.alpha0 >= 0.0) {
            return bad("alpha0", format!("must be >= 0, got {}", self.alpha0));
        }
        if !(self.speed_ref_mps > 0.0) {
            return bad("speed_ref_mps", "must be > 0".into());
        }
        if !(self.speed_min_mps >= 0.0 && self.speed_max_mps >= self.speed_min_mps) {
            return bad("speed_min_mps", "need 0 <= speed_min_mps <= speed_max_mps".into());
        }
        let t = &self.tasks;
        if !(0.0..=1.0).contains(&t.gen_prob) {
            return bad("tasks.gen_prob", format!("must lie in [0, 1], got {}", t.gen_prob));
        }
        if !(t.size_min_bits > 0.0 && t.size_max_bits >= t.size_min_bits) {
            return bad("tasks.size_min_bits", "need 0 < size_min_bits <= size_max_bits".into());
        }
        if t.priority_min == 0 || t.priority_max < t.priority_min {
            return bad("tasks.priority_min", "need 1 <= priority_min <= priority_max".into());
        }
        Ok(())
    }

    /// Same world with every terminal moving at exactly `speed`.
    pub fn with_speed(&self, speed: f64) -> Self {
        Self {
            speed_min_mps: speed,
            speed_max_mps: speed,
            ..self.clone()
        }
    }
}
