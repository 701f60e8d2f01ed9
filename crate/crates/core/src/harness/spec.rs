use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::{PolicyKind, PolicyTag};
use crate::error::{Error, Result};
use crate::scheduler::{AgentConfig, MAX_TERMINALS};
use crate::sim::WorldConfig;

pub const SPEC_VERSION: u32 = 1;

/// Swept axis of a `compare` or `sweep-hyper` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Sweep {
    Terminals(Vec<usize>),
    Speeds(Vec<f64>),
    LearningRate(Vec<f64>),
    BatchSize(Vec<usize>),
}

impl Sweep {
    pub fn name(&self) -> &'static str {
        match self {
            Sweep::Terminals(_) => "terminals",
            Sweep::Speeds(_) => "speeds",
            Sweep::LearningRate(_) => "learning_rate",
            Sweep::BatchSize(_) => "batch_size",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Sweep::Terminals(v) | Sweep::BatchSize(v) => v.len(),
            Sweep::Speeds(v) | Sweep::LearningRate(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Values rendered the way they appear in CSV output.
    pub fn labels(&self) -> Vec<String> {
        match self {
            Sweep::Terminals(v) | Sweep::BatchSize(v) => v.iter().map(ToString::to_string).collect(),
            Sweep::Speeds(v) | Sweep::LearningRate(v) => v.iter().map(ToString::to_string).collect(),
        }
    }
}

fn default_episodes() -> u64 {
    200
}

fn default_eval_seeds() -> u64 {
    10
}

fn default_policy() -> PolicyKind {
    PolicyKind::new(PolicyTag::RDdqn)
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// One experiment, loaded from a versioned JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub version: u32,
    #[serde(default)]
    pub world: WorldConfig,
    #[serde(default)]
    pub agent: AgentConfig,
    #[serde(default = "default_policy")]
    pub policy: PolicyKind,
    #[serde(default = "default_episodes")]
    pub episodes: u64,
    /// Evaluation episodes (one per seed) per sweep point in `compare`.
    #[serde(default = "default_eval_seeds")]
    pub eval_seeds: u64,
    #[serde(default)]
    pub sweep: Option<Sweep>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Where `compare` and `evaluate` look for trained checkpoints; defaults
    /// to `output`.
    #[serde(default)]
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            version: SPEC_VERSION,
            world: WorldConfig::default(),
            agent: AgentConfig::default(),
            policy: default_policy(),
            episodes: default_episodes(),
            eval_seeds: default_eval_seeds(),
            sweep: None,
            output: default_output(),
            checkpoint_dir: None,
        }
    }
}

impl ExperimentSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let spec: ExperimentSpec = serde_json::from_str(&text)
            .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != SPEC_VERSION {
            return Err(Error::config(
                "version",
                format!("unsupported version {}, expected {SPEC_VERSION}", self.version),
            ));
        }
        self.world.validate()?;
        self.agent.validate()?;
        self.policy.validate()?;
        if self.eval_seeds == 0 {
            return Err(Error::config("eval_seeds", "must be >= 1"));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.is_empty() {
                return Err(Error::config(format!("sweep.{}", sweep.name()), "list must not be empty"));
            }
            let bad = |why: String| Err(Error::config(format!("sweep.{}", sweep.name()), why));
            match sweep {
                Sweep::Terminals(v) => {
                    if let Some(m) = v.iter().find(|&&m| m == 0 || m > MAX_TERMINALS) {
                        return bad(format!("terminal count {m} outside 1..={MAX_TERMINALS}"));
                    }
                }
                Sweep::Speeds(v) => {
                    if let Some(s) = v.iter().find(|&&s| !(s >= 0.0)) {
                        return bad(format!("speed {s} must be >= 0"));
                    }
                }
                Sweep::LearningRate(v) => {
                    if let Some(lr) = v.iter().find(|&&lr| !(lr > 0.0)) {
                        return bad(format!("learning rate {lr} must be > 0"));
                    }
                }
                Sweep::BatchSize(v) => {
                    if let Some(b) = v.iter().find(|&&b| b == 0 || b > self.agent.buffer_capacity) {
                        return bad(format!("batch size {b} outside 1..={}", self.agent.buffer_capacity));
                    }
                }
            }
        }
        if self.world.num_terminals > MAX_TERMINALS {
            return Err(Error::config(
                "world.num_terminals",
                format!("at most {MAX_TERMINALS} terminals are supported"),
            ));
        }
        Ok(())
    }

    /// SHA-256 of the spec's canonical JSON form. Output locations are left
    /// out, so the same experiment hashes the same wherever it writes.
    pub fn config_hash(&self) -> String {
        let content = ExperimentSpec {
            output: PathBuf::new(),
            checkpoint_dir: None,
            ..self.clone()
        };
        let canonical = serde_json::to_vec(&content).expect("spec serializes");
        Sha256::digest(&canonical).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn checkpoint_dir(&self) -> &Path {
        self.checkpoint_dir.as_deref().unwrap_or(&self.output)
    }

    /// Terminal counts this spec trains or evaluates for.
    pub fn terminal_counts(&self) -> Vec<usize> {
        match &self.sweep {
            Some(Sweep::Terminals(v)) => v.clone(),
            _ => vec![self.world.num_terminals],
        }
    }
}

/// `<dir>/<policy>_m<M>_server<n>.ckpt`
pub fn checkpoint_path(dir: &Path, policy: PolicyTag, num_terminals: usize, server: usize) -> PathBuf {
    dir.join(format!("{}_m{num_terminals}_server{server}.ckpt", policy.as_str()))
}
