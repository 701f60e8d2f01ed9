use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::run::{eval_world_seed, evaluate, mean_std, run_episode, train, EpisodeStats};
use super::spec::{checkpoint_path, ExperimentSpec, Sweep};
use crate::baselines::{PolicyKind, PolicyTag};
use crate::error::{Error, Result};
use crate::scheduler::{read_checkpoint, write_checkpoint, AgentConfig, Checkpoint};
use crate::sim::{write_ndjson, write_summary_csv, WorldConfig};

/// Paths written by a command.
#[derive(Debug, Clone, PartialEq)]
pub struct Outputs {
    pub files: Vec<PathBuf>,
}

fn comment(spec: &ExperimentSpec, seed: u64) -> String {
    format!("# config_hash={} seed={seed}\n", spec.config_hash())
}

fn fmt_loss(l: Option<f64>) -> String {
    l.map_or_else(String::new, |v| v.to_string())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, bytes)?;
    Ok(())
}

fn loss_csv(spec: &ExperimentSpec, seed: u64, first_col: Option<&str>, rows: &[(Option<String>, &[EpisodeStats])]) -> Result<Vec<u8>> {
    let mut buf = comment(spec, seed).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let mut header: Vec<&str> = first_col.into_iter().collect();
        header.extend(["episode", "mean_loss", "epsilon"]);
        w.write_record(&header)?;
        for (label, curve) in rows {
            for e in curve.iter() {
                let mut rec: Vec<String> = label.iter().cloned().collect();
                rec.extend([e.episode.to_string(), fmt_loss(e.mean_loss), e.epsilon.to_string()]);
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
    }
    Ok(buf)
}

fn world_for(spec: &ExperimentSpec, num_terminals: usize) -> WorldConfig {
    WorldConfig {
        num_terminals,
        ..spec.world.clone()
    }
}

fn learned_tag(spec: &ExperimentSpec) -> Result<PolicyTag> {
    if spec.policy.tag.is_learned() {
        Ok(spec.policy.tag)
    } else {
        Err(Error::config(
            "policy",
            format!("`{}` has nothing to train", spec.policy.tag.as_str()),
        ))
    }
}

/// Train `spec.policy` for every terminal count in the spec. Writes one loss
/// CSV and one checkpoint per server for each count.
pub fn cmd_train(spec: &ExperimentSpec, seed: u64) -> Result<Outputs> {
    spec.validate()?;
    let tag = learned_tag(spec)?;
    let mut files = Vec::new();
    for m in spec.terminal_counts() {
        let trained = train(&world_for(spec, m), &spec.agent, tag, spec.episodes, seed)?;
        let csv_path = spec.output.join(format!("{}_m{m}_loss.csv", tag.as_str()));
        write_file(&csv_path, &loss_csv(spec, seed, None, &[(None, &trained.curve)])?)?;
        files.push(csv_path);
        for (n, ckpt) in trained.checkpoints().iter().enumerate() {
            let path = checkpoint_path(&spec.output, tag, m, n);
            let mut w = BufWriter::new(File::create(&path)?);
            write_checkpoint(&mut w, ckpt)?;
            w.flush()?;
            files.push(path);
        }
    }
    Ok(Outputs { files })
}

/// Load one checkpoint per server for `tag` at `num_terminals` terminals.
pub fn load_checkpoints(dir: &Path, tag: PolicyTag, num_terminals: usize, num_servers: usize) -> Result<Vec<Checkpoint>> {
    (0..num_servers)
        .map(|n| {
            let path = checkpoint_path(dir, tag, num_terminals, n);
            let file = File::open(&path).map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound => Error::MissingCheckpoint(path.clone()),
                _ => Error::Io(e),
            })?;
            read_checkpoint(std::io::BufReader::new(file))
        })
        .collect()
}

fn eval_inputs(
    spec: &ExperimentSpec,
    world: &WorldConfig,
    policy: PolicyKind,
) -> Result<Option<Vec<Checkpoint>>> {
    if policy.tag.is_learned() {
        load_checkpoints(spec.checkpoint_dir(), policy.tag, world.num_terminals, world.num_servers()).map(Some)
    } else {
        Ok(None)
    }
}

/// The policies compared by default: both learned schedulers and the
/// exhaustive search at the spec's depth.
pub fn default_compare_policies(spec: &ExperimentSpec) -> Vec<PolicyKind> {
    vec![
        PolicyKind::new(PolicyTag::RDdqn),
        PolicyKind::new(PolicyTag::Dqn),
        PolicyKind::exhaustive(spec.policy.depth),
    ]
}

/// Evaluate `policies` at every sweep point over `spec.eval_seeds` seeds.
pub fn cmd_compare(spec: &ExperimentSpec, seed: u64, policies: &[PolicyKind]) -> Result<Outputs> {
    spec.validate()?;
    let points: Vec<(String, WorldConfig)> = match &spec.sweep {
        None => vec![(spec.world.num_terminals.to_string(), spec.world.clone())],
        Some(Sweep::Terminals(v)) => v.iter().map(|&m| (m.to_string(), world_for(spec, m))).collect(),
        Some(Sweep::Speeds(v)) => v.iter().map(|&s| (s.to_string(), spec.world.with_speed(s))).collect(),
        Some(other) => {
            return Err(Error::config(
                format!("sweep.{}", other.name()),
                "compare sweeps terminals or speeds",
            ))
        }
    };
    let mut buf = comment(spec, seed).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(["sweep_value", "policy", "I_mean", "I_std", "seeds"])?;
        for (label, world) in &points {
            for &policy in policies {
                policy.validate()?;
                let ckpts = eval_inputs(spec, world, policy)?;
                let values = evaluate(world, &spec.agent, policy, ckpts.as_deref(), spec.eval_seeds, seed)?;
                let (mean, std) = mean_std(&values);
                w.write_record([
                    label.clone(),
                    policy.tag.as_str().to_string(),
                    mean.to_string(),
                    std.to_string(),
                    values.len().to_string(),
                ])?;
            }
        }
        w.flush()?;
    }
    let path = spec.output.join("compare.csv");
    write_file(&path, &buf)?;
    Ok(Outputs { files: vec![path] })
}

/// One training loss curve per learning rate or batch size, in one CSV.
pub fn cmd_sweep_hyper(spec: &ExperimentSpec, seed: u64) -> Result<Outputs> {
    spec.validate()?;
    let tag = learned_tag(spec)?;
    let sweep = spec
        .sweep
        .as_ref()
        .ok_or_else(|| Error::config("sweep", "sweep-hyper needs a learning_rate or batch_size sweep"))?;
    let agents: Vec<AgentConfig> = match sweep {
        Sweep::LearningRate(v) => v
            .iter()
            .map(|&learning_rate| AgentConfig { learning_rate, ..spec.agent.clone() })
            .collect(),
        Sweep::BatchSize(v) => v
            .iter()
            .map(|&batch_size| AgentConfig { batch_size, ..spec.agent.clone() })
            .collect(),
        other => {
            return Err(Error::config(
                format!("sweep.{}", other.name()),
                "sweep-hyper sweeps learning_rate or batch_size",
            ))
        }
    };
    let curves = agents
        .iter()
        .map(|a| train(&spec.world, a, tag, spec.episodes, seed).map(|t| t.curve))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<(Option<String>, &[EpisodeStats])> = sweep
        .labels()
        .into_iter()
        .zip(&curves)
        .map(|(l, c)| (Some(l), c.as_slice()))
        .collect();
    let path = spec.output.join(format!("sweep_{}.csv", sweep.name()));
    write_file(&path, &loss_csv(spec, seed, Some(sweep.name()), &rows)?)?;
    Ok(Outputs { files: vec![path] })
}

/// Run one episode of `spec.policy` and write its slot log and summary.
pub fn cmd_evaluate(spec: &ExperimentSpec, seed: u64) -> Result<Outputs> {
    spec.validate()?;
    let world = WorldConfig {
        seed: eval_world_seed(seed, 0),
        ..spec.world.clone()
    };
    let ckpts = eval_inputs(spec, &world, spec.policy)?;
    let logs = run_episode(&world, &spec.agent, spec.policy, ckpts.as_deref())?;
    let stem = spec.policy.tag.as_str();

    let mut ndjson = Vec::new();
    write_ndjson(&mut ndjson, &logs)?;
    let ndjson_path = spec.output.join(format!("{stem}_slots.ndjson"));
    write_file(&ndjson_path, &ndjson)?;

    let mut summary = comment(spec, seed).into_bytes();
    write_summary_csv(&mut summary, &logs)?;
    let summary_path = spec.output.join(format!("{stem}_summary.csv"));
    write_file(&summary_path, &summary)?;
    Ok(Outputs {
        files: vec![ndjson_path, summary_path],
    })
}
