use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use mecsim::baselines::{PolicyKind, PolicyTag};
use mecsim::harness::{self, ExperimentSpec};

#[derive(Parser)]
#[command(name = "mecsim", version, about = "Edge offloading simulator and scheduler experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment spec (JSON).
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Policy tag: r_ddqn, dqn, exhaustive, accept_all, local_only.
    #[arg(long)]
    policy: Option<PolicyTag>,
    /// Output directory, overriding the spec.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Look-ahead depth of the exhaustive baseline.
    #[arg(long)]
    depth: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Train learned schedulers; writes a loss CSV and per-server checkpoints.
    Train(Common),
    /// Evaluate policies over a terminal-count or speed sweep.
    Compare(Common),
    /// Train once per learning rate or batch size and write the loss curves.
    SweepHyper(Common),
    /// Run one episode and write the slot log and summary CSV.
    Evaluate(Common),
}

fn load(c: &Common) -> Result<ExperimentSpec> {
    let mut spec = ExperimentSpec::load(&c.config).with_context(|| format!("loading {}", c.config.display()))?;
    if let Some(tag) = c.policy {
        spec.policy.tag = tag;
    }
    if let Some(depth) = c.depth {
        spec.policy.depth = depth;
    }
    if let Some(out) = &c.out {
        spec.output = out.clone();
    }
    spec.validate()?;
    Ok(spec)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let outputs = match &cli.command {
        Command::Train(c) => harness::cmd_train(&load(c)?, c.seed)?,
        Command::Compare(c) => {
            let spec = load(c)?;
            let policies = match c.policy {
                Some(PolicyTag::Exhaustive) => vec![PolicyKind::exhaustive(spec.policy.depth)],
                Some(tag) => vec![PolicyKind::new(tag)],
                None => harness::default_compare_policies(&spec),
            };
            harness::cmd_compare(&spec, c.seed, &policies)?
        }
        Command::SweepHyper(c) => harness::cmd_sweep_hyper(&load(c)?, c.seed)?,
        Command::Evaluate(c) => harness::cmd_evaluate(&load(c)?, c.seed)?,
    };
    for f in outputs.files {
        println!("{}", f.display());
    }
    Ok(())
}
