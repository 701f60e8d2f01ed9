//! Experiment driver: spec loading and the `train`, `compare`, `sweep-hyper`
//! and `evaluate` commands.

mod commands;
mod run;
mod spec;

pub use commands::{
    cmd_compare, cmd_evaluate, cmd_sweep_hyper, cmd_train, default_compare_policies, load_checkpoints, Outputs,
};
pub use run::{
    eval_schedulers, eval_world_seed, evaluate, mean_std, run_episode, train, train_with, train_world_seed,
    window_means, EpisodeStats, Trained,
};
pub use spec::{checkpoint_path, ExperimentSpec, Sweep, SPEC_VERSION};
