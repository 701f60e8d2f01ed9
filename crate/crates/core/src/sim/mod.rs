//! Slotted multi-terminal, multi-server simulation.

mod config;
mod log;
mod mobility;
mod world;

pub use config::{Arena, ServerSite, TaskGenConfig, WorldConfig};
pub use log::{
    importance_metric, write_ndjson, write_summary_csv, Completion, DecisionRecord, ServerSlot, SlotEvent, SlotLog,
    TerminalSlot,
};
pub use mobility::{channel_gain, step_mobility, Heading, Kinematics};
pub use world::{build_schedulers, derive_seed, BitLedger, Scheduler, ServerState, TerminalState, Upload, World};
