//! Mobile edge computing simulator: terminals decide whether to offload
//! tasks, and each edge server schedules the requests it receives with a
//! learned (double) deep Q-network or a baseline policy.

pub mod baselines;
pub mod decision;
pub mod error;
pub mod harness;
pub mod model;
pub mod scheduler;
pub mod sim;

pub use error::{Error, Result};
