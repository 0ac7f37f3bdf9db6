//! Dynamic order picking in a single-block warehouse: a picking MDP with a
//! deep Q-learning agent, exact and heuristic routing, re-routing baselines
//! and a benchmark harness.

pub mod agent;
pub mod baselines;
pub mod cli;
pub mod env;
pub mod error;
pub mod harness;
pub mod nn;
pub mod orders;
pub mod routing;
pub mod warehouse;

pub use error::{Error, Result};
