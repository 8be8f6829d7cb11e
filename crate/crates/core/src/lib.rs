//! Multi-objective deep Q-learning benchmark toolkit.
//!
//! Vector-reward DQN agents with linear and thresholded-lexicographic
//! scalarization, Deep Sea Treasure and multi-objective mountain-car
//! environments, exact hypervolume, and single, sequential and parallel
//! multi-policy training.

pub mod agent;
pub mod cli;
pub mod config;
pub mod csvio;
pub mod envs;
pub mod error;
pub mod metrics;
pub mod net;
pub mod oracle;
pub mod replay;
pub mod scalarize;
pub mod trainer;

pub use error::{Error, Result};
