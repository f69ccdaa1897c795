//! Joint edge/cloud partitioning and per-layer channel pruning for
//! convolutional networks.
//!
//! A hierarchical agent first picks the layer boundary where inference
//! moves from the edge device to the cloud, then an option-specific actor
//! picks a pruning rate for every conv layer. Plans are scored by the
//! reciprocal of end-to-end latency, gated by an accuracy floor.

pub mod agent;
pub mod brute;
pub mod cli;
pub mod config;
pub mod env;
pub mod error;
pub mod graph;
pub mod nn;
pub mod oracle;
pub mod perf;
pub mod rng;

pub use error::{Error, Result};
