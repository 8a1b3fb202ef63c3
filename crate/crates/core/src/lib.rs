//! Reinforcement learning from a model-predictive expert for autonomous vessel berthing.

pub mod agents;
pub mod checkpoint;
pub mod error;
pub mod harness;
pub mod mpbe;
pub mod nn;
pub mod obs;
pub mod replay;
pub mod rlfd;
pub mod selftest;
pub mod tabular;
pub mod vessel;
pub mod world_model;

pub use error::{Error, Result};
