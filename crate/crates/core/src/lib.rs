//! Regret-minimizing allocation of seed users to advertisers under a
//! topic-aware independent-cascade model with click-through probabilities.

pub mod alloc;
pub mod error;
pub mod fixtures;
pub mod graph;
pub mod harness;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod sampling;

pub use error::{Error, Result};
