//! Evolutionary self-replication on a one-dimensional grid.
//!
//! Organisms carry a small recurrent network, live inside their own
//! reward-free episode, replicate with some probability every timestep into
//! a free neighbouring slot (with Gaussian mutation), and vanish when the
//! episode reports death. Two conventional optimizers, an evolution
//! strategy and an elitist genetic algorithm, use lifespan as fitness for
//! comparison.

pub mod baselines;
pub mod envs;
pub mod episode;
pub mod error;
pub mod genome;
pub mod harness;
pub mod policy;
pub mod rng;
pub mod world;

pub use error::{Error, Result};
pub use genome::{genome_length, mutate, new_random_genome, ActionMode, Genome, MutationConfig, PolicySpec};
pub use rng::RngStream;
