//! Behavior pattern recognition in MDP reward space.
//!
//! Agents are observed only through their state-action trajectories. Each
//! agent's observation set is mapped to a reward vector by inverse
//! reinforcement learning under a shared MDP model, and agents are then
//! clustered or classified in that reward space. Action-space baselines
//! (feature trajectories and feature expectations) are provided for
//! comparison.
//!
//! Module map:
//!
//! - [`mdp`]: finite MDPs, value iteration, Q-values, greedy and Boltzmann
//!   policies, trajectory sampling.
//! - [`env`]: the stochastic GridWorld and the secretary-problem MDP.
//! - [`agents`]: trajectories, observation sets and cohort simulation.
//! - [`features`]: feature-trajectory, feature-expectation and PCA baselines.
//! - [`irl`]: GPIRL, MLIRL and projection-based reward recovery.
//! - [`pattern`]: k-means, NMI, clustering accuracy, classifiers and
//!   cross-validation.
//!
//! Data-parallel loops (per-agent inference, cohort simulation, CV
//! replications) go through [`Execution`]. With the `parallel` feature
//! (default) [`Execution::Parallel`] uses rayon; without it every strategy
//! runs sequentially and produces identical results.

pub mod agents;
pub mod env;
mod error;
mod exec;
pub mod features;
pub mod irl;
pub mod mdp;
pub mod pattern;
pub mod seed;

pub use error::{Error, Result};
pub use exec::Execution;

/// Crate version, recorded in experiment provenance.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
