//! Benchmark decision problems.

mod gridworld;
mod secretary;

pub use gridworld::{
    build_gridworld, gridworld_reward, Destination, GridAction, GridWorldSpec,
};
pub use secretary::{
    build_secretary_mdp, reject_transition, AcceptEncoding, SecretarySpec, ACCEPT, REJECT,
};
