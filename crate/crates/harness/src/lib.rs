//! Config-driven experiment runner for reward-space behavior recognition.
//!
//! An experiment simulates labeled cohorts, represents every agent by
//! action-space statistics (FT, FE, PCA projections) or by IRL reward
//! vectors (PROJ, MLIRL, GPIRL), clusters or classifies the agents and
//! reports metric means and standard deviations over replications.
//! [`pipeline::run_experiment`] runs every stage; the `bpr` binary exposes
//! the stages individually.

pub mod config;
pub mod dp;
pub mod pipeline;
pub mod report;
pub mod scenario;
pub mod table;

pub use config::{ConfigError, ExperimentConfig, ExperimentKind, Method, Overrides, Profile};
pub use dp::{secretary_dp_oracle, DpOracle};
pub use pipeline::run_experiment;
pub use report::{ExperimentReport, MetricRow};
