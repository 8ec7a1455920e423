//! Observed agents: trajectories, observation sets, and the simulators that
//! produce labeled cohorts for both benchmarks.

mod gridworld;
mod secretary;

pub use gridworld::{simulate_gridworld_cohort, GridCohortSpec, GridGroup};
pub use secretary::{
    candidates_of, random_ranks, run_secretary_rule, selected_position, simulate_secretary_cohort,
    HeuristicRule, RuleKind, SecretaryGroup,
};

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Time-ordered `(state, action)` pairs.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Trajectory {
    pub steps: Vec<(usize, usize)>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// The set of trajectories recorded for one agent.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObservationSet {
    pub trajectories: Vec<Trajectory>,
}

impl ObservationSet {
    pub fn new(trajectories: Vec<Trajectory>) -> Self {
        ObservationSet { trajectories }
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.trajectories.iter().flat_map(|t| t.steps.iter().copied())
    }

    /// Fails if the set is empty or any trajectory is empty or out of range.
    pub fn validate(&self, num_states: usize, num_actions: usize) -> Result<()> {
        if self.is_empty() {
            return Err(Error::validation("observation set is empty"));
        }
        for t in &self.trajectories {
            if t.is_empty() {
                return Err(Error::validation("empty trajectory"));
            }
            if let Some(&(s, a)) = t.steps.iter().find(|&&(s, a)| s >= num_states || a >= num_actions) {
                return Err(Error::validation(format!("pair ({s}, {a}) out of range")));
            }
        }
        Ok(())
    }

    /// First `n` trajectories.
    pub fn truncated(&self, n: usize) -> Self {
        ObservationSet {
            trajectories: self.trajectories.iter().take(n).cloned().collect(),
        }
    }
}

/// Which generator produced an agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Rule name (`CR`, `SNCCR`, `CCR`, `RANDOM`) or GridWorld reward group.
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_parameter: Option<f64>,
    /// Parameter after perturbation and rounding.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameter: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRecord {
    pub agent_id: usize,
    pub label: Option<usize>,
    pub provenance: Provenance,
    #[serde(rename = "trajectories")]
    pub observations: ObservationSet,
}

impl AgentRecord {
    pub fn truncated(&self, n: usize) -> Self {
        AgentRecord {
            observations: self.observations.truncated(n),
            ..self.clone()
        }
    }
}

/// One JSON object per line, in cohort order.
pub fn write_cohort_jsonl<W: Write>(cohort: &[AgentRecord], mut out: W) -> Result<()> {
    for agent in cohort {
        serde_json::to_writer(&mut out, agent)?;
        out.write_all(b"\n").map_err(serde_json::Error::io)?;
    }
    Ok(())
}

pub fn read_cohort_jsonl<R: BufRead>(input: R) -> Result<Vec<AgentRecord>> {
    let mut cohort = Vec::new();
    for line in input.lines() {
        let line = line.map_err(serde_json::Error::io)?;
        if line.trim().is_empty() {
            continue;
        }
        cohort.push(serde_json::from_str(&line)?);
    }
    Ok(cohort)
}
