use serde::{Deserialize, Serialize};

use super::{AgentRecord, ObservationSet, Provenance};
use crate::env::{gridworld_reward, Destination, GridWorldSpec};
use crate::mdp::{greedy_policy, q_from_values, sample_trajectory, value_iteration, Mdp, Reward};
use crate::seed;
use crate::{Error, Execution, Result};

/// Ground-truth reward of one group of GridWorld agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridGroup {
    pub destinations: Vec<Destination>,
    /// Std of the i.i.d. per-state reward noise applied to each agent.
    pub noise_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridCohortSpec {
    pub agents_per_group: usize,
    pub trajectory_length: usize,
    pub trajectories_per_agent: usize,
    /// `(row, col)` of the start cell shared by every trajectory.
    pub start: (usize, usize),
    pub solver_tolerance: f64,
}

impl Default for GridCohortSpec {
    fn default() -> Self {
        GridCohortSpec {
            agents_per_group: 200,
            trajectory_length: 6,
            trajectories_per_agent: 4,
            start: (0, 0),
            solver_tolerance: 1e-8,
        }
    }
}

/// Simulate MDP-optimal agents: for each agent draw a noisy copy of its
/// group's reward, solve for the greedy optimal policy and sample
/// fixed-length trajectories from the start cell. Labels are group indices.
pub fn simulate_gridworld_cohort(
    spec: &GridWorldSpec,
    mdp: &Mdp,
    groups: &[GridGroup],
    cohort: &GridCohortSpec,
    master_seed: u64,
    exec: Execution,
) -> Result<Vec<AgentRecord>> {
    if cohort.agents_per_group == 0 || cohort.trajectory_length == 0 || cohort.trajectories_per_agent == 0 {
        return Err(Error::validation("cohort sizes must be positive"));
    }
    if mdp.num_states() != spec.num_states() {
        return Err(Error::dimension("gridworld MDP", spec.num_states(), mdp.num_states()));
    }
    let (row, col) = cohort.start;
    if row >= spec.height || col >= spec.width {
        return Err(Error::validation("start cell outside the grid"));
    }
    let start = spec.state(row, col);
    let plan: Vec<usize> = (0..groups.len())
        .flat_map(|g| std::iter::repeat_n(g, cohort.agents_per_group))
        .collect();

    exec.map(&plan, |agent_id, &label| {
        let group = &groups[label];
        let mut rng = seed::rng_at(master_seed, &[agent_id as u64]);
        let reward = gridworld_reward(spec, &group.destinations, group.noise_std, &mut rng)?;
        let solved = mdp.without_reward().with_reward(Reward::PerState(reward))?;
        let values = value_iteration(&solved, cohort.solver_tolerance, 100_000)?.values;
        let policy = greedy_policy(&q_from_values(&solved, &values)?);
        let trajectories = (0..cohort.trajectories_per_agent)
            .map(|_| sample_trajectory(&solved, &policy, start, cohort.trajectory_length, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(AgentRecord {
            agent_id,
            label: Some(label),
            provenance: Provenance {
                source: format!("gridworld/group{label}"),
                base_parameter: None,
                parameter: None,
            },
            observations: ObservationSet::new(trajectories),
        })
    })
    .into_iter()
    .collect()
}
