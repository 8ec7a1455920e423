//! Reward recovery from observation sets under a shared MDP skeleton.
//!
//! Three engines are provided: [`gpirl_fit`] (Gaussian-process reward prior
//! with a preference likelihood and Laplace-evidence hyperparameter search),
//! [`mlirl_fit`] (Boltzmann-likelihood MAP by gradient ascent) and
//! [`proj_fit`] (feature-expectation matching by projection).
//! [`infer_rewards`] runs one engine over a cohort.
//!
//! Any reward attached to the problem MDP is ignored.

mod gpirl;
mod kernel;
mod mlirl;
mod preferences;
mod probit;
mod proj;

pub use gpirl::{gpirl_fit, GpirlFit, GpirlObjective, GpirlOptions};
pub use kernel::{se_kernel_matrix, squared_distances, GpHyper};
pub use mlirl::{mlirl_fit, MlirlFit, MlirlObjective, MlirlOptions};
pub use preferences::{build_preferences, Preference, PreferenceSet};
pub use proj::{policy_feature_expectation, proj_fit, ProjFit, ProjOptions};

use serde::{Deserialize, Serialize};

use crate::agents::{AgentRecord, ObservationSet};
use crate::features::{Basis, FeatureSource, FeatureVector};
use crate::mdp::{Mdp, Reward};
use crate::{Error, Execution, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardLayout {
    #[default]
    PerState,
    /// Action-major blocks `r_{a_1}, …, r_{a_m}`, each of length `|S|`.
    PerStateAction,
}

impl RewardLayout {
    pub fn len(self, num_states: usize, num_actions: usize) -> usize {
        match self {
            RewardLayout::PerState => num_states,
            RewardLayout::PerStateAction => num_states * num_actions,
        }
    }

    /// Column names for CSV export.
    pub fn header(self, num_states: usize, num_actions: usize) -> Vec<String> {
        match self {
            RewardLayout::PerState => (0..num_states).map(|s| format!("r_s{s}")).collect(),
            RewardLayout::PerStateAction => (0..num_actions)
                .flat_map(|a| (0..num_states).map(move |s| format!("r_a{a}_s{s}")))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardVector {
    pub layout: RewardLayout,
    pub values: Vec<f64>,
}

impl RewardVector {
    pub fn to_feature(&self) -> FeatureVector {
        FeatureVector {
            values: self.values.clone(),
            source: FeatureSource::Reward,
        }
    }

    pub fn to_reward(&self) -> Reward {
        match self.layout {
            RewardLayout::PerState => Reward::PerState(self.values.clone()),
            RewardLayout::PerStateAction => Reward::PerStateAction(self.values.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RewardPrior {
    /// Non-informative.
    None,
    Gaussian { mean: f64, std: f64 },
    Gp(GpHyper),
}

#[derive(Debug, Clone)]
pub struct IrlProblem<'a> {
    pub mdp: &'a Mdp,
    pub observations: &'a ObservationSet,
    pub prior: RewardPrior,
}

impl<'a> IrlProblem<'a> {
    pub fn new(mdp: &'a Mdp, observations: &'a ObservationSet, prior: RewardPrior) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::validation("IRL needs at least one trajectory"));
        }
        observations.validate(mdp.num_states(), mdp.num_actions())?;
        if let RewardPrior::Gaussian { std, .. } = prior {
            if !(std > 0.0) {
                return Err(Error::validation("prior std must be positive"));
            }
        }
        Ok(IrlProblem {
            mdp,
            observations,
            prior,
        })
    }
}

/// Per-agent optimizer report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub iterations: usize,
    pub objective: f64,
    pub gradient_norm: f64,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub enum Engine {
    Gpirl {
        options: GpirlOptions,
        init_hyper: GpHyper,
        /// Kernel embedding, one coordinate vector per state.
        coordinates: Vec<Vec<f64>>,
    },
    Mlirl {
        options: MlirlOptions,
        prior: RewardPrior,
    },
    Proj {
        options: ProjOptions,
        basis: Basis,
    },
}

impl Engine {
    pub fn name(&self) -> &'static str {
        match self {
            Engine::Gpirl { .. } => "GPIRL",
            Engine::Mlirl { .. } => "MLIRL",
            Engine::Proj { .. } => "PROJ",
        }
    }

    /// Run on one observation set.
    pub fn fit(&self, mdp: &Mdp, observations: &ObservationSet) -> Result<(RewardVector, Diagnostics)> {
        match self {
            Engine::Gpirl {
                options,
                init_hyper,
                coordinates,
            } => {
                let problem = IrlProblem::new(mdp, observations, RewardPrior::Gp(init_hyper.clone()))?;
                let fit = gpirl_fit(&problem, coordinates, init_hyper, options)?;
                Ok((fit.reward, fit.diagnostics))
            }
            Engine::Mlirl { options, prior } => {
                let problem = IrlProblem::new(mdp, observations, prior.clone())?;
                let fit = mlirl_fit(&problem, options)?;
                Ok((fit.reward, fit.diagnostics))
            }
            Engine::Proj { options, basis } => {
                let problem = IrlProblem::new(mdp, observations, RewardPrior::None)?;
                let fit = proj_fit(&problem, basis, options)?;
                let diagnostics = Diagnostics {
                    iterations: fit.margins.len() - 1,
                    objective: *fit.margins.last().expect("margin trace is never empty"),
                    gradient_norm: f64::NAN,
                    converged: fit.converged,
                };
                Ok((fit.reward, diagnostics))
            }
        }
    }
}

#[derive(Debug)]
pub struct AgentReward {
    pub agent_id: usize,
    pub outcome: Result<(FeatureVector, Diagnostics)>,
}

/// One reward vector per agent, in cohort order. Failures stay attached to
/// their agent id.
pub fn infer_rewards(cohort: &[AgentRecord], engine: &Engine, mdp: &Mdp, exec: Execution) -> Vec<AgentReward> {
    exec.map(cohort, |_, record| AgentReward {
        agent_id: record.agent_id,
        outcome: engine
            .fit(mdp, &record.observations)
            .map(|(r, d)| (r.to_feature(), d)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{Provenance, Trajectory};
    use crate::env::{build_gridworld, GridWorldSpec};

    fn record(id: usize, steps: &[(usize, usize)]) -> AgentRecord {
        AgentRecord {
            agent_id: id,
            label: Some(0),
            provenance: Provenance {
                source: "test".into(),
                base_parameter: None,
                parameter: None,
            },
            observations: ObservationSet::new(vec![Trajectory { steps: steps.to_vec() }]),
        }
    }

    fn small_grid() -> (GridWorldSpec, Mdp) {
        let spec = GridWorldSpec {
            width: 4,
            height: 4,
            ..GridWorldSpec::default()
        };
        let mdp = build_gridworld(&spec).unwrap();
        (spec, mdp)
    }

    #[test]
    fn empty_cohort() {
        let (_, mdp) = small_grid();
        let engine = Engine::Proj {
            options: ProjOptions::default(),
            basis: Basis::indicator(16),
        };
        assert!(infer_rewards(&[], &engine, &mdp, Execution::Sequential).is_empty());
    }

    #[test]
    fn identical_observations_give_identical_rewards() {
        let (spec, mdp) = small_grid();
        let engine = Engine::Gpirl {
            options: GpirlOptions::default(),
            init_hyper: GpHyper::uniform(5, 0.5, 0.1),
            coordinates: spec.coordinates(),
        };
        let steps = [(0, 2), (1, 2), (2, 1), (6, 1)];
        let cohort = vec![record(0, &steps), record(1, &steps), record(2, &[(0, 1), (4, 1)])];
        let out = infer_rewards(&cohort, &engine, &mdp, Execution::Parallel);
        assert_eq!(out.len(), 3);
        let r: Vec<_> = out.iter().map(|o| o.outcome.as_ref().unwrap().0.clone()).collect();
        assert_eq!(r[0], r[1]);
        assert_eq!(r[0].values.len(), 16 * 5);
        assert_ne!(r[0], r[2]);
        let seq = infer_rewards(&cohort, &engine, &mdp, Execution::Sequential);
        assert_eq!(seq[2].outcome.as_ref().unwrap().0, r[2]);
    }

    #[test]
    fn failures_are_attached_to_agents() {
        let (_, mdp) = small_grid();
        let engine = Engine::Mlirl {
            options: MlirlOptions::default(),
            prior: RewardPrior::Gaussian { mean: 0.0, std: 1.0 },
        };
        let cohort = vec![record(7, &[(99, 0)])];
        let out = infer_rewards(&cohort, &engine, &mdp, Execution::Sequential);
        assert_eq!(out[0].agent_id, 7);
        assert!(matches!(out[0].outcome, Err(Error::Validation(_))));
    }

    #[test]
    fn layout_headers() {
        assert_eq!(RewardLayout::PerState.header(2, 3), vec!["r_s0", "r_s1"]);
        let h = RewardLayout::PerStateAction.header(2, 2);
        assert_eq!(h, vec!["r_a0_s0", "r_a0_s1", "r_a1_s0", "r_a1_s1"]);
        assert_eq!(RewardLayout::PerStateAction.len(3, 5), 15);
    }
}
