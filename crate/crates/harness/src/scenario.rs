//! Environments and labeled populations derived from a config.

use bpr_core::agents::{
    simulate_gridworld_cohort, simulate_secretary_cohort, AgentRecord, GridCohortSpec, GridGroup, HeuristicRule,
    RuleKind, SecretaryGroup,
};
use bpr_core::env::{build_gridworld, build_secretary_mdp};
use bpr_core::features::Basis;
use bpr_core::irl::{Engine, GpHyper, ProjOptions};
use bpr_core::mdp::Mdp;
use bpr_core::{seed, Execution};

use crate::config::{ExperimentConfig, ExperimentKind, Method};

/// The shared decision model all agents of an experiment are fitted under.
#[derive(Debug, Clone)]
pub struct World {
    pub mdp: Mdp,
    pub coordinates: Vec<Vec<f64>>,
    /// Basis for feature expectations and PROJ.
    pub basis: Basis,
    /// Pairs encoded by feature trajectories.
    pub ft_horizon: usize,
    /// Finite horizon for PROJ policy feature expectations, if any.
    pub proj_horizon: Option<usize>,
}

impl World {
    pub fn new(config: &ExperimentConfig) -> bpr_core::Result<Self> {
        if config.kind.is_gridworld() {
            let g = &config.gridworld;
            let len = g.cohort.trajectory_length;
            Ok(World {
                mdp: build_gridworld(&g.env)?,
                coordinates: g.env.coordinates(),
                basis: Basis::indicator(g.env.num_states()),
                ft_horizon: len,
                proj_horizon: config.irl.proj.horizon.or(Some(len)),
            })
        } else {
            let s = &config.secretary.env;
            Ok(World {
                mdp: build_secretary_mdp(s)?,
                coordinates: s.coordinates(),
                // The terminal state carries no feature.
                basis: Basis::indicator(s.num_applicants),
                ft_horizon: s.num_applicants,
                proj_horizon: config.irl.proj.horizon,
            })
        }
    }

    pub fn discount(&self) -> f64 {
        self.mdp.discount()
    }

    pub fn engine(&self, method: Method, config: &ExperimentConfig) -> Option<Engine> {
        let irl = &config.irl;
        match method {
            Method::Gpirl => Some(Engine::Gpirl {
                options: irl.gpirl.clone(),
                init_hyper: GpHyper::uniform(self.mdp.num_actions(), irl.gp_init_kappa, irl.gp_init_sigma),
                coordinates: self.coordinates.clone(),
            }),
            Method::Mlirl => Some(Engine::Mlirl {
                options: irl.mlirl.clone(),
                prior: bpr_core::irl::RewardPrior::None,
            }),
            Method::Proj => Some(Engine::Proj {
                options: ProjOptions {
                    horizon: self.proj_horizon,
                    ..irl.proj.clone()
                },
                basis: self.basis.clone(),
            }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Population {
    Grid(Vec<GridGroup>),
    Secretary(Vec<SecretaryGroup>),
}

/// One independently simulated population. Most experiments have a single
/// scenario; the within-rule experiment has one per rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub population: Population,
}

impl Scenario {
    pub fn num_groups(&self) -> usize {
        match &self.population {
            Population::Grid(g) => g.len(),
            Population::Secretary(g) => g.len(),
        }
    }

    /// Simulate the replication's cohort with `config.max_sweep()`
    /// trajectories per agent. The stream depends only on the master seed,
    /// the scenario name and the replication.
    pub fn simulate(
        &self,
        config: &ExperimentConfig,
        world: &World,
        replication: usize,
        exec: Execution,
    ) -> bpr_core::Result<Vec<AgentRecord>> {
        let cohort_seed = seed::derive(config.seed, &[seed::tag(&self.name), replication as u64]);
        match &self.population {
            Population::Grid(groups) => {
                let spec = GridCohortSpec {
                    trajectories_per_agent: config.max_sweep(),
                    ..config.gridworld.cohort.clone()
                };
                simulate_gridworld_cohort(&config.gridworld.env, &world.mdp, groups, &spec, cohort_seed, exec)
            }
            Population::Secretary(groups) => {
                simulate_secretary_cohort(groups, config.max_sweep(), &config.secretary.env, cohort_seed, exec)
            }
        }
    }
}

pub fn scenarios(config: &ExperimentConfig) -> Vec<Scenario> {
    let sec = &config.secretary;
    let group = |kind: RuleKind, parameter: f64| SecretaryGroup {
        rule: HeuristicRule { kind, parameter },
        count: sec.agents_per_group,
        param_noise_std: sec.param_noise_std,
    };
    let single = |population| {
        vec![Scenario {
            name: config.kind.name().to_string(),
            population,
        }]
    };
    match config.kind {
        ExperimentKind::GridworldCluster | ExperimentKind::GridworldClassify => {
            single(Population::Grid(config.gridworld.groups.clone()))
        }
        ExperimentKind::SecretaryAcrossRules => single(Population::Secretary(
            [RuleKind::Cr, RuleKind::Snccr, RuleKind::Ccr]
                .iter()
                .map(|&k| group(k, sec.across_rules_parameter))
                .collect(),
        )),
        ExperimentKind::SecretaryCrVsRandom => single(Population::Secretary(vec![
            group(RuleKind::Cr, sec.cr_vs_random_cutoff),
            group(RuleKind::Random, 0.0),
        ])),
        ExperimentKind::SecretaryWithinRule => sec
            .within_rules
            .iter()
            .map(|&rule| Scenario {
                name: format!("{}-{}", config.kind.name(), rule.name()),
                population: Population::Secretary(sec.parameters(rule).iter().map(|&p| group(rule, p)).collect()),
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Profile;

    #[test]
    fn scenario_shapes() {
        let c = ExperimentConfig::preset(ExperimentKind::SecretaryWithinRule, Profile::Desk);
        let s = scenarios(&c);
        assert_eq!(s.len(), 3);
        assert_eq!(s[0].name, "secretary-within-rule-CR");
        assert!(s.iter().all(|x| x.num_groups() == 3));
        let c = ExperimentConfig::preset(ExperimentKind::SecretaryCrVsRandom, Profile::Desk);
        assert_eq!(scenarios(&c)[0].num_groups(), 2);
    }

    #[test]
    fn cohorts_do_not_depend_on_methods() {
        let mut c = ExperimentConfig::preset(ExperimentKind::SecretaryAcrossRules, Profile::Desk);
        c.secretary.agents_per_group = 3;
        let w = World::new(&c).unwrap();
        let s = &scenarios(&c)[0];
        let a = s.simulate(&c, &w, 1, Execution::Sequential).unwrap();
        c.methods.push(Method::Mlirl);
        let b = s.simulate(&c, &w, 1, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, s.simulate(&c, &w, 2, Execution::Sequential).unwrap());
    }
}
