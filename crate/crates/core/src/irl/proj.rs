use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{IrlProblem, RewardLayout, RewardVector};
use crate::features::{feature_expectation, Basis};
use crate::mdp::{greedy_policy, q_from_values, value_iteration, Mdp, Policy, Reward};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProjOptions {
    pub epsilon: f64,
    pub max_iters: usize,
    /// Truncate policy feature expectations after this many steps, to match
    /// fixed-length observed trajectories. `None` is the infinite sum.
    pub horizon: Option<usize>,
    pub solver_tolerance: f64,
}

impl Default for ProjOptions {
    fn default() -> Self {
        ProjOptions {
            epsilon: 1e-3,
            max_iters: 50,
            horizon: None,
            solver_tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProjFit {
    pub weights: Vec<f64>,
    /// `R(s) = ωᵀφ(s)`.
    pub reward: RewardVector,
    /// `‖μ_E - μ̄‖` before the first update and after each one.
    pub margins: Vec<f64>,
    pub converged: bool,
}

/// Discounted feature expectation of `policy` from the MDP's initial
/// distribution, computed exactly. The terminal state, if any, contributes
/// nothing, matching trajectories that stop on entering it.
pub fn policy_feature_expectation(mdp: &Mdp, policy: &Policy, basis: &Basis, horizon: Option<usize>) -> Result<Vec<f64>> {
    let n = mdp.num_states();
    if policy.num_states() != n {
        return Err(Error::dimension("policy", n, policy.num_states()));
    }
    policy.validate(mdp.num_actions())?;
    let gamma = mdp.discount();
    let step = |p: &[f64]| {
        let mut next = vec![0.0; n];
        for (s, &ps) in p.iter().enumerate() {
            if ps == 0.0 || Some(s) == mdp.terminal() {
                continue;
            }
            for a in 0..mdp.num_actions() {
                let pa = policy.prob(s, a);
                if pa > 0.0 {
                    for &(j, pr) in mdp.successors(a, s) {
                        next[j] += ps * pa * pr;
                    }
                }
            }
        }
        next
    };
    let occupancy: Vec<f64> = match horizon {
        Some(h) => {
            let mut d = vec![0.0; n];
            let mut p = mdp.initial_distribution().to_vec();
            let mut w = 1.0;
            for _ in 0..h {
                d.iter_mut().zip(&p).for_each(|(o, x)| *o += w * x);
                p = step(&p);
                w *= gamma;
            }
            d
        }
        None => {
            // (I - γ P_πᵀ) d = p0, with the terminal's outflow removed.
            let mut system = DMatrix::<f64>::identity(n, n);
            for s in 0..n {
                let mut unit = vec![0.0; n];
                unit[s] = 1.0;
                for (j, x) in step(&unit).into_iter().enumerate() {
                    system[(j, s)] -= gamma * x;
                }
            }
            let d = system
                .lu()
                .solve(&DVector::from_column_slice(mdp.initial_distribution()))
                .ok_or_else(|| Error::Numerical("singular visitation system".into()))?;
            d.iter().copied().collect()
        }
    };
    let mut mu = vec![0.0; basis.dim()];
    for (s, &w) in occupancy.iter().enumerate() {
        if Some(s) != mdp.terminal() {
            basis.accumulate(s, w, &mut mu);
        }
    }
    Ok(mu)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn state_reward(basis: &Basis, weights: &[f64], n: usize) -> Vec<f64> {
    (0..n).map(|s| dot(&basis.eval(s), weights)).collect()
}

fn optimal_policy(mdp: &Mdp, reward: Vec<f64>, tol: f64) -> Result<Policy> {
    let solved = mdp.without_reward().with_reward(Reward::PerState(reward))?;
    let v = value_iteration(&solved, tol, 100_000)?;
    Ok(greedy_policy(&q_from_values(&solved, &v.values)?))
}

/// Projection-style apprenticeship learning: find `ω` such that the optimal
/// policies for `R = ωᵀφ` mix to the observed feature expectation.
pub fn proj_fit(problem: &IrlProblem<'_>, basis: &Basis, opts: &ProjOptions) -> Result<ProjFit> {
    if !(opts.epsilon >= 0.0) || !(opts.solver_tolerance > 0.0) {
        return Err(Error::validation("epsilon must be nonnegative and solver tolerance positive"));
    }
    let mdp = problem.mdp;
    let n = mdp.num_states();
    let expert = feature_expectation(problem.observations, basis, mdp.discount())?.values;

    let start = optimal_policy(mdp, vec![0.0; n], opts.solver_tolerance)?;
    let mut mixture = policy_feature_expectation(mdp, &start, basis, opts.horizon)?;
    let residual = |mix: &[f64]| -> Vec<f64> { expert.iter().zip(mix).map(|(e, m)| e - m).collect() };
    let mut weights = residual(&mixture);
    let mut margins = vec![dot(&weights, &weights).sqrt()];
    let mut converged = margins[0] <= opts.epsilon;
    for _ in 0..opts.max_iters {
        if converged {
            break;
        }
        let policy = optimal_policy(mdp, state_reward(basis, &weights, n), opts.solver_tolerance)?;
        let mu = policy_feature_expectation(mdp, &policy, basis, opts.horizon)?;
        let dir: Vec<f64> = mu.iter().zip(&mixture).map(|(a, b)| a - b).collect();
        let denom = dot(&dir, &dir);
        if denom > 0.0 {
            let lambda = (dot(&dir, &weights) / denom).clamp(0.0, 1.0);
            mixture.iter_mut().zip(&dir).for_each(|(m, d)| *m += lambda * d);
        }
        weights = residual(&mixture);
        let margin = dot(&weights, &weights).sqrt();
        margins.push(margin);
        converged = margin <= opts.epsilon;
        if denom == 0.0 {
            // the new policy adds nothing; further iterations would repeat it
            break;
        }
    }
    Ok(ProjFit {
        reward: RewardVector {
            layout: RewardLayout::PerState,
            values: state_reward(basis, &weights, n),
        },
        weights,
        margins,
        converged,
    })
}
