use nalgebra::{DMatrix, DVector};
use rand::Rng as _;

use super::{Mdp, Reward, STOCHASTIC_TOL};
use crate::agents::Trajectory;
use crate::seed::Rng;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction {
    pub values: Vec<f64>,
}

/// State-action values, row-major by state.
#[derive(Debug, Clone, PartialEq)]
pub struct QFunction {
    num_states: usize,
    num_actions: usize,
    q: Vec<f64>,
}

impl QFunction {
    pub fn new(num_states: usize, num_actions: usize, q: Vec<f64>) -> Result<Self> {
        if q.len() != num_states * num_actions {
            return Err(Error::dimension("Q values", num_states * num_actions, q.len()));
        }
        if q.iter().any(|x| !x.is_finite()) {
            return Err(Error::validation("Q values must be finite"));
        }
        Ok(QFunction {
            num_states,
            num_actions,
            q,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let num_actions = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != num_actions) {
            return Err(Error::validation("ragged Q rows"));
        }
        Self::new(rows.len(), num_actions, rows.concat())
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.q[state * self.num_actions + action]
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.q[state * self.num_actions..(state + 1) * self.num_actions]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    /// One action per state.
    Deterministic(Vec<usize>),
    /// One probability vector over actions per state.
    Stochastic(Vec<Vec<f64>>),
}

impl Policy {
    pub fn num_states(&self) -> usize {
        match self {
            Policy::Deterministic(a) => a.len(),
            Policy::Stochastic(p) => p.len(),
        }
    }

    pub fn prob(&self, state: usize, action: usize) -> f64 {
        match self {
            Policy::Deterministic(a) => f64::from(u8::from(a[state] == action)),
            Policy::Stochastic(p) => p[state][action],
        }
    }

    pub fn validate(&self, num_actions: usize) -> Result<()> {
        match self {
            Policy::Deterministic(a) => {
                if let Some(bad) = a.iter().find(|&&x| x >= num_actions) {
                    return Err(Error::validation(format!("policy action {bad} out of range")));
                }
            }
            Policy::Stochastic(rows) => {
                for (s, row) in rows.iter().enumerate() {
                    if row.len() != num_actions {
                        return Err(Error::dimension("policy row", num_actions, row.len()));
                    }
                    let total: f64 = row.iter().sum();
                    if row.iter().any(|&p| p < 0.0) || (total - 1.0).abs() > STOCHASTIC_TOL {
                        return Err(Error::validation(format!("policy row {s} is not a distribution")));
                    }
                }
            }
        }
        Ok(())
    }

    fn sample(&self, state: usize, rng: &mut Rng) -> usize {
        match self {
            Policy::Deterministic(a) => a[state],
            Policy::Stochastic(p) => sample_index(&p[state], rng),
        }
    }
}

fn sample_index(probs: &[f64], rng: &mut Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding left u above the accumulated mass: take the last positive entry.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

fn require_reward(mdp: &Mdp) -> Result<&Reward> {
    mdp.reward()
        .ok_or_else(|| Error::Config("MDP has no reward attached".into()))
}

/// One optimal Bellman backup `(T v)(s) = max_a R(s,a) + γ Σ P_a(s,s') v(s')`.
pub fn bellman_backup(mdp: &Mdp, v: &[f64]) -> Result<Vec<f64>> {
    let reward = require_reward(mdp)?;
    if v.len() != mdp.num_states() {
        return Err(Error::dimension("value vector", mdp.num_states(), v.len()));
    }
    Ok(backup(mdp, reward, v))
}

fn backup(mdp: &Mdp, reward: &Reward, v: &[f64]) -> Vec<f64> {
    let (n, gamma) = (mdp.num_states(), mdp.discount());
    (0..n)
        .map(|s| {
            (0..mdp.num_actions())
                .map(|a| reward.at(n, s, a) + gamma * expected(mdp.successors(a, s), v))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

#[inline]
fn expected(successors: &[(usize, f64)], v: &[f64]) -> f64 {
    successors.iter().map(|&(j, p)| p * v[j]).sum()
}

#[derive(Debug, Clone)]
pub struct ValueIterationOutcome {
    pub values: ValueFunction,
    pub iterations: usize,
    /// False when `max_iters` was reached before the stopping rule fired.
    pub converged: bool,
}

/// Value iteration from `V ≡ 0`.
///
/// Stops once `γ/(1-γ) · ‖V_{k+1} - V_k‖_∞ ≤ tolerance`, which bounds the
/// distance to the optimal values by `tolerance`.
pub fn value_iteration(mdp: &Mdp, tolerance: f64, max_iters: usize) -> Result<ValueIterationOutcome> {
    value_iteration_from(mdp, vec![0.0; mdp.num_states()], tolerance, max_iters)
}

pub fn value_iteration_from(
    mdp: &Mdp,
    init: Vec<f64>,
    tolerance: f64,
    max_iters: usize,
) -> Result<ValueIterationOutcome> {
    let reward = require_reward(mdp)?;
    if !(tolerance > 0.0) {
        return Err(Error::validation("tolerance must be positive"));
    }
    if init.len() != mdp.num_states() {
        return Err(Error::dimension("initial values", mdp.num_states(), init.len()));
    }
    let gamma = mdp.discount();
    let scale = if gamma > 0.0 { gamma / (1.0 - gamma) } else { 0.0 };
    let mut v = init;
    for it in 1..=max_iters {
        let next = backup(mdp, reward, &v);
        let delta = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = next;
        if scale * delta <= tolerance {
            return Ok(ValueIterationOutcome {
                values: ValueFunction { values: v },
                iterations: it,
                converged: true,
            });
        }
    }
    Ok(ValueIterationOutcome {
        values: ValueFunction { values: v },
        iterations: max_iters,
        converged: false,
    })
}

/// `Q(s,a) = R(s,a) + γ Σ_{s'} P_a(s,s') V(s')`; per-state rewards ignore `a`.
pub fn q_from_values(mdp: &Mdp, v: &ValueFunction) -> Result<QFunction> {
    let reward = require_reward(mdp)?;
    let n = mdp.num_states();
    if v.values.len() != n {
        return Err(Error::dimension("value function", n, v.values.len()));
    }
    let m = mdp.num_actions();
    let mut q = Vec::with_capacity(n * m);
    for s in 0..n {
        for a in 0..m {
            q.push(reward.at(n, s, a) + mdp.discount() * expected(mdp.successors(a, s), &v.values));
        }
    }
    QFunction::new(n, m, q)
}

/// Row-wise argmax of `q`, lowest action index on ties.
pub fn greedy_policy(q: &QFunction) -> Policy {
    Policy::Deterministic(
        (0..q.num_states())
            .map(|s| {
                let row = q.row(s);
                let mut best = 0;
                for (a, &x) in row.iter().enumerate().skip(1) {
                    if x > row[best] {
                        best = a;
                    }
                }
                best
            })
            .collect(),
    )
}

/// `softmax(Q(s, .) / temperature)` computed with max subtraction.
pub fn boltzmann_probs(q: &QFunction, state: usize, temperature: f64) -> Vec<f64> {
    softmax(q.row(state), temperature)
}

pub(crate) fn softmax(row: &[f64], temperature: f64) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = row.iter().map(|&x| ((x - max) / temperature).exp()).collect();
    let z: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= z);
    p
}

/// Exact policy evaluation `V^π = (I - γ P_π)^{-1} r_π`.
pub fn policy_evaluation(mdp: &Mdp, policy: &Policy) -> Result<ValueFunction> {
    let reward = require_reward(mdp)?;
    let n = mdp.num_states();
    if policy.num_states() != n {
        return Err(Error::dimension("policy", n, policy.num_states()));
    }
    policy.validate(mdp.num_actions())?;
    let mut system = DMatrix::<f64>::identity(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    for s in 0..n {
        for a in 0..mdp.num_actions() {
            let pa = policy.prob(s, a);
            if pa == 0.0 {
                continue;
            }
            rhs[s] += pa * reward.at(n, s, a);
            for &(j, p) in mdp.successors(a, s) {
                system[(s, j)] -= mdp.discount() * pa * p;
            }
        }
    }
    let values = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("singular policy-evaluation system".into()))?;
    Ok(ValueFunction {
        values: values.iter().copied().collect(),
    })
}

/// Roll out `policy` for `length` steps from `start`.
///
/// Entering the MDP's terminal state ends the trajectory early; the terminal
/// state itself is not recorded.
pub fn sample_trajectory(
    mdp: &Mdp,
    policy: &Policy,
    start: usize,
    length: usize,
    rng: &mut Rng,
) -> Result<Trajectory> {
    if start >= mdp.num_states() {
        return Err(Error::validation(format!("start state {start} out of range")));
    }
    if length == 0 {
        return Err(Error::validation("trajectory length must be at least 1"));
    }
    let mut steps = Vec::with_capacity(length);
    let mut s = start;
    loop {
        let a = policy.sample(s, rng);
        steps.push((s, a));
        if steps.len() == length {
            break;
        }
        let row = mdp.successors(a, s);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut next = row.last().map_or(s, |&(j, _)| j);
        for &(j, p) in row {
            acc += p;
            if u < acc {
                next = j;
                break;
            }
        }
        if Some(next) == mdp.terminal() {
            break;
        }
        s = next;
    }
    Ok(Trajectory { steps })
}
