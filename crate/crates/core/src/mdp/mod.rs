//! Finite Markov decision processes and their forward solvers.

mod solve;

pub use solve::{
    bellman_backup, boltzmann_probs, greedy_policy, policy_evaluation, q_from_values,
    sample_trajectory, value_iteration, value_iteration_from, Policy, QFunction, ValueFunction,
    ValueIterationOutcome,
};

pub(crate) use solve::softmax;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub(crate) const STOCHASTIC_TOL: f64 = 1e-9;

/// Layout of a reward array attached to an [`Mdp`].
///
/// Per-state-action rewards are stored action-major: the block for action 0
/// over all states, then the block for action 1, and so on. Index
/// `a * num_states + s`.
#[derive(Debug, Clone, PartialEq)]
pub enum Reward {
    PerState(Vec<f64>),
    PerStateAction(Vec<f64>),
}

impl Reward {
    pub fn values(&self) -> &[f64] {
        match self {
            Reward::PerState(v) | Reward::PerStateAction(v) => v,
        }
    }

    /// Reward collected when taking `action` in `state`.
    #[inline]
    pub fn at(&self, num_states: usize, state: usize, action: usize) -> f64 {
        match self {
            Reward::PerState(v) => v[state],
            Reward::PerStateAction(v) => v[action * num_states + state],
        }
    }
}

/// A finite MDP: per-action row-stochastic transition matrices, a discount,
/// an initial-state distribution and an optional reward.
///
/// An optional terminal state marks an absorbing state whose entry ends a
/// sampled trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    num_states: usize,
    num_actions: usize,
    // transitions[a][s * num_states + s']
    transitions: Vec<Vec<f64>>,
    successors: Vec<Vec<(usize, f64)>>,
    discount: f64,
    initial: Vec<f64>,
    reward: Option<Reward>,
    terminal: Option<usize>,
}

impl Mdp {
    /// Build an MDP from `transitions[action][state][next_state]`.
    pub fn new(transitions: Vec<Vec<Vec<f64>>>, discount: f64, initial: Vec<f64>) -> Result<Self> {
        let num_actions = transitions.len();
        if num_actions == 0 {
            return Err(Error::validation("MDP needs at least one action"));
        }
        let num_states = transitions[0].len();
        if num_states == 0 {
            return Err(Error::validation("MDP needs at least one state"));
        }
        if !(0.0..1.0).contains(&discount) {
            return Err(Error::validation(format!("discount {discount} outside [0, 1)")));
        }
        if initial.len() != num_states {
            return Err(Error::dimension("initial distribution", num_states, initial.len()));
        }
        check_distribution(&initial, "initial distribution")?;

        let mut flat = Vec::with_capacity(num_actions);
        let mut successors = Vec::with_capacity(num_actions * num_states);
        for (a, matrix) in transitions.into_iter().enumerate() {
            if matrix.len() != num_states {
                return Err(Error::dimension("transition rows", num_states, matrix.len()));
            }
            let mut dense = Vec::with_capacity(num_states * num_states);
            for (s, row) in matrix.into_iter().enumerate() {
                if row.len() != num_states {
                    return Err(Error::dimension("transition columns", num_states, row.len()));
                }
                check_distribution(&row, &format!("row P_{a}({s}, .)"))?;
                successors.push(
                    row.iter()
                        .enumerate()
                        .filter(|(_, &p)| p > 0.0)
                        .map(|(j, &p)| (j, p))
                        .collect(),
                );
                dense.extend(row);
            }
            flat.push(dense);
        }

        Ok(Mdp {
            num_states,
            num_actions,
            transitions: flat,
            successors,
            discount,
            initial,
            reward: None,
            terminal: None,
        })
    }

    pub fn with_reward(mut self, reward: Reward) -> Result<Self> {
        self.set_reward(reward)?;
        Ok(self)
    }

    pub fn set_reward(&mut self, reward: Reward) -> Result<()> {
        let expected = match reward {
            Reward::PerState(_) => self.num_states,
            Reward::PerStateAction(_) => self.num_states * self.num_actions,
        };
        if reward.values().len() != expected {
            return Err(Error::dimension("reward", expected, reward.values().len()));
        }
        if reward.values().iter().any(|r| !r.is_finite()) {
            return Err(Error::validation("reward entries must be finite"));
        }
        self.reward = Some(reward);
        Ok(())
    }

    pub fn without_reward(&self) -> Self {
        Mdp {
            reward: None,
            ..self.clone()
        }
    }

    pub fn with_terminal(mut self, state: usize) -> Result<Self> {
        if state >= self.num_states {
            return Err(Error::validation(format!("terminal state {state} out of range")));
        }
        self.terminal = Some(state);
        Ok(self)
    }

    pub fn with_initial(mut self, initial: Vec<f64>) -> Result<Self> {
        if initial.len() != self.num_states {
            return Err(Error::dimension("initial distribution", self.num_states, initial.len()));
        }
        check_distribution(&initial, "initial distribution")?;
        self.initial = initial;
        Ok(self)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn initial_distribution(&self) -> &[f64] {
        &self.initial
    }

    pub fn reward(&self) -> Option<&Reward> {
        self.reward.as_ref()
    }

    pub fn terminal(&self) -> Option<usize> {
        self.terminal
    }

    /// `P_a(s, s')`.
    #[inline]
    pub fn prob(&self, action: usize, state: usize, next: usize) -> f64 {
        self.transitions[action][state * self.num_states + next]
    }

    /// Dense row `P_a(s, .)`.
    pub fn row(&self, action: usize, state: usize) -> &[f64] {
        let n = self.num_states;
        &self.transitions[action][state * n..(state + 1) * n]
    }

    /// Nonzero entries of `P_a(s, .)` in increasing next-state order.
    #[inline]
    pub fn successors(&self, action: usize, state: usize) -> &[(usize, f64)] {
        &self.successors[action * self.num_states + state]
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&MdpDocument::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: MdpDocument = serde_json::from_str(text)?;
        doc.try_into()
    }
}

fn check_distribution(p: &[f64], what: &str) -> Result<()> {
    if p.iter().any(|&x| !x.is_finite() || x < 0.0) {
        return Err(Error::validation(format!("{what} has a negative or non-finite entry")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::validation(format!("{what} sums to {total}, not 1")));
    }
    Ok(())
}

/// On-disk form of an [`Mdp`]. Field names are part of the file format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MdpDocument {
    pub num_states: usize,
    pub num_actions: usize,
    pub gamma: f64,
    /// `transitions[action][row][col]`
    pub transitions: Vec<Vec<Vec<f64>>>,
    /// Length `num_states` (per state) or `num_states * num_actions`
    /// (per state-action, action-major).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward: Option<Vec<f64>>,
    pub initial_distribution: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminal_state: Option<usize>,
}

impl From<&Mdp> for MdpDocument {
    fn from(mdp: &Mdp) -> Self {
        let n = mdp.num_states;
        MdpDocument {
            num_states: n,
            num_actions: mdp.num_actions,
            gamma: mdp.discount,
            transitions: mdp
                .transitions
                .iter()
                .map(|dense| dense.chunks(n).map(<[f64]>::to_vec).collect())
                .collect(),
            reward: mdp.reward.as_ref().map(|r| r.values().to_vec()),
            initial_distribution: mdp.initial.clone(),
            terminal_state: mdp.terminal,
        }
    }
}

impl TryFrom<MdpDocument> for Mdp {
    type Error = Error;

    fn try_from(doc: MdpDocument) -> Result<Self> {
        if doc.transitions.len() != doc.num_actions {
            return Err(Error::dimension("num_actions", doc.num_actions, doc.transitions.len()));
        }
        if doc.transitions.first().map(Vec::len) != Some(doc.num_states) {
            return Err(Error::validation("transition matrices do not match num_states"));
        }
        let mut mdp = Mdp::new(doc.transitions, doc.gamma, doc.initial_distribution)?;
        if let Some(values) = doc.reward {
            let reward = if values.len() == doc.num_states {
                Reward::PerState(values)
            } else {
                Reward::PerStateAction(values)
            };
            mdp.set_reward(reward)?;
        }
        if let Some(t) = doc.terminal_state {
            mdp = mdp.with_terminal(t)?;
        }
        Ok(mdp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> Mdp {
        Mdp::new(
            vec![vec![vec![0.0, 1.0], vec![0.0, 1.0]]],
            0.5,
            vec![1.0, 0.0],
        )
        .unwrap()
    }

    #[test]
    fn rejects_non_stochastic_rows() {
        let err = Mdp::new(vec![vec![vec![0.5, 0.4], vec![0.0, 1.0]]], 0.9, vec![1.0, 0.0]);
        assert!(matches!(err, Err(Error::Validation(_))));
        let err = Mdp::new(vec![vec![vec![1.5, -0.5], vec![0.0, 1.0]]], 0.9, vec![1.0, 0.0]);
        assert!(matches!(err, Err(Error::Validation(_))));
    }

    #[test]
    fn rejects_bad_discount_and_initial() {
        let t = vec![vec![vec![1.0]]];
        assert!(Mdp::new(t.clone(), 1.0, vec![1.0]).is_err());
        assert!(Mdp::new(t.clone(), -0.1, vec![1.0]).is_err());
        assert!(Mdp::new(t, 0.9, vec![0.5]).is_err());
    }

    #[test]
    fn reward_length_checked() {
        assert!(chain().with_reward(Reward::PerState(vec![0.0; 3])).is_err());
        assert!(chain().with_reward(Reward::PerStateAction(vec![0.0; 2])).is_ok());
    }

    #[test]
    fn successor_lists_skip_zeros() {
        let mdp = chain();
        assert_eq!(mdp.successors(0, 0), &[(1, 1.0)]);
        assert_eq!(mdp.row(0, 1), &[0.0, 1.0]);
    }

    #[test]
    fn json_uses_fixed_field_names() {
        let mdp = chain().with_reward(Reward::PerState(vec![0.0, 1.0])).unwrap();
        let json = mdp.to_json().unwrap();
        assert_eq!(
            json,
            r#"{"num_states":2,"num_actions":1,"gamma":0.5,"transitions":[[[0.0,1.0],[0.0,1.0]]],"reward":[0.0,1.0],"initial_distribution":[1.0,0.0]}"#
        );
        assert_eq!(Mdp::from_json(&json).unwrap(), mdp);
    }

    #[test]
    fn json_without_reward_round_trips() {
        let mdp = chain().with_terminal(1).unwrap();
        let back = Mdp::from_json(&mdp.to_json().unwrap()).unwrap();
        assert_eq!(back, mdp);
        assert!(back.reward().is_none());
    }
}
