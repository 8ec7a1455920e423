use std::collections::BTreeMap;

use crate::agents::ObservationSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preference {
    /// `better ≻_state worse`
    Strict { state: usize, better: usize, worse: usize },
    /// `first ∼_state second`, with `first < second`
    Equivalent { state: usize, first: usize, second: usize },
}

impl Preference {
    pub fn state(&self) -> usize {
        match *self {
            Preference::Strict { state, .. } | Preference::Equivalent { state, .. } => state,
        }
    }

    /// The action pair whose Q-gap the relation constrains.
    pub fn actions(&self) -> (usize, usize) {
        match *self {
            Preference::Strict { better, worse, .. } => (better, worse),
            Preference::Equivalent { first, second, .. } => (first, second),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PreferenceSet {
    pub relations: Vec<Preference>,
}

impl PreferenceSet {
    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    pub fn strict(&self) -> impl Iterator<Item = &Preference> {
        self.relations.iter().filter(|p| matches!(p, Preference::Strict { .. }))
    }

    pub fn equivalent(&self) -> impl Iterator<Item = &Preference> {
        self.relations.iter().filter(|p| matches!(p, Preference::Equivalent { .. }))
    }
}

/// Observed action sets per state, in state order.
pub(crate) fn observed_actions(obs: &ObservationSet, num_actions: usize) -> BTreeMap<usize, Vec<usize>> {
    let mut seen: BTreeMap<usize, Vec<bool>> = BTreeMap::new();
    for (s, a) in obs.pairs() {
        seen.entry(s).or_insert_with(|| vec![false; num_actions])[a] = true;
    }
    seen.into_iter()
        .map(|(s, flags)| (s, (0..num_actions).filter(|&a| flags[a]).collect()))
        .collect()
}

/// Every observed action is strictly preferred to every unobserved action at
/// the same state; co-observed actions are pairwise equivalent. States are
/// visited in increasing order, strict pairs before equivalences.
pub fn build_preferences(obs: &ObservationSet, num_actions: usize) -> PreferenceSet {
    let mut relations = Vec::new();
    for (state, chosen) in observed_actions(obs, num_actions) {
        for &better in &chosen {
            for worse in (0..num_actions).filter(|a| !chosen.contains(a)) {
                relations.push(Preference::Strict { state, better, worse });
            }
        }
        for (i, &first) in chosen.iter().enumerate() {
            for &second in &chosen[i + 1..] {
                relations.push(Preference::Equivalent { state, first, second });
            }
        }
    }
    PreferenceSet { relations }
}

/// Empirical action frequencies at observed states, uniform elsewhere.
pub(crate) fn empirical_policy(obs: &ObservationSet, num_states: usize, num_actions: usize) -> Vec<Vec<f64>> {
    let mut counts = vec![vec![0.0; num_actions]; num_states];
    for (s, a) in obs.pairs() {
        counts[s][a] += 1.0;
    }
    counts
        .into_iter()
        .map(|row| {
            let total: f64 = row.iter().sum();
            if total > 0.0 {
                row.iter().map(|c| c / total).collect()
            } else {
                vec![1.0 / num_actions as f64; num_actions]
            }
        })
        .collect()
}
