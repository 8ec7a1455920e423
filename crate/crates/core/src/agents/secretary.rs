use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{AgentRecord, ObservationSet, Provenance, Trajectory};
use crate::env::{SecretarySpec, ACCEPT, REJECT};
use crate::seed::{self, Rng};
use crate::{Error, Execution, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum RuleKind {
    /// Reject the first `h - 1` applicants, then take the next candidate.
    Cr,
    /// Take the first candidate preceded by at least `k` successive
    /// non-candidates since the previous candidate.
    Snccr,
    /// Take the `ℓ`-th candidate.
    Ccr,
    /// Take each candidate with probability 1/2.
    Random,
}

impl RuleKind {
    pub fn name(self) -> &'static str {
        match self {
            RuleKind::Cr => "CR",
            RuleKind::Snccr => "SNCCR",
            RuleKind::Ccr => "CCR",
            RuleKind::Random => "RANDOM",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeuristicRule {
    pub kind: RuleKind,
    #[serde(default)]
    pub parameter: f64,
}

impl HeuristicRule {
    pub fn new(kind: RuleKind, parameter: f64) -> Result<Self> {
        let rule = HeuristicRule { kind, parameter };
        rule.validate()?;
        Ok(rule)
    }

    pub fn validate(&self) -> Result<()> {
        let min = match self.kind {
            RuleKind::Cr => 1.0,
            RuleKind::Snccr | RuleKind::Ccr => 0.0,
            RuleKind::Random => return Ok(()),
        };
        if !(self.parameter >= min) {
            return Err(Error::validation(format!(
                "{} parameter {} below {min}",
                self.kind.name(),
                self.parameter
            )));
        }
        Ok(())
    }
}

/// `flag[t]` is true iff applicant `t` outranks everyone before it.
/// Ranks are a permutation of `1..=n` with 1 the best.
pub fn candidates_of(relative_ranks: &[usize]) -> Result<Vec<bool>> {
    let n = relative_ranks.len();
    let mut seen = vec![false; n];
    for &r in relative_ranks {
        if r == 0 || r > n || std::mem::replace(&mut seen[r - 1], true) {
            return Err(Error::validation("ranks are not a permutation of 1..=n"));
        }
    }
    let mut best = usize::MAX;
    Ok(relative_ranks
        .iter()
        .map(|&r| {
            let is_candidate = r < best;
            best = best.min(r);
            is_candidate
        })
        .collect())
}

pub fn random_ranks(n: usize, rng: &mut Rng) -> Vec<usize> {
    let mut ranks: Vec<usize> = (1..=n).collect();
    ranks.shuffle(rng);
    ranks
}

/// Run `rule` on one ordering of applicants.
///
/// Only candidate positions are recorded, as `(position - 1, action)`. The
/// trajectory ends with the first accept; a candidate in the final position
/// is always accepted because the last applicant must be hired.
pub fn run_secretary_rule(rule: &HeuristicRule, relative_ranks: &[usize], rng: &mut Rng) -> Result<Trajectory> {
    rule.validate()?;
    let flags = candidates_of(relative_ranks)?;
    let n = flags.len();
    let p = rule.parameter.round() as usize;
    let mut steps = Vec::new();
    let mut last_candidate = 0usize;
    let mut seen = 0usize;
    for (i, &is_candidate) in flags.iter().enumerate() {
        if !is_candidate {
            continue;
        }
        let pos = i + 1;
        seen += 1;
        let take = pos == n
            || match rule.kind {
                RuleKind::Cr => pos >= p,
                RuleKind::Snccr => pos - last_candidate - 1 >= p,
                RuleKind::Ccr => seen >= p,
                RuleKind::Random => rng.random_bool(0.5),
            };
        last_candidate = pos;
        if take {
            steps.push((i, ACCEPT));
            break;
        }
        steps.push((i, REJECT));
    }
    Ok(Trajectory { steps })
}

/// 1-based position of the hired applicant for a rule trajectory.
pub fn selected_position(trajectory: &Trajectory, num_applicants: usize) -> usize {
    match trajectory.steps.last() {
        Some(&(s, a)) if a == ACCEPT => s + 1,
        _ => num_applicants,
    }
}

/// A group of agents sharing a rule and base parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecretaryGroup {
    pub rule: HeuristicRule,
    pub count: usize,
    #[serde(default)]
    pub param_noise_std: f64,
}

/// Each agent perturbs its group's parameter once,
/// `p̂ = max(1, round(p + noise))`, then solves `trajectories_per_agent`
/// random orderings with it. Labels are group indices.
pub fn simulate_secretary_cohort(
    groups: &[SecretaryGroup],
    trajectories_per_agent: usize,
    spec: &SecretarySpec,
    master_seed: u64,
    exec: Execution,
) -> Result<Vec<AgentRecord>> {
    spec.validate()?;
    if trajectories_per_agent == 0 {
        return Err(Error::validation("need at least one trajectory per agent"));
    }
    let mut plan = Vec::new();
    for (label, g) in groups.iter().enumerate() {
        g.rule.validate()?;
        if g.count == 0 {
            return Err(Error::validation("group count must be at least 1"));
        }
        if !(g.param_noise_std >= 0.0) {
            return Err(Error::validation("parameter noise std must be nonnegative"));
        }
        plan.extend(std::iter::repeat_n(label, g.count));
    }

    exec.map(&plan, |agent_id, &label| {
        let group = &groups[label];
        let mut rng = seed::rng_at(master_seed, &[agent_id as u64]);
        let mut rule = group.rule;
        if rule.kind != RuleKind::Random {
            let noise = if group.param_noise_std > 0.0 {
                Normal::new(0.0, group.param_noise_std)
                    .expect("validated std")
                    .sample(&mut rng)
            } else {
                0.0
            };
            rule.parameter = (rule.parameter + noise).round().max(1.0);
        }
        let trajectories = (0..trajectories_per_agent)
            .map(|_| {
                let ranks = random_ranks(spec.num_applicants, &mut rng);
                run_secretary_rule(&rule, &ranks, &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(AgentRecord {
            agent_id,
            label: Some(label),
            provenance: Provenance {
                source: rule.kind.name().into(),
                base_parameter: (rule.kind != RuleKind::Random).then_some(group.rule.parameter),
                parameter: (rule.kind != RuleKind::Random).then_some(rule.parameter),
            },
            observations: ObservationSet::new(trajectories),
        })
    })
    .into_iter()
    .collect()
}
