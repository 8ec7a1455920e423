use serde::{Deserialize, Serialize};

use crate::mdp::Mdp;
use crate::{Error, Result};

pub const REJECT: usize = 0;
pub const ACCEPT: usize = 1;

/// How the accept action is encoded in the transition model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AcceptEncoding {
    /// Accepting moves to the absorbing terminal state.
    #[default]
    Terminal,
    /// Accepting keeps the process at the current state.
    SelfLoop,
}

/// Secretary problem with `num_applicants` interviewees.
///
/// State `i` (0-based) means "the applicant at position `i + 1` is a
/// candidate", i.e. the best seen so far. State `num_applicants` is an
/// absorbing terminal state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SecretarySpec {
    pub num_applicants: usize,
    pub discount: f64,
    pub accept_encoding: AcceptEncoding,
}

impl Default for SecretarySpec {
    fn default() -> Self {
        SecretarySpec {
            num_applicants: 20,
            discount: 0.95,
            accept_encoding: AcceptEncoding::Terminal,
        }
    }
}

impl SecretarySpec {
    pub fn num_states(&self) -> usize {
        self.num_applicants + 1
    }

    pub fn terminal(&self) -> usize {
        self.num_applicants
    }

    /// Scalar position embedding; the terminal sits one step past the end.
    pub fn coordinates(&self) -> Vec<Vec<f64>> {
        (1..=self.num_states()).map(|p| vec![p as f64]).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_applicants < 2 {
            return Err(Error::validation("secretary problem needs at least 2 applicants"));
        }
        Ok(())
    }
}

/// Exact reject-kernel entry as a fraction `(numerator, denominator)`.
///
/// From the candidate at 1-based position `from`, the next candidate appears
/// at position `to > from` with probability `from / (to (to - 1))`; with
/// `to = None` (no later candidate) the remaining mass `from / n` goes to the
/// terminal state.
pub fn reject_transition(from: usize, to: Option<usize>, num_applicants: usize) -> (u64, u64) {
    match to {
        Some(j) if j > from && j <= num_applicants => (from as u64, (j * (j - 1)) as u64),
        Some(_) => (0, 1),
        None => (from as u64, num_applicants as u64),
    }
}

pub fn build_secretary_mdp(spec: &SecretarySpec) -> Result<Mdp> {
    spec.validate()?;
    let x = spec.num_applicants;
    let n = spec.num_states();
    let terminal = spec.terminal();
    let frac = |(num, den): (u64, u64)| num as f64 / den as f64;

    let mut reject = vec![vec![0.0; n]; n];
    let mut accept = vec![vec![0.0; n]; n];
    for i in 0..x {
        let pos = i + 1;
        for j in pos + 1..=x {
            reject[i][j - 1] = frac(reject_transition(pos, Some(j), x));
        }
        reject[i][terminal] = frac(reject_transition(pos, None, x));
        match spec.accept_encoding {
            AcceptEncoding::Terminal => accept[i][terminal] = 1.0,
            AcceptEncoding::SelfLoop => accept[i][i] = 1.0,
        }
    }
    reject[terminal][terminal] = 1.0;
    accept[terminal][terminal] = 1.0;

    let mut initial = vec![0.0; n];
    initial[0] = 1.0;
    Mdp::new(vec![reject, accept], spec.discount, initial)?.with_terminal(terminal)
}
