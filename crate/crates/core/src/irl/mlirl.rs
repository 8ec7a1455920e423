use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Diagnostics, IrlProblem, RewardLayout, RewardPrior, RewardVector};
use crate::mdp::{softmax, Mdp};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlirlOptions {
    /// Boltzmann temperature of both the likelihood and the soft backups.
    pub temperature: f64,
    pub step_size: f64,
    pub iterations: usize,
    /// Soft Bellman backups applied to the reward before scoring actions.
    pub backup_steps: usize,
    pub layout: RewardLayout,
    /// Early stop once the objective gradient norm falls below this.
    pub tol: f64,
}

impl Default for MlirlOptions {
    fn default() -> Self {
        MlirlOptions {
            temperature: 1.0,
            step_size: 0.05,
            iterations: 100,
            backup_steps: 50,
            layout: RewardLayout::PerState,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MlirlFit {
    pub reward: RewardVector,
    pub diagnostics: Diagnostics,
    /// `log p(O | r)` at the start and after every step.
    pub log_likelihood_trace: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub log_likelihood: f64,
    pub log_prior: f64,
    pub gradient: Vec<f64>,
}

impl Evaluation {
    pub fn objective(&self) -> f64 {
        self.log_likelihood + self.log_prior
    }
}

/// `log p(O | θ) + log p(θ)` with Q from soft backups of the parameterized
/// reward, and its exact gradient by forward-mode differentiation.
pub struct MlirlObjective<'a> {
    mdp: &'a Mdp,
    counts: Vec<(usize, usize, f64)>,
    prior: Option<(f64, f64)>,
    opts: MlirlOptions,
}

impl<'a> MlirlObjective<'a> {
    pub fn new(problem: &IrlProblem<'a>, opts: &MlirlOptions) -> Result<Self> {
        if !(opts.temperature > 0.0) || !(opts.step_size > 0.0) {
            return Err(Error::validation("temperature and step size must be positive"));
        }
        let prior = match problem.prior {
            RewardPrior::None => None,
            RewardPrior::Gaussian { mean, std } => Some((mean, std)),
            RewardPrior::Gp(_) => return Err(Error::validation("MLIRL takes a Gaussian or non-informative prior")),
        };
        let mut counts = BTreeMap::new();
        for pair in problem.observations.pairs() {
            *counts.entry(pair).or_insert(0.0) += 1.0;
        }
        Ok(MlirlObjective {
            mdp: problem.mdp,
            counts: counts.into_iter().map(|((s, a), c)| (s, a, c)).collect(),
            prior,
            opts: opts.clone(),
        })
    }

    pub fn dim(&self) -> usize {
        self.opts.layout.len(self.mdp.num_states(), self.mdp.num_actions())
    }

    fn prior_mean(&self) -> f64 {
        self.prior.map_or(0.0, |(mean, _)| mean)
    }

    fn param_index(&self, s: usize, a: usize) -> usize {
        match self.opts.layout {
            RewardLayout::PerState => s,
            RewardLayout::PerStateAction => a * self.mdp.num_states() + s,
        }
    }

    /// Soft Q-values (row-major by state) and their Jacobian in θ.
    fn soft_q(&self, theta: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (n, na, d) = (self.mdp.num_states(), self.mdp.num_actions(), theta.len());
        let (gamma, temp) = (self.mdp.discount(), self.opts.temperature);
        let mut q = vec![0.0; n * na];
        let mut dq = vec![0.0; n * na * d];
        for s in 0..n {
            for a in 0..na {
                let j = self.param_index(s, a);
                q[s * na + a] = theta[j];
                dq[(s * na + a) * d + j] = 1.0;
            }
        }
        let mut v = vec![0.0; n];
        let mut dv = vec![0.0; n * d];
        for _ in 0..self.opts.backup_steps {
            for s in 0..n {
                let row = &q[s * na..(s + 1) * na];
                let pi = softmax(row, temp);
                v[s] = pi.iter().zip(row).map(|(p, x)| p * x).sum();
                let dvs = &mut dv[s * d..(s + 1) * d];
                dvs.fill(0.0);
                for a in 0..na {
                    let w = pi[a] * (1.0 + (row[a] - v[s]) / temp);
                    if w != 0.0 {
                        let src = &dq[(s * na + a) * d..(s * na + a + 1) * d];
                        dvs.iter_mut().zip(src).for_each(|(o, x)| *o += w * x);
                    }
                }
            }
            for s in 0..n {
                for a in 0..na {
                    let idx = s * na + a;
                    let j = self.param_index(s, a);
                    let mut next = theta[j];
                    let out = &mut dq[idx * d..(idx + 1) * d];
                    out.fill(0.0);
                    out[j] = 1.0;
                    for &(sp, p) in self.mdp.successors(a, s) {
                        next += gamma * p * v[sp];
                        let src = &dv[sp * d..(sp + 1) * d];
                        out.iter_mut().zip(src).for_each(|(o, x)| *o += gamma * p * x);
                    }
                    q[idx] = next;
                }
            }
        }
        (q, dq)
    }

    pub fn evaluate(&self, theta: &[f64]) -> Result<Evaluation> {
        if theta.len() != self.dim() {
            return Err(Error::dimension("MLIRL parameters", self.dim(), theta.len()));
        }
        let (na, d, temp) = (self.mdp.num_actions(), theta.len(), self.opts.temperature);
        let (q, dq) = self.soft_q(theta);
        let mut log_likelihood = 0.0;
        let mut gradient = vec![0.0; d];
        for &(s, a, count) in &self.counts {
            let row = &q[s * na..(s + 1) * na];
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max / temp + row.iter().map(|x| ((x - max) / temp).exp()).sum::<f64>().ln();
            log_likelihood += count * (row[a] / temp - lse);
            let pi = softmax(row, temp);
            for b in 0..na {
                let w = count / temp * (f64::from(u8::from(a == b)) - pi[b]);
                if w != 0.0 {
                    let src = &dq[(s * na + b) * d..(s * na + b + 1) * d];
                    gradient.iter_mut().zip(src).for_each(|(g, x)| *g += w * x);
                }
            }
        }
        let mut log_prior = 0.0;
        if let Some((mean, std)) = self.prior {
            for (g, t) in gradient.iter_mut().zip(theta) {
                log_prior -= (t - mean).powi(2) / (2.0 * std * std);
                *g -= (t - mean) / (std * std);
            }
        }
        Ok(Evaluation {
            log_likelihood,
            log_prior,
            gradient,
        })
    }

    pub fn value(&self, theta: &[f64]) -> Result<f64> {
        self.evaluate(theta).map(|e| e.objective())
    }

    /// Expand parameters to a reward over `(s, a)` in the objective's layout.
    pub fn reward(&self, theta: &[f64]) -> RewardVector {
        RewardVector {
            layout: self.opts.layout,
            values: theta.to_vec(),
        }
    }
}

/// Gradient ascent on the Boltzmann log posterior from the prior mean.
pub fn mlirl_fit(problem: &IrlProblem<'_>, opts: &MlirlOptions) -> Result<MlirlFit> {
    let objective = MlirlObjective::new(problem, opts)?;
    let mut theta = vec![objective.prior_mean(); objective.dim()];
    let mut eval = objective.evaluate(&theta)?;
    let mut trace = vec![eval.log_likelihood];
    let mut iterations = 0;
    let norm = |g: &[f64]| g.iter().map(|x| x * x).sum::<f64>().sqrt();
    while iterations < opts.iterations && norm(&eval.gradient) > opts.tol {
        let next: Vec<f64> = theta
            .iter()
            .zip(&eval.gradient)
            .map(|(t, g)| t + opts.step_size * g)
            .collect();
        let next_eval = objective.evaluate(&next)?;
        iterations += 1;
        if !next_eval.objective().is_finite() || next.iter().any(|x| !x.is_finite()) {
            return Err(Error::Diverged {
                iterations,
                last_finite: theta,
            });
        }
        theta = next;
        eval = next_eval;
        trace.push(eval.log_likelihood);
    }
    let gradient_norm = norm(&eval.gradient);
    Ok(MlirlFit {
        reward: objective.reward(&theta),
        diagnostics: Diagnostics {
            iterations,
            objective: eval.objective(),
            gradient_norm,
            converged: gradient_norm <= opts.tol,
        },
        log_likelihood_trace: trace,
    })
}
