//! Gaussian-process IRL with a preference likelihood.
//!
//! The reward is laid out per state-action, `r[a·|S| + s]`, with one
//! independent GP per action. Q-gaps entering the likelihood are evaluated
//! under the agent's observed policy (empirical action frequencies at
//! observed states, uniform elsewhere), which makes every gap a fixed linear
//! functional of `r`. The MAP problem is therefore convex and solved exactly
//! by Newton's method; hyperparameters follow the Laplace evidence.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use super::kernel::{kernel_from_distances, squared_distances, GpHyper};
use super::preferences::{build_preferences, empirical_policy, Preference};
use super::probit;
use super::{Diagnostics, IrlProblem, RewardLayout, RewardVector};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GpirlOptions {
    /// Likelihood scale of Q-gaps.
    pub beta: f64,
    /// Stopping tolerance on the MAP gradient norm in reward space.
    pub tol: f64,
    pub max_newton_iters: usize,
    /// Hyperparameter ascent steps.
    pub outer_iters: usize,
    pub optimize_hyper: bool,
    /// Largest per-coordinate step in log-hyperparameter space.
    pub hyper_step: f64,
    pub kappa_bounds: (f64, f64),
    pub sigma_bounds: (f64, f64),
}

impl Default for GpirlOptions {
    fn default() -> Self {
        GpirlOptions {
            beta: 1.0,
            tol: 1e-6,
            max_newton_iters: 100,
            outer_iters: 20,
            optimize_hyper: true,
            hyper_step: 0.5,
            kappa_bounds: (1e-3, 1e2),
            sigma_bounds: (1e-2, 1e1),
        }
    }
}

impl GpirlOptions {
    fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) || !(self.tol > 0.0) || !(self.hyper_step > 0.0) {
            return Err(Error::validation("beta, tol and hyper_step must be positive"));
        }
        let ok = |(lo, hi): (f64, f64)| lo > 0.0 && lo <= hi;
        if !ok(self.kappa_bounds) || !ok(self.sigma_bounds) {
            return Err(Error::validation("hyperparameter bounds must be positive and ordered"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GpirlFit {
    pub reward: RewardVector,
    pub hyper: GpHyper,
    /// Laplace approximation of the log marginal likelihood at `hyper`.
    pub log_evidence: f64,
    pub num_relations: usize,
    /// Newton steps of the final MAP solve.
    pub newton_iterations: usize,
    pub diagnostics: Diagnostics,
}

struct Lik {
    value: f64,
    d1: DVector<f64>,
    d2: DVector<f64>,
    d3: DVector<f64>,
}

/// Everything about one problem that does not depend on hyperparameters.
struct Model {
    num_states: usize,
    strict: Vec<bool>,
    /// `A_c`: how each relation's Q-gap depends on `r_{a_c}`.
    blocks: Vec<DMatrix<f64>>,
    d2: DMatrix<f64>,
    beta: f64,
}

impl Model {
    fn new(problem: &IrlProblem<'_>, coords: &[Vec<f64>], beta: f64) -> Result<Self> {
        let mdp = problem.mdp;
        let (n, na) = (mdp.num_states(), mdp.num_actions());
        if coords.len() != n {
            return Err(Error::dimension("state coordinates", n, coords.len()));
        }
        let prefs = build_preferences(problem.observations, na);
        let pi = empirical_policy(problem.observations, n, na);
        let gamma = mdp.discount();

        // V = (I - γ P_π)^{-1} r_π; each gap needs γ (P_a - P_b)(s,·) V.
        let mut system = DMatrix::<f64>::identity(n, n);
        for (s, row) in pi.iter().enumerate() {
            for (c, &p) in row.iter().enumerate() {
                if p > 0.0 {
                    for &(j, pr) in mdp.successors(c, s) {
                        system[(s, j)] -= gamma * p * pr;
                    }
                }
            }
        }
        let m = prefs.len();
        let mut diff_t = DMatrix::<f64>::zeros(n, m);
        for (i, rel) in prefs.relations.iter().enumerate() {
            let (s, (a, b)) = (rel.state(), rel.actions());
            for &(j, p) in mdp.successors(a, s) {
                diff_t[(j, i)] += gamma * p;
            }
            for &(j, p) in mdp.successors(b, s) {
                diff_t[(j, i)] -= gamma * p;
            }
        }
        let prop_t = system
            .transpose()
            .lu()
            .solve(&diff_t)
            .ok_or_else(|| Error::Numerical("singular visitation system".into()))?;

        let mut blocks = vec![DMatrix::<f64>::zeros(m, n); na];
        for (i, rel) in prefs.relations.iter().enumerate() {
            let (s, (a, b)) = (rel.state(), rel.actions());
            blocks[a][(i, s)] += 1.0;
            blocks[b][(i, s)] -= 1.0;
            for (sp, row) in pi.iter().enumerate() {
                let x = prop_t[(sp, i)];
                if x != 0.0 {
                    for (c, &p) in row.iter().enumerate() {
                        blocks[c][(i, sp)] += x * p;
                    }
                }
            }
        }
        let all: Vec<usize> = (0..n).collect();
        Ok(Model {
            num_states: n,
            strict: prefs
                .relations
                .iter()
                .map(|r| matches!(r, Preference::Strict { .. }))
                .collect(),
            blocks,
            d2: squared_distances(coords, &all),
            beta,
        })
    }

    fn num_relations(&self) -> usize {
        self.strict.len()
    }

    fn num_actions(&self) -> usize {
        self.blocks.len()
    }

    fn likelihood(&self, f: &DVector<f64>) -> Lik {
        let m = f.len();
        let mut lik = Lik {
            value: 0.0,
            d1: DVector::zeros(m),
            d2: DVector::zeros(m),
            d3: DVector::zeros(m),
        };
        for i in 0..m {
            let d = if self.strict[i] {
                probit::strict(f[i], self.beta)
            } else {
                probit::equivalent(f[i], self.beta)
            };
            lik.value += d.value;
            lik.d1[i] = d.d1;
            lik.d2[i] = d.d2;
            lik.d3[i] = d.d3;
        }
        lik
    }

    fn kernels(&self, hyper: &GpHyper) -> Vec<DMatrix<f64>> {
        (0..self.num_actions())
            .map(|c| kernel_from_distances(&self.d2, hyper.kappa[c], hyper.sigma[c]))
            .collect()
    }

    /// Prior covariance of the gaps, `Σ_c A_c K_c A_cᵀ`.
    fn gap_covariance(&self, kernels: &[DMatrix<f64>]) -> DMatrix<f64> {
        let m = self.num_relations();
        let mut sigma = DMatrix::<f64>::zeros(m, m);
        for (a, k) in self.blocks.iter().zip(kernels) {
            let ak = a * k;
            sigma.gemm(1.0, &ak, &a.transpose(), 1.0);
        }
        sigma
    }

    /// `Aᵀ v`, laid out action-major.
    fn adjoint(&self, v: &DVector<f64>) -> Vec<DVector<f64>> {
        self.blocks.iter().map(|a| a.tr_mul(v)).collect()
    }

    fn forward(&self, r: &[f64]) -> DVector<f64> {
        let n = self.num_states;
        let mut f = DVector::zeros(self.num_relations());
        for (c, a) in self.blocks.iter().enumerate() {
            f.gemv(1.0, a, &DVector::from_column_slice(&r[c * n..(c + 1) * n]), 1.0);
        }
        f
    }

    /// Reward-space gradient norm of the MAP objective at `r = K Aᵀ a`.
    fn gradient_norm(&self, a: &DVector<f64>, d1: &DVector<f64>) -> f64 {
        let diff = a - d1;
        self.adjoint(&diff).iter().map(|v| v.norm_squared()).sum::<f64>().sqrt()
    }
}

struct Mode {
    a: DVector<f64>,
    lik: Lik,
    psi: f64,
    sw: DVector<f64>,
    l: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    newton_iters: usize,
    grad_norm: f64,
    converged: bool,
}

fn factor(sigma: &DMatrix<f64>, sw: &DVector<f64>) -> Result<Cholesky<f64, Dyn>> {
    let m = sigma.nrows();
    let b = DMatrix::from_fn(m, m, |i, j| f64::from(u8::from(i == j)) + sw[i] * sigma[(i, j)] * sw[j]);
    Cholesky::new(b).ok_or_else(|| {
        Error::Numerical(format!(
            "I + W^1/2 Σ W^1/2 is not positive definite ({m} relations); check kernel hyperparameters"
        ))
    })
}

/// Newton iterations on `ψ(a) = -½ aᵀΣa + log p(O | Σa)` with step halving.
fn find_mode(model: &Model, sigma: &DMatrix<f64>, warm: Option<&DVector<f64>>, opts: &GpirlOptions) -> Result<Mode> {
    let m = model.num_relations();
    let objective = |a: &DVector<f64>| {
        let f = sigma * a;
        let lik = model.likelihood(&f);
        let psi = -0.5 * a.dot(&f) + lik.value;
        (f, lik, psi)
    };
    let mut a = warm.cloned().unwrap_or_else(|| DVector::zeros(m));
    let (mut f, mut lik, mut psi) = objective(&a);
    if !psi.is_finite() {
        a = DVector::zeros(m);
        (f, lik, psi) = objective(&a);
    }
    let mut newton_iters = 0;
    let mut converged = false;
    let mut grad_norm;
    loop {
        grad_norm = model.gradient_norm(&a, &lik.d1);
        if grad_norm <= opts.tol {
            converged = true;
            break;
        }
        if newton_iters == opts.max_newton_iters {
            break;
        }
        newton_iters += 1;
        let sw = lik.d2.map(|w| (-w).max(0.0).sqrt());
        let chol = factor(sigma, &sw)?;
        let b = &lik.d1 - lik.d2.component_mul(&f);
        let e = chol.solve(&(sigma * &b).component_mul(&sw));
        let step = b - sw.component_mul(&e) - &a;
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..40 {
            let trial = &a + &step * t;
            let (tf, tlik, tpsi) = objective(&trial);
            if tpsi.is_finite() && tpsi >= psi {
                moved = tpsi > psi || t == 1.0;
                (a, f, lik, psi) = (trial, tf, tlik, tpsi);
                break;
            }
            t *= 0.5;
        }
        if !moved {
            grad_norm = model.gradient_norm(&a, &lik.d1);
            converged = grad_norm <= opts.tol;
            break;
        }
    }
    let sw = lik.d2.map(|w| (-w).max(0.0).sqrt());
    let chol = factor(sigma, &sw)?;
    Ok(Mode {
        l: chol.l(),
        chol,
        a,
        lik,
        psi,
        sw,
        newton_iters,
        grad_norm,
        converged,
    })
}

struct State {
    hyper: GpHyper,
    kernels: Vec<DMatrix<f64>>,
    sigma: DMatrix<f64>,
    mode: Mode,
    log_evidence: f64,
}

fn evaluate(model: &Model, hyper: GpHyper, warm: Option<&DVector<f64>>, opts: &GpirlOptions) -> Result<State> {
    let kernels = model.kernels(&hyper);
    let sigma = model.gap_covariance(&kernels);
    let mode = find_mode(model, &sigma, warm, opts)?;
    let log_det: f64 = (0..mode.l.nrows()).map(|i| mode.l[(i, i)].ln()).sum();
    let log_evidence = mode.psi - log_det;
    Ok(State {
        hyper,
        kernels,
        sigma,
        mode,
        log_evidence,
    })
}

/// Gradient of the Laplace log evidence in `(log κ_c…, log σ_c…)`, including
/// the implicit dependence of the mode on the hyperparameters.
fn evidence_gradient(model: &Model, st: &State) -> Vec<f64> {
    let mode = &st.mode;
    let (m, na, n) = (model.num_relations(), model.num_actions(), model.num_states);
    let sw = &mode.sw;

    // R = W½ B⁻¹ W½
    let mut r = mode.chol.solve(&DMatrix::from_diagonal(sw));
    for i in 0..m {
        r.row_mut(i).scale_mut(sw[i]);
    }
    // C = L⁻¹ W½ Σ
    let mut c = st.sigma.clone();
    for i in 0..m {
        c.row_mut(i).scale_mut(sw[i]);
    }
    mode.l.solve_lower_triangular_mut(&mut c);
    // d(-½ log|B|)/df_i = ½ Var[f_i | O] ∂³log p / ∂f_i³  (W = -∂²log p)
    let s2 = DVector::from_fn(m, |i, _| {
        0.5 * (st.sigma[(i, i)] - c.column(i).norm_squared()) * mode.lik.d3[i]
    });

    let ta = model.adjoint(&mode.a);
    let td1 = model.adjoint(&mode.lik.d1);
    let mut grad = vec![0.0; 2 * na];
    for cix in 0..na {
        let a = &model.blocks[cix];
        let rc = a.tr_mul(&(&r * a));
        let implicit = |b: DVector<f64>| {
            let s3 = &b - &st.sigma * (&r * &b);
            s2.dot(&s3)
        };

        let kappa = st.hyper.kappa[cix];
        let dk = DMatrix::from_fn(n, n, |i, j| {
            let d = model.d2[(i, j)];
            (-0.5 * kappa * d).exp() * (-0.5 * kappa * d)
        });
        let s1 = 0.5 * ta[cix].dot(&(&dk * &ta[cix])) - 0.5 * rc.component_mul(&dk).sum();
        grad[cix] = s1 + implicit(a * (&dk * &td1[cix]));

        let scale = 2.0 * st.hyper.sigma[cix].powi(2);
        let s1 = 0.5 * scale * ta[cix].norm_squared() - 0.5 * scale * rc.trace();
        grad[na + cix] = s1 + implicit(a * (&td1[cix] * scale));
    }
    grad
}

fn clamp_log(x: f64, (lo, hi): (f64, f64)) -> f64 {
    x.clamp(lo.ln(), hi.ln())
}

fn hyper_from_log(theta: &[f64]) -> GpHyper {
    let na = theta.len() / 2;
    GpHyper {
        kappa: theta[..na].iter().map(|x| x.exp()).collect(),
        sigma: theta[na..].iter().map(|x| x.exp()).collect(),
    }
}

/// Alternate MAP reward estimation and Laplace-evidence ascent over the
/// per-action kernel hyperparameters.
///
/// `coordinates` embeds each state for the kernel. Returns the MAP reward
/// (per state-action) at the final hyperparameters.
pub fn gpirl_fit(
    problem: &IrlProblem<'_>,
    coordinates: &[Vec<f64>],
    init_hyper: &GpHyper,
    opts: &GpirlOptions,
) -> Result<GpirlFit> {
    opts.validate()?;
    let (n, na) = (problem.mdp.num_states(), problem.mdp.num_actions());
    init_hyper.validate(na)?;
    let model = Model::new(problem, coordinates, opts.beta)?;
    if model.num_relations() == 0 {
        return Ok(GpirlFit {
            reward: RewardVector {
                layout: RewardLayout::PerStateAction,
                values: vec![0.0; n * na],
            },
            hyper: init_hyper.clone(),
            log_evidence: 0.0,
            num_relations: 0,
            newton_iterations: 0,
            diagnostics: Diagnostics {
                iterations: 0,
                objective: 0.0,
                gradient_norm: 0.0,
                converged: true,
            },
        });
    }

    let mut theta: Vec<f64> = init_hyper
        .kappa
        .iter()
        .map(|k| clamp_log(k.ln(), opts.kappa_bounds))
        .chain(init_hyper.sigma.iter().map(|s| clamp_log(s.ln(), opts.sigma_bounds)))
        .collect();
    let project = |t: &mut [f64]| {
        for (i, x) in t.iter_mut().enumerate() {
            *x = clamp_log(*x, if i < na { opts.kappa_bounds } else { opts.sigma_bounds });
        }
    };
    let mut state = evaluate(&model, hyper_from_log(&theta), None, opts)?;
    let mut outer = 0;
    if opts.optimize_hyper {
        let mut grad = evidence_gradient(&model, &state);
        while outer < opts.outer_iters {
            let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
            if !(gmax > 1e-9) {
                break;
            }
            let mut step = opts.hyper_step / gmax;
            let mut next = None;
            for _ in 0..8 {
                let mut cand: Vec<f64> = theta.iter().zip(&grad).map(|(t, g)| t + step * g).collect();
                project(&mut cand);
                if cand == theta {
                    break;
                }
                if let Ok(s) = evaluate(&model, hyper_from_log(&cand), Some(&state.mode.a), opts) {
                    if s.log_evidence > state.log_evidence {
                        next = Some((cand, s));
                        break;
                    }
                }
                step *= 0.5;
            }
            let Some((cand, s)) = next else { break };
            outer += 1;
            let gain = s.log_evidence - state.log_evidence;
            theta = cand;
            state = s;
            if gain < 1e-6 * (1.0 + state.log_evidence.abs()) {
                break;
            }
            grad = evidence_gradient(&model, &state);
        }
    }

    let mut values = Vec::with_capacity(n * na);
    for (k, ta) in state.kernels.iter().zip(model.adjoint(&state.mode.a)) {
        values.extend((k * ta).iter());
    }
    Ok(GpirlFit {
        reward: RewardVector {
            layout: RewardLayout::PerStateAction,
            values,
        },
        log_evidence: state.log_evidence,
        num_relations: model.num_relations(),
        newton_iterations: state.mode.newton_iters,
        diagnostics: Diagnostics {
            iterations: outer,
            objective: -state.mode.psi,
            gradient_norm: state.mode.grad_norm,
            converged: state.mode.converged,
        },
        hyper: state.hyper,
    })
}

/// The MAP objective in reward space at fixed hyperparameters:
/// `-log p(O | r) + ½ Σ_a r_aᵀ K_a⁻¹ r_a`.
pub struct GpirlObjective {
    model: Model,
    factors: Vec<Cholesky<f64, Dyn>>,
}

impl GpirlObjective {
    pub fn new(problem: &IrlProblem<'_>, coordinates: &[Vec<f64>], hyper: &GpHyper, opts: &GpirlOptions) -> Result<Self> {
        opts.validate()?;
        hyper.validate(problem.mdp.num_actions())?;
        let model = Model::new(problem, coordinates, opts.beta)?;
        let factors = model
            .kernels(hyper)
            .into_iter()
            .map(|k| Cholesky::new(k).ok_or_else(|| Error::Numerical("kernel matrix is not positive definite".into())))
            .collect::<Result<_>>()?;
        Ok(GpirlObjective { model, factors })
    }

    pub fn dim(&self) -> usize {
        self.model.num_states * self.model.num_actions()
    }

    pub fn num_relations(&self) -> usize {
        self.model.num_relations()
    }

    pub fn value(&self, r: &[f64]) -> f64 {
        let n = self.model.num_states;
        let f = self.model.forward(r);
        let prior: f64 = self
            .factors
            .iter()
            .enumerate()
            .map(|(c, ch)| {
                let rc = DVector::from_column_slice(&r[c * n..(c + 1) * n]);
                0.5 * rc.dot(&ch.solve(&rc))
            })
            .sum();
        prior - self.model.likelihood(&f).value
    }

    pub fn gradient(&self, r: &[f64]) -> Vec<f64> {
        let n = self.model.num_states;
        let f = self.model.forward(r);
        let lik = self.model.likelihood(&f);
        let mut out = Vec::with_capacity(self.dim());
        for (c, (ch, back)) in self.factors.iter().zip(self.model.adjoint(&lik.d1)).enumerate() {
            let rc = DVector::from_column_slice(&r[c * n..(c + 1) * n]);
            out.extend((ch.solve(&rc) - back).iter());
        }
        out
    }
}
