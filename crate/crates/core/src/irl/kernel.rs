use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Per-action squared-exponential hyperparameters: inverse squared length
/// scale `kappa` and noise `sigma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpHyper {
    pub kappa: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl GpHyper {
    pub fn uniform(num_actions: usize, kappa: f64, sigma: f64) -> Self {
        GpHyper {
            kappa: vec![kappa; num_actions],
            sigma: vec![sigma; num_actions],
        }
    }

    pub fn num_actions(&self) -> usize {
        self.kappa.len()
    }

    pub fn validate(&self, num_actions: usize) -> Result<()> {
        if self.kappa.len() != num_actions || self.sigma.len() != num_actions {
            return Err(Error::dimension("GP hyperparameters", num_actions, self.kappa.len().min(self.sigma.len())));
        }
        if self.kappa.iter().any(|&k| !(k > 0.0) || !k.is_finite()) {
            return Err(Error::validation("kernel scale kappa must be positive"));
        }
        if self.sigma.iter().any(|&s| !(s >= 0.0) || !s.is_finite()) {
            return Err(Error::validation("kernel noise sigma must be nonnegative"));
        }
        Ok(())
    }
}

/// Squared Euclidean distances between the embeddings of `states`.
pub fn squared_distances(coords: &[Vec<f64>], states: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(states.len(), states.len(), |i, j| {
        coords[states[i]]
            .iter()
            .zip(&coords[states[j]])
            .map(|(a, b)| (a - b).powi(2))
            .sum()
    })
}

/// `K[c][d] = exp(-½ κ ‖x_c - x_d‖²) + σ² δ(c, d)` for one action's latent
/// reward process, over `states` embedded at `coords`.
pub fn se_kernel_matrix(coords: &[Vec<f64>], states: &[usize], hyper: &GpHyper, action: usize) -> Result<DMatrix<f64>> {
    hyper.validate(hyper.num_actions())?;
    if action >= hyper.num_actions() {
        return Err(Error::validation(format!("action {action} has no hyperparameters")));
    }
    if let Some(&s) = states.iter().find(|&&s| s >= coords.len()) {
        return Err(Error::validation(format!("state {s} has no coordinates")));
    }
    Ok(kernel_from_distances(
        &squared_distances(coords, states),
        hyper.kappa[action],
        hyper.sigma[action],
    ))
}

pub(crate) fn kernel_from_distances(d2: &DMatrix<f64>, kappa: f64, sigma: f64) -> DMatrix<f64> {
    let mut k = d2.map(|d| (-0.5 * kappa * d).exp());
    for i in 0..k.nrows() {
        k[(i, i)] += sigma * sigma;
    }
    k
}
