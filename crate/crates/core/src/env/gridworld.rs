use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::mdp::Mdp;
use crate::seed::Rng;
use crate::{Error, Result};

/// GridWorld actions, in index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridAction {
    North = 0,
    South = 1,
    East = 2,
    West = 3,
    Stay = 4,
}

impl GridAction {
    pub const ALL: [GridAction; 5] = [
        GridAction::North,
        GridAction::South,
        GridAction::East,
        GridAction::West,
        GridAction::Stay,
    ];
    const CARDINAL: [GridAction; 4] = [
        GridAction::North,
        GridAction::South,
        GridAction::East,
        GridAction::West,
    ];

    fn offset(self) -> (isize, isize) {
        match self {
            GridAction::North => (-1, 0),
            GridAction::South => (1, 0),
            GridAction::East => (0, 1),
            GridAction::West => (0, -1),
            GridAction::Stay => (0, 0),
        }
    }
}

/// Noisy GridWorld. Cells are addressed `(row, col)` with state index
/// `row * width + col`; north decreases the row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridWorldSpec {
    pub width: usize,
    pub height: usize,
    /// Probability that the chosen move is executed.
    pub p_intended: f64,
    /// Probability of staying put regardless of the chosen action.
    pub p_stay: f64,
    /// Probability of a uniformly random cardinal move.
    pub p_random: f64,
    pub discount: f64,
}

impl Default for GridWorldSpec {
    fn default() -> Self {
        GridWorldSpec {
            width: 10,
            height: 10,
            p_intended: 0.65,
            p_stay: 0.15,
            p_random: 0.2,
            discount: 0.95,
        }
    }
}

impl GridWorldSpec {
    pub fn num_states(&self) -> usize {
        self.width * self.height
    }

    pub fn state(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    pub fn cell(&self, state: usize) -> (usize, usize) {
        (state / self.width, state % self.width)
    }

    /// `(row, col)` coordinates of every state, for kernel embeddings.
    pub fn coordinates(&self) -> Vec<Vec<f64>> {
        (0..self.num_states())
            .map(|s| {
                let (r, c) = self.cell(s);
                vec![r as f64, c as f64]
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::validation("grid must have at least one cell"));
        }
        let probs = [self.p_intended, self.p_stay, self.p_random];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::validation("movement probabilities must lie in [0, 1]"));
        }
        if (probs.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::validation("movement probabilities must sum to 1"));
        }
        Ok(())
    }

    fn step(&self, state: usize, action: GridAction) -> usize {
        let (r, c) = self.cell(state);
        let (dr, dc) = action.offset();
        let (nr, nc) = (r as isize + dr, c as isize + dc);
        if nr < 0 || nc < 0 || nr >= self.height as isize || nc >= self.width as isize {
            state
        } else {
            self.state(nr as usize, nc as usize)
        }
    }
}

/// GridWorld transition model with all off-grid moves folded into staying
/// put. The initial distribution is a point mass on cell (0, 0).
pub fn build_gridworld(spec: &GridWorldSpec) -> Result<Mdp> {
    spec.validate()?;
    let n = spec.num_states();
    let transitions = GridAction::ALL
        .iter()
        .map(|&action| {
            (0..n)
                .map(|s| {
                    let mut row = vec![0.0; n];
                    row[spec.step(s, action)] += spec.p_intended;
                    row[s] += spec.p_stay;
                    for dir in GridAction::CARDINAL {
                        row[spec.step(s, dir)] += spec.p_random / 4.0;
                    }
                    row
                })
                .collect()
        })
        .collect();
    let mut initial = vec![0.0; n];
    initial[0] = 1.0;
    Mdp::new(transitions, spec.discount, initial)
}

/// A rewarded destination cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Destination {
    pub row: usize,
    pub col: usize,
    pub reward: f64,
}

/// Sparse destination rewards plus i.i.d. Gaussian noise on every state.
pub fn gridworld_reward(
    spec: &GridWorldSpec,
    destinations: &[Destination],
    noise_std: f64,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    if !(noise_std >= 0.0) {
        return Err(Error::validation("noise std must be nonnegative"));
    }
    let mut reward = vec![0.0; spec.num_states()];
    for d in destinations {
        if d.row >= spec.height || d.col >= spec.width {
            return Err(Error::validation(format!(
                "destination ({}, {}) outside the grid",
                d.row, d.col
            )));
        }
        reward[spec.state(d.row, d.col)] += d.reward;
    }
    if noise_std > 0.0 {
        let normal = Normal::new(0.0, noise_std).map_err(|e| Error::validation(e.to_string()))?;
        for r in &mut reward {
            *r += normal.sample(rng);
        }
    }
    Ok(reward)
}
