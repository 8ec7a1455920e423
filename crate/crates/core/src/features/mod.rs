//! Action-space representations of an agent: feature trajectories (FT),
//! feature expectations (FE) and PCA projections of either.

mod pca;

pub use pca::{pca_project, PcaProjection};

use serde::{Deserialize, Serialize};

use crate::agents::{ObservationSet, Trajectory};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum FeatureSource {
    Ft,
    Fe,
    Pca,
    Reward,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub source: FeatureSource,
}

/// State basis `φ: S → [0,1]^d`.
#[derive(Debug, Clone, PartialEq)]
pub enum Basis {
    /// One-hot over the first `dim` states; states beyond map to zero.
    Indicator { dim: usize },
    /// Explicit table, one row per state.
    Table(Vec<Vec<f64>>),
}

impl Basis {
    pub fn indicator(dim: usize) -> Self {
        Basis::Indicator { dim }
    }

    pub fn table(rows: Vec<Vec<f64>>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if d == 0 || rows.iter().any(|r| r.len() != d) {
            return Err(Error::validation("basis rows must share a positive dimension"));
        }
        if rows.iter().flatten().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::validation("basis values must lie in [0, 1]"));
        }
        Ok(Basis::Table(rows))
    }

    pub fn dim(&self) -> usize {
        match self {
            Basis::Indicator { dim } => *dim,
            Basis::Table(rows) => rows[0].len(),
        }
    }

    /// `out += weight * φ(state)`
    pub fn accumulate(&self, state: usize, weight: f64, out: &mut [f64]) {
        match self {
            Basis::Indicator { dim } => {
                if state < *dim {
                    out[state] += weight;
                }
            }
            Basis::Table(rows) => {
                if let Some(row) = rows.get(state) {
                    out.iter_mut().zip(row).for_each(|(o, x)| *o += weight * x);
                }
            }
        }
    }

    pub fn eval(&self, state: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.accumulate(state, 1.0, &mut out);
        out
    }
}

/// Where FT min-max statistics are taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FtNormalization {
    /// Over the agent's own trajectories.
    #[default]
    PerAgent,
    /// Over every trajectory of every agent in the cohort.
    Global,
}

/// `[s1, a1, ..., sH, aH]`, truncated to `horizon` pairs or padded by
/// repeating the final pair.
fn encode(trajectory: &Trajectory, horizon: usize) -> Vec<f64> {
    let last = *trajectory.steps.last().expect("validated nonempty");
    (0..horizon)
        .flat_map(|t| {
            let (s, a) = trajectory.steps.get(t).copied().unwrap_or(last);
            [s as f64, a as f64]
        })
        .collect()
}

fn check_obs(obs: &ObservationSet) -> Result<()> {
    if obs.is_empty() {
        return Err(Error::validation("observation set is empty"));
    }
    if obs.trajectories.iter().any(Trajectory::is_empty) {
        return Err(Error::validation("empty trajectory"));
    }
    Ok(())
}

#[derive(Debug, Clone)]
struct MinMax {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl MinMax {
    fn new(dim: usize) -> Self {
        MinMax {
            lo: vec![f64::INFINITY; dim],
            hi: vec![f64::NEG_INFINITY; dim],
        }
    }

    fn observe(&mut self, x: &[f64]) {
        for (i, &v) in x.iter().enumerate() {
            self.lo[i] = self.lo[i].min(v);
            self.hi[i] = self.hi[i].max(v);
        }
    }

    /// Constant components map to 0.
    fn apply(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            let span = self.hi[i] - self.lo[i];
            *v = if span > 0.0 { (*v - self.lo[i]) / span } else { 0.0 };
        }
    }
}

fn average_normalized(encoded: Vec<Vec<f64>>, scale: &MinMax, horizon: usize) -> Vec<f64> {
    let mut mean = vec![0.0; 2 * horizon];
    let n = encoded.len() as f64;
    for mut e in encoded {
        scale.apply(&mut e);
        mean.iter_mut().zip(&e).for_each(|(m, x)| *m += x / n);
    }
    mean
}

/// Feature trajectory with per-agent min-max normalization.
pub fn feature_trajectory(obs: &ObservationSet, horizon: usize) -> Result<FeatureVector> {
    if horizon == 0 {
        return Err(Error::validation("horizon must be at least 1"));
    }
    check_obs(obs)?;
    let encoded: Vec<Vec<f64>> = obs.trajectories.iter().map(|t| encode(t, horizon)).collect();
    let mut scale = MinMax::new(2 * horizon);
    encoded.iter().for_each(|e| scale.observe(e));
    Ok(FeatureVector {
        values: average_normalized(encoded, &scale, horizon),
        source: FeatureSource::Ft,
    })
}

/// Feature trajectories for a whole cohort under either normalization mode.
pub fn feature_trajectory_cohort(
    cohort: &[&ObservationSet],
    horizon: usize,
    mode: FtNormalization,
) -> Result<Vec<FeatureVector>> {
    match mode {
        FtNormalization::PerAgent => cohort.iter().map(|o| feature_trajectory(o, horizon)).collect(),
        FtNormalization::Global => {
            if horizon == 0 {
                return Err(Error::validation("horizon must be at least 1"));
            }
            let mut scale = MinMax::new(2 * horizon);
            for obs in cohort {
                check_obs(obs)?;
                obs.trajectories.iter().for_each(|t| scale.observe(&encode(t, horizon)));
            }
            Ok(cohort
                .iter()
                .map(|obs| FeatureVector {
                    values: average_normalized(
                        obs.trajectories.iter().map(|t| encode(t, horizon)).collect(),
                        &scale,
                        horizon,
                    ),
                    source: FeatureSource::Ft,
                })
                .collect())
        }
    }
}

/// `(1/|O|) Σ_h Σ_t γ^t φ(s_t)` with `t` starting at 0 in every trajectory.
pub fn feature_expectation(obs: &ObservationSet, basis: &Basis, discount: f64) -> Result<FeatureVector> {
    check_obs(obs)?;
    if !(0.0..1.0).contains(&discount) {
        return Err(Error::validation("discount must lie in [0, 1)"));
    }
    let mut values = vec![0.0; basis.dim()];
    let n = obs.len() as f64;
    for t in &obs.trajectories {
        let mut weight = 1.0 / n;
        for &(s, _) in &t.steps {
            basis.accumulate(s, weight, &mut values);
            weight *= discount;
        }
    }
    Ok(FeatureVector {
        values,
        source: FeatureSource::Fe,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn traj(steps: &[(usize, usize)]) -> Trajectory {
        Trajectory { steps: steps.to_vec() }
    }

    #[test]
    fn ft_hand_example() {
        let obs = ObservationSet::new(vec![traj(&[(1, 1), (2, 2)]), traj(&[(3, 1), (2, 1)])]);
        let f = feature_trajectory(&obs, 2).unwrap();
        assert_eq!(f.values, vec![0.5, 0.0, 0.0, 0.5]);
        assert_eq!(f.source, FeatureSource::Ft);
    }

    #[test]
    fn ft_single_and_duplicated() {
        let one = ObservationSet::new(vec![traj(&[(1, 0), (4, 2)])]);
        let f1 = feature_trajectory(&one, 2).unwrap();
        // Every component is constant over a single trajectory.
        assert_eq!(f1.values, vec![0.0; 4]);
        let two = ObservationSet::new(vec![traj(&[(1, 0), (4, 2)]); 2]);
        assert_eq!(feature_trajectory(&two, 2).unwrap(), f1);
    }

    #[test]
    fn ft_pads_with_final_pair() {
        let obs = ObservationSet::new(vec![traj(&[(0, 0)]), traj(&[(2, 1), (3, 1), (4, 0)])]);
        let f = feature_trajectory(&obs, 3).unwrap();
        // first trajectory encodes as (0,0,0,0,0,0), second (2,1,3,1,4,0)
        assert_eq!(f.values, vec![0.5, 0.5, 0.5, 0.5, 0.5, 0.0]);
    }

    #[test]
    fn ft_errors() {
        assert!(feature_trajectory(&ObservationSet::default(), 2).is_err());
        let obs = ObservationSet::new(vec![traj(&[(0, 0)])]);
        assert!(feature_trajectory(&obs, 0).is_err());
    }

    #[test]
    fn ft_global_normalization_uses_cohort_range() {
        let a = ObservationSet::new(vec![traj(&[(0, 0)])]);
        let b = ObservationSet::new(vec![traj(&[(4, 2)])]);
        let out = feature_trajectory_cohort(&[&a, &b], 1, FtNormalization::Global).unwrap();
        assert_eq!(out[0].values, vec![0.0, 0.0]);
        assert_eq!(out[1].values, vec![1.0, 1.0]);
        let per = feature_trajectory_cohort(&[&a, &b], 1, FtNormalization::PerAgent).unwrap();
        assert_eq!(per[1].values, vec![0.0, 0.0]);
    }

    #[test]
    fn fe_geometric_sum() {
        let obs = ObservationSet::new(vec![traj(&[(2, 0), (2, 1), (2, 0)])]);
        let f = feature_expectation(&obs, &Basis::indicator(4), 0.5).unwrap();
        assert_eq!(f.values, vec![0.0, 0.0, 1.75, 0.0]);
        // γ = 0 keeps only φ(s0)
        let f0 = feature_expectation(&obs, &Basis::indicator(4), 0.0).unwrap();
        assert_eq!(f0.values, vec![0.0, 0.0, 1.0, 0.0]);
        let dup = ObservationSet::new(vec![obs.trajectories[0].clone(); 2]);
        assert_eq!(feature_expectation(&dup, &Basis::indicator(4), 0.5).unwrap(), f);
    }

    #[test]
    fn fe_errors_and_table_basis() {
        assert!(feature_expectation(&ObservationSet::default(), &Basis::indicator(2), 0.9).is_err());
        assert!(Basis::table(vec![vec![0.5], vec![1.5]]).is_err());
        let basis = Basis::table(vec![vec![1.0, 0.0], vec![0.5, 0.5]]).unwrap();
        let obs = ObservationSet::new(vec![traj(&[(0, 0), (1, 0)])]);
        let f = feature_expectation(&obs, &basis, 0.5).unwrap();
        assert_eq!(f.values, vec![1.25, 0.25]);
    }

    fn arb_obs(states: usize) -> impl Strategy<Value = ObservationSet> {
        prop::collection::vec(
            prop::collection::vec((0..states, 0..3usize), 1..8).prop_map(|steps| Trajectory { steps }),
            1..6,
        )
        .prop_map(ObservationSet::new)
    }

    proptest! {
        #[test]
        fn ft_invariant_under_duplication(obs in arb_obs(6)) {
            let mut doubled = obs.clone();
            doubled.trajectories.extend(obs.trajectories.clone());
            let a = feature_trajectory(&obs, 5).unwrap();
            let b = feature_trajectory(&doubled, 5).unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn fe_is_additive(o1 in arb_obs(6), o2 in arb_obs(6)) {
            let basis = Basis::indicator(6);
            let f1 = feature_expectation(&o1, &basis, 0.9).unwrap();
            let f2 = feature_expectation(&o2, &basis, 0.9).unwrap();
            let mut both = o1.clone();
            both.trajectories.extend(o2.trajectories.clone());
            let f = feature_expectation(&both, &basis, 0.9).unwrap();
            let (n1, n2) = (o1.len() as f64, o2.len() as f64);
            for i in 0..6 {
                let expected = (n1 * f1.values[i] + n2 * f2.values[i]) / (n1 + n2);
                prop_assert!((f.values[i] - expected).abs() < 1e-12);
            }
        }

        #[test]
        fn fe_indicator_mass_closed_form(obs in arb_obs(6)) {
            let gamma = 0.8f64;
            let f = feature_expectation(&obs, &Basis::indicator(6), gamma).unwrap();
            let closed: f64 = obs.trajectories.iter()
                .map(|t| (1.0 - gamma.powi(t.len() as i32)) / (1.0 - gamma))
                .sum::<f64>() / obs.len() as f64;
            assert_abs_diff_eq!(f.values.iter().sum::<f64>(), closed, epsilon = 1e-12);
        }
    }
}
