//! Recognition in a feature space: clustering, agreement metrics,
//! classifiers and stratified cross-validation.

mod classify;
mod cv;
mod kmeans;
mod metrics;

pub use classify::{logistic_objective, train_classifier, Classifier, ClassifierKind, ClassifierParams};
pub use cv::{cross_validate, stratified_folds, CvResult};
pub use kmeans::{kmeans, ClusterResult};
pub use metrics::{clustering_accuracy, contingency, nmi, Contingency};

use crate::features::FeatureVector;
use crate::{Error, Result};

/// Feature rows with optional integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    rows: Vec<Vec<f64>>,
    labels: Option<Vec<usize>>,
}

impl Dataset {
    pub fn new(rows: Vec<Vec<f64>>, labels: Option<Vec<usize>>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::validation("dataset rows must have equal length"));
        }
        if rows.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::validation("dataset entries must be finite"));
        }
        if let Some(l) = &labels {
            if l.len() != rows.len() {
                return Err(Error::dimension("labels", rows.len(), l.len()));
            }
        }
        Ok(Dataset { rows, labels })
    }

    pub fn from_features(features: &[FeatureVector], labels: Option<Vec<usize>>) -> Result<Self> {
        Self::new(features.iter().map(|f| f.values.clone()).collect(), labels)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub(crate) fn require_labels(&self) -> Result<&[usize]> {
        self.labels()
            .ok_or_else(|| Error::validation("operation needs a labeled dataset"))
    }

    /// Rows (and labels) at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
        }
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_ragged_and_mislabeled() {
        assert!(Dataset::new(vec![vec![1.0], vec![1.0, 2.0]], None).is_err());
        assert!(Dataset::new(vec![vec![1.0]], Some(vec![0, 1])).is_err());
        assert!(Dataset::new(vec![vec![f64::NAN]], None).is_err());
        let d = Dataset::new(vec![vec![1.0], vec![2.0], vec![3.0]], Some(vec![0, 1, 0])).unwrap();
        let s = d.subset(&[2, 0]);
        assert_eq!(s.rows(), &[vec![3.0], vec![1.0]]);
        assert_eq!(s.labels(), Some(&[0, 0][..]));
    }
}
