use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{train_classifier, ClassifierKind, ClassifierParams, Dataset};
use crate::seed::{self, Rng};
use crate::{Error, Execution, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    /// Mean test accuracy over folds × replications.
    pub mean: f64,
    /// Sample standard deviation over the same cells (0 for a single cell).
    pub std: f64,
    pub fold_accuracies: Vec<f64>,
}

/// Stratified fold index per row: each class is shuffled and dealt round
/// robin, continuing the deal across classes so fold sizes differ by ≤ 1.
pub fn stratified_folds(labels: &[usize], folds: usize, rng: &mut Rng) -> Result<Vec<usize>> {
    if folds < 2 || folds > labels.len() {
        return Err(Error::validation(format!("folds = {folds} must lie in 2..={}", labels.len())));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    if by_class.len() < 2 {
        return Err(Error::validation("stratification needs at least two classes"));
    }
    let mut assignment = vec![0; labels.len()];
    let mut next = 0;
    for members in by_class.values_mut() {
        members.shuffle(rng);
        for &i in members.iter() {
            assignment[i] = next % folds;
            next += 1;
        }
    }
    for f in 0..folds {
        let classes_outside = by_class
            .values()
            .filter(|m| m.iter().any(|&i| assignment[i] != f))
            .count();
        if classes_outside < 2 {
            return Err(Error::validation(format!("fold {f} leaves fewer than two classes for training")));
        }
    }
    Ok(assignment)
}

/// Stratified k-fold cross-validation, reshuffled per replication. Each
/// replication draws from its own stream derived from `seed`.
pub fn cross_validate(
    data: &Dataset,
    kind: ClassifierKind,
    params: &ClassifierParams,
    folds: usize,
    replications: usize,
    seed: u64,
    exec: Execution,
) -> Result<CvResult> {
    let labels = data.require_labels()?;
    if replications == 0 {
        return Err(Error::validation("replications must be at least 1"));
    }
    let per_rep = exec.map_range(replications, |rep| -> Result<Vec<f64>> {
        let assignment = stratified_folds(labels, folds, &mut seed::rng_at(seed, &[rep as u64]))?;
        (0..folds)
            .map(|f| {
                let (test, train): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| assignment[i] == f);
                let model = train_classifier(kind, &data.subset(&train), params)?;
                let test_set = data.subset(&test);
                let pred = model.predict(test_set.rows());
                let correct = pred
                    .iter()
                    .zip(test_set.labels().expect("labeled subset"))
                    .filter(|(a, b)| a == b)
                    .count();
                Ok(correct as f64 / test.len() as f64)
            })
            .collect()
    });
    let fold_accuracies: Vec<f64> = per_rep.into_iter().collect::<Result<Vec<_>>>()?.concat();
    let n = fold_accuracies.len() as f64;
    let mean = fold_accuracies.iter().sum::<f64>() / n;
    let std = if fold_accuracies.len() > 1 {
        (fold_accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(CvResult {
        mean,
        std,
        fold_accuracies,
    })
}
