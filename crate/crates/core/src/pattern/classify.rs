use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{sq_dist, Dataset};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ClassifierKind {
    Svm,
    Knn,
    Fda,
    Lr,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 4] = [ClassifierKind::Svm, ClassifierKind::Knn, ClassifierKind::Fda, ClassifierKind::Lr];

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::Svm => "SVM",
            ClassifierKind::Knn => "KNN",
            ClassifierKind::Fda => "FDA",
            ClassifierKind::Lr => "LR",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierParams {
    pub knn_k: usize,
    /// L2 penalty of logistic regression.
    pub lr_lambda: f64,
    pub lr_iters: usize,
    /// L2 penalty of the hinge objective.
    pub svm_lambda: f64,
    pub svm_iters: usize,
}

impl Default for ClassifierParams {
    fn default() -> Self {
        ClassifierParams {
            knn_k: 5,
            lr_lambda: 1e-2,
            lr_iters: 300,
            svm_lambda: 1e-2,
            svm_iters: 500,
        }
    }
}

/// Per-column z-scoring; constant columns are only centered.
#[derive(Debug, Clone, PartialEq)]
struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    fn fit(rows: &[Vec<f64>]) -> Self {
        let (n, d) = (rows.len() as f64, rows[0].len());
        let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let scale = (0..d)
            .map(|j| {
                let var = rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n;
                if var > 0.0 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }
}

/// A scoring hyperplane `wᵀx + b` in standardized or raw coordinates.
#[derive(Debug, Clone, PartialEq)]
struct Hyperplane {
    w: Vec<f64>,
    b: f64,
}

impl Hyperplane {
    fn score(&self, x: &[f64]) -> f64 {
        self.w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + self.b
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Model {
    Knn { rows: Vec<Vec<f64>>, labels: Vec<usize>, k: usize },
    /// Binary: one plane, positive score → `classes[1]`. Otherwise one plane
    /// per class (one-vs-rest), highest score wins.
    Planes {
        standardizer: Option<Standardizer>,
        planes: Vec<Hyperplane>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    kind: ClassifierKind,
    classes: Vec<usize>,
    model: Model,
}

impl Classifier {
    pub fn kind(&self) -> ClassifierKind {
        self.kind
    }

    pub fn predict(&self, rows: &[Vec<f64>]) -> Vec<usize> {
        rows.iter().map(|r| self.predict_one(r)).collect()
    }

    fn predict_one(&self, row: &[f64]) -> usize {
        match &self.model {
            Model::Knn { rows, labels, k } => knn_vote(rows, labels, *k, row),
            Model::Planes { standardizer, planes } => {
                let x = standardizer.as_ref().map_or_else(|| row.to_vec(), |s| s.apply(row));
                if planes.len() == 1 {
                    self.classes[usize::from(planes[0].score(&x) > 0.0)]
                } else {
                    let mut best = 0;
                    let mut best_score = f64::NEG_INFINITY;
                    for (c, p) in planes.iter().enumerate() {
                        let s = p.score(&x);
                        if s > best_score {
                            best = c;
                            best_score = s;
                        }
                    }
                    self.classes[best]
                }
            }
        }
    }
}

/// Majority vote of the `k` nearest rows (distance ties → lower row index);
/// vote ties go to the tied class whose member is nearest.
fn knn_vote(rows: &[Vec<f64>], labels: &[usize], k: usize, x: &[f64]) -> usize {
    let mut order: Vec<(f64, usize)> = rows.iter().enumerate().map(|(i, r)| (sq_dist(r, x), i)).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let nearest = &order[..k.min(order.len())];
    let mut votes: Vec<(usize, usize)> = Vec::new();
    for &(_, i) in nearest {
        match votes.iter_mut().find(|(l, _)| *l == labels[i]) {
            Some(v) => v.1 += 1,
            None => votes.push((labels[i], 1)),
        }
    }
    // votes are in order of first (nearest) appearance; strict > keeps the
    // nearest class among equal counts
    let mut best = votes[0];
    for &v in &votes[1..] {
        if v.1 > best.1 {
            best = v;
        }
    }
    best.0
}

/// Mean logistic loss plus `λ/2 ‖w‖²` and its gradient, for targets `y ∈ {-1, +1}`.
/// `params` is `[w…, b]`.
pub fn logistic_objective(params: &[f64], rows: &[Vec<f64>], y: &[f64], lambda: f64) -> (f64, Vec<f64>) {
    let d = params.len() - 1;
    let n = rows.len() as f64;
    let mut loss = 0.5 * lambda * params[..d].iter().map(|w| w * w).sum::<f64>();
    let mut grad: Vec<f64> = params[..d].iter().map(|w| lambda * w).chain([0.0]).collect();
    for (x, &t) in rows.iter().zip(y) {
        let z = t * (params[..d].iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + params[d]);
        // log(1 + e^{-z}) and its derivative -σ(-z), computed stably
        loss += if z > 0.0 { (-z).exp().ln_1p() } else { -z + z.exp().ln_1p() } / n;
        let g = -t / (1.0 + z.exp()) / n;
        grad[..d].iter_mut().zip(x).for_each(|(o, x)| *o += g * x);
        grad[d] += g;
    }
    (loss, grad)
}

fn train_logistic(rows: &[Vec<f64>], y: &[f64], params: &ClassifierParams) -> Hyperplane {
    let d = rows[0].len();
    // step 1/L with L bounded by the trace of the standardized Gram matrix
    let trace: f64 = rows.iter().map(|r| r.iter().map(|x| x * x).sum::<f64>()).sum::<f64>() / rows.len() as f64;
    let step = 1.0 / (0.25 * (trace + 1.0) + params.lr_lambda);
    let mut theta = vec![0.0; d + 1];
    for _ in 0..params.lr_iters {
        let (_, g) = logistic_objective(&theta, rows, y, params.lr_lambda);
        theta.iter_mut().zip(&g).for_each(|(t, g)| *t -= step * g);
    }
    Hyperplane {
        b: theta[d],
        w: theta[..d].to_vec(),
    }
}

fn hinge_objective(w: &[f64], b: f64, rows: &[Vec<f64>], y: &[f64], lambda: f64) -> f64 {
    let reg = 0.5 * lambda * (w.iter().map(|x| x * x).sum::<f64>() + b * b);
    let loss: f64 = rows
        .iter()
        .zip(y)
        .map(|(x, &t)| (1.0 - t * (w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + b)).max(0.0))
        .sum();
    reg + loss / rows.len() as f64
}

/// Full-batch subgradient descent with step `1/(λt)` on the regularized hinge
/// loss (bias regularized as an extra constant feature); keeps the best iterate.
fn train_svm(rows: &[Vec<f64>], y: &[f64], params: &ClassifierParams) -> Hyperplane {
    let (d, n, lambda) = (rows[0].len(), rows.len() as f64, params.svm_lambda);
    let (mut w, mut b) = (vec![0.0; d], 0.0);
    let mut best = (hinge_objective(&w, b, rows, y, lambda), w.clone(), b);
    let radius = 1.0 / lambda.sqrt();
    for t in 1..=params.svm_iters {
        let eta = 1.0 / (lambda * t as f64);
        let mut gw: Vec<f64> = w.iter().map(|x| lambda * x).collect();
        let mut gb = lambda * b;
        for (x, &yt) in rows.iter().zip(y) {
            if yt * (w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + b) < 1.0 {
                gw.iter_mut().zip(x).for_each(|(g, x)| *g -= yt * x / n);
                gb -= yt / n;
            }
        }
        w.iter_mut().zip(&gw).for_each(|(w, g)| *w -= eta * g);
        b -= eta * gb;
        let norm = (w.iter().map(|x| x * x).sum::<f64>() + b * b).sqrt();
        if norm > radius {
            w.iter_mut().for_each(|x| *x *= radius / norm);
            b *= radius / norm;
        }
        let obj = hinge_objective(&w, b, rows, y, lambda);
        if obj < best.0 {
            best = (obj, w.clone(), b);
        }
    }
    Hyperplane { w: best.1, b: best.2 }
}

/// Fisher direction `S_w⁻¹ (m₊ - m₋)` with the threshold at the midpoint of
/// the projected class means; the plane is scaled to unit `‖w‖`.
fn train_fda(rows: &[Vec<f64>], positive: &[bool]) -> Result<Hyperplane> {
    let d = rows[0].len();
    let mean_of = |flag: bool| {
        let members: Vec<&Vec<f64>> = rows.iter().zip(positive).filter(|(_, &p)| p == flag).map(|(r, _)| r).collect();
        let k = members.len() as f64;
        DVector::from_fn(d, |j, _| members.iter().map(|r| r[j]).sum::<f64>() / k)
    };
    let (mp, mn) = (mean_of(true), mean_of(false));
    let mut scatter = DMatrix::<f64>::zeros(d, d);
    for (r, &p) in rows.iter().zip(positive) {
        let centered = DVector::from_column_slice(r) - if p { &mp } else { &mn };
        scatter.ger(1.0, &centered, &centered, 1.0);
    }
    let ridge = 1e-6 * if scatter.trace() > 0.0 { scatter.trace() / d as f64 } else { 1.0 };
    for i in 0..d {
        scatter[(i, i)] += ridge;
    }
    let w = scatter
        .cholesky()
        .ok_or_else(|| Error::Numerical("within-class scatter is not positive definite".into()))?
        .solve(&(&mp - &mn));
    let norm = w.norm();
    let w = if norm > 0.0 { w / norm } else { w };
    let b = -0.5 * w.dot(&(&mp + &mn));
    Ok(Hyperplane {
        w: w.iter().copied().collect(),
        b,
    })
}

pub fn train_classifier(kind: ClassifierKind, train: &Dataset, params: &ClassifierParams) -> Result<Classifier> {
    let labels = train.require_labels()?;
    let classes: Vec<usize> = labels.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    if classes.len() < 2 {
        return Err(Error::validation("training set needs at least two classes"));
    }
    if kind == ClassifierKind::Knn {
        if params.knn_k == 0 {
            return Err(Error::validation("knn_k must be positive"));
        }
        return Ok(Classifier {
            kind,
            classes,
            model: Model::Knn {
                rows: train.rows().to_vec(),
                labels: labels.to_vec(),
                k: params.knn_k,
            },
        });
    }
    let standardizer = (kind != ClassifierKind::Fda).then(|| Standardizer::fit(train.rows()));
    let rows: Vec<Vec<f64>> = match &standardizer {
        Some(s) => train.rows().iter().map(|r| s.apply(r)).collect(),
        None => train.rows().to_vec(),
    };
    let targets: Vec<usize> = if classes.len() == 2 { vec![classes[1]] } else { classes.clone() };
    let planes = targets
        .iter()
        .map(|&c| {
            let positive: Vec<bool> = labels.iter().map(|&l| l == c).collect();
            let y: Vec<f64> = positive.iter().map(|&p| if p { 1.0 } else { -1.0 }).collect();
            match kind {
                ClassifierKind::Lr => Ok(train_logistic(&rows, &y, params)),
                ClassifierKind::Svm => Ok(train_svm(&rows, &y, params)),
                ClassifierKind::Fda => train_fda(&rows, &positive),
                ClassifierKind::Knn => unreachable!(),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Classifier {
        kind,
        classes,
        model: Model::Planes { standardizer, planes },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use rand::Rng as _;
    use rand_distr::{Distribution, Normal};

    fn blobs(centers: &[(f64, f64)], per: usize, spread: f64, s: u64) -> Dataset {
        let mut rng = seed::rng(s);
        let noise = Normal::new(0.0, spread).unwrap();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (c, &(x, y)) in centers.iter().enumerate() {
            for _ in 0..per {
                rows.push(vec![x + noise.sample(&mut rng), y + noise.sample(&mut rng)]);
                labels.push(c);
            }
        }
        Dataset::new(rows, Some(labels)).unwrap()
    }

    fn train_accuracy(kind: ClassifierKind, d: &Dataset) -> f64 {
        let c = train_classifier(kind, d, &ClassifierParams::default()).unwrap();
        let pred = c.predict(d.rows());
        pred.iter().zip(d.labels().unwrap()).filter(|(a, b)| a == b).count() as f64 / d.len() as f64
    }

    #[test]
    fn separable_blobs() {
        let d = blobs(&[(0.0, 0.0), (5.0, 5.0)], 25, 0.7, 3);
        // explicit separating line x + y = 5 certifies separability
        assert!(d
            .rows()
            .iter()
            .zip(d.labels().unwrap())
            .all(|(r, &l)| (r[0] + r[1] > 5.0) == (l == 1)));
        for kind in ClassifierKind::ALL {
            assert_eq!(train_accuracy(kind, &d), 1.0, "{kind:?}");
        }
    }

    #[test]
    fn three_classes_one_vs_rest() {
        let d = blobs(&[(0.0, 0.0), (8.0, 0.0), (0.0, 8.0)], 15, 0.5, 8);
        for kind in ClassifierKind::ALL {
            assert_eq!(train_accuracy(kind, &d), 1.0, "{kind:?}");
        }
    }

    #[test]
    fn fda_one_dimensional_midpoint() {
        let d = Dataset::new(vec![vec![-1.0], vec![-2.0], vec![1.0], vec![2.0]], Some(vec![0, 0, 1, 1])).unwrap();
        let c = train_classifier(ClassifierKind::Fda, &d, &ClassifierParams::default()).unwrap();
        let Model::Planes { planes, .. } = &c.model else { panic!() };
        assert!((planes[0].b / planes[0].w[0]).abs() < 1e-12, "threshold at 0");
        assert_eq!(c.predict(d.rows()), vec![0, 0, 1, 1]);
        assert_eq!(c.predict(&[vec![-0.1], vec![0.1]]), vec![0, 1]);
    }

    #[test]
    fn knn_memorizes_with_k1() {
        let mut rng = seed::rng(4);
        let rows: Vec<Vec<f64>> = (0..40).map(|_| vec![rng.random(), rng.random(), rng.random()]).collect();
        let labels: Vec<usize> = (0..40).map(|_| rng.random_range(0..3)).collect();
        let d = Dataset::new(rows, Some(labels.clone())).unwrap();
        let params = ClassifierParams {
            knn_k: 1,
            ..ClassifierParams::default()
        };
        let c = train_classifier(ClassifierKind::Knn, &d, &params).unwrap();
        assert_eq!(c.predict(d.rows()), labels);
    }

    #[test]
    fn knn_vote_tie_goes_to_nearest() {
        let rows = vec![vec![0.0], vec![1.0], vec![-1.5], vec![2.0]];
        // k=4 at x=0.1: labels 7,7 vs 3,3 tie; nearest is row 0 (label 7)
        assert_eq!(knn_vote(&rows, &[7, 3, 7, 3], 4, &[0.1]), 7);
        assert_eq!(knn_vote(&rows, &[3, 7, 3, 7], 4, &[0.1]), 3);
    }

    #[test]
    fn single_class_rejected() {
        let d = Dataset::new(vec![vec![0.0], vec![1.0]], Some(vec![2, 2])).unwrap();
        for kind in ClassifierKind::ALL {
            assert!(train_classifier(kind, &d, &ClassifierParams::default()).is_err());
        }
        let unlabeled = Dataset::new(vec![vec![0.0]], None).unwrap();
        assert!(train_classifier(ClassifierKind::Lr, &unlabeled, &ClassifierParams::default()).is_err());
    }

    #[test]
    fn logistic_gradient_matches_finite_differences() {
        let mut rng = seed::rng(12);
        let rows: Vec<Vec<f64>> = (0..30).map(|_| (0..4).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let y: Vec<f64> = (0..30).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
        for _ in 0..10 {
            let p: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (_, g) = logistic_objective(&p, &rows, &y, 0.3);
            for j in 0..5 {
                let h = 1e-6;
                let mut pp = p.clone();
                pp[j] += h;
                let mut pm = p.clone();
                pm[j] -= h;
                let fd = (logistic_objective(&pp, &rows, &y, 0.3).0 - logistic_objective(&pm, &rows, &y, 0.3).0) / (2.0 * h);
                assert!((g[j] - fd).abs() <= 1e-5 * fd.abs().max(1e-3), "{} vs {fd}", g[j]);
            }
        }
    }

    #[test]
    fn deterministic() {
        let d = blobs(&[(0.0, 0.0), (1.0, 1.0)], 20, 1.0, 1);
        for kind in ClassifierKind::ALL {
            let a = train_classifier(kind, &d, &ClassifierParams::default()).unwrap();
            let b = train_classifier(kind, &d, &ClassifierParams::default()).unwrap();
            assert_eq!(a, b);
        }
    }
}
