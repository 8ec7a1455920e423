use nalgebra::{DMatrix, SymmetricEigen};

use super::{FeatureSource, FeatureVector};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct PcaProjection {
    pub vectors: Vec<FeatureVector>,
    /// Variance share of each retained component, descending.
    pub explained_variance_ratio: Vec<f64>,
}

/// Project mean-centered vectors onto the top `num_components` eigenvectors
/// of their sample covariance.
///
/// Each eigenvector is oriented so its largest-magnitude coordinate is
/// positive (first such coordinate on ties).
pub fn pca_project(vectors: &[FeatureVector], num_components: usize) -> Result<PcaProjection> {
    if vectors.len() < 2 {
        return Err(Error::validation("PCA needs at least two vectors"));
    }
    let d = vectors[0].values.len();
    if vectors.iter().any(|v| v.values.len() != d) {
        return Err(Error::validation("PCA inputs have different lengths"));
    }
    if num_components == 0 || num_components > d {
        return Err(Error::validation(format!(
            "cannot keep {num_components} components of a {d}-dimensional input"
        )));
    }
    let n = vectors.len();
    let mut data = DMatrix::from_fn(n, d, |i, j| vectors[i].values[j]);
    let mean = data.row_mean();
    for mut row in data.row_iter_mut() {
        row -= &mean;
    }
    let cov = data.transpose() * &data / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let total: f64 = eig.eigenvalues.iter().map(|&l| l.max(0.0)).sum();

    let mut basis = DMatrix::zeros(d, num_components);
    let mut ratios = Vec::with_capacity(num_components);
    for (k, &idx) in order.iter().take(num_components).enumerate() {
        let mut v = eig.eigenvectors.column(idx).into_owned();
        let pivot = v
            .iter()
            .enumerate()
            .fold(0, |best, (i, x)| if x.abs() > v[best].abs() { i } else { best });
        if v[pivot] < 0.0 {
            v = -v;
        }
        basis.set_column(k, &v);
        ratios.push(if total > 0.0 { eig.eigenvalues[idx].max(0.0) / total } else { 0.0 });
    }
    let projected = data * basis;
    Ok(PcaProjection {
        vectors: projected
            .row_iter()
            .map(|r| FeatureVector {
                values: r.iter().copied().collect(),
                source: FeatureSource::Pca,
            })
            .collect(),
        explained_variance_ratio: ratios,
    })
}
