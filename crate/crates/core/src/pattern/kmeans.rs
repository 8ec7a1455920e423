use rand::Rng as _;

use super::{sq_dist, Dataset};
use crate::seed::Rng;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Total within-cluster squared distance.
    pub inertia: f64,
    /// Inertia after every Lloyd iteration of the winning restart.
    pub inertia_trace: Vec<f64>,
}

const MAX_LLOYD_ITERS: usize = 300;

fn nearest(row: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(row, centroid);
        if d < best_d {
            best = c;
            best_d = d;
        }
    }
    best
}

fn inertia(rows: &[Vec<f64>], assignments: &[usize], centroids: &[Vec<f64>]) -> f64 {
    rows.iter()
        .zip(assignments)
        .map(|(r, &c)| sq_dist(r, &centroids[c]))
        .sum()
}

fn plus_plus(rows: &[Vec<f64>], k: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut centroids = vec![rows[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = rows.iter().map(|r| sq_dist(r, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let u = rng.random::<f64>() * total;
            let mut acc = 0.0;
            d2.iter()
                .position(|&d| {
                    acc += d;
                    u < acc
                })
                .unwrap_or_else(|| d2.iter().rposition(|&d| d > 0.0).unwrap_or(n - 1))
        } else {
            rng.random_range(0..n)
        };
        centroids.push(rows[pick].clone());
        for (d, r) in d2.iter_mut().zip(rows) {
            *d = d.min(sq_dist(r, &rows[pick]));
        }
    }
    centroids
}

fn lloyd(rows: &[Vec<f64>], mut centroids: Vec<Vec<f64>>) -> ClusterResult {
    let (k, dim) = (centroids.len(), rows[0].len());
    let mut assignments: Vec<usize> = rows.iter().map(|r| nearest(r, &centroids)).collect();
    let mut trace = Vec::new();
    for it in 0..MAX_LLOYD_ITERS {
        if it > 0 {
            let next: Vec<usize> = rows.iter().map(|r| nearest(r, &centroids)).collect();
            if next == assignments {
                break;
            }
            assignments = next;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (r, &c) in rows.iter().zip(&assignments) {
            counts[c] += 1;
            sums[c].iter_mut().zip(r).for_each(|(s, x)| *s += x);
        }
        for c in 0..k {
            // an empty cluster keeps its previous centroid
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        trace.push(inertia(rows, &assignments, &centroids));
    }
    ClusterResult {
        inertia: *trace.last().expect("at least one Lloyd iteration"),
        assignments,
        centroids,
        inertia_trace: trace,
    }
}

/// Best-of-`restarts` Lloyd iteration from k-means++ seeds.
pub fn kmeans(data: &Dataset, k: usize, restarts: usize, rng: &mut Rng) -> Result<ClusterResult> {
    if k == 0 || k > data.len() {
        return Err(Error::validation(format!("k = {k} must lie in 1..={}", data.len())));
    }
    let mut best: Option<ClusterResult> = None;
    for _ in 0..restarts.max(1) {
        let run = lloyd(data.rows(), plus_plus(data.rows(), k, rng));
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::nmi;
    use crate::seed;
    use rand_distr::{Distribution, Normal};

    fn blobs(centers: &[(f64, f64)], per: usize, spread: f64, seed_: u64) -> (Dataset, Vec<usize>) {
        let mut rng = seed::rng(seed_);
        let noise = Normal::new(0.0, spread).unwrap();
        let mut rows = Vec::new();
        let mut truth = Vec::new();
        for (c, &(x, y)) in centers.iter().enumerate() {
            for _ in 0..per {
                rows.push(vec![x + noise.sample(&mut rng), y + noise.sample(&mut rng)]);
                truth.push(c);
            }
        }
        (Dataset::new(rows, None).unwrap(), truth)
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let d = Dataset::new(vec![vec![0.0, 1.0], vec![2.0, 3.0], vec![4.0, -1.0]], None).unwrap();
        let r = kmeans(&d, 1, 3, &mut seed::rng(0)).unwrap();
        assert_eq!(r.centroids[0], vec![2.0, 1.0]);
        // Σ‖x - mean‖² = n · total variance
        assert!((r.inertia - (4.0 + 4.0 + 8.0)).abs() < 1e-12);
    }

    #[test]
    fn separated_blobs_are_recovered() {
        let (d, truth) = blobs(&[(0.0, 0.0), (10.0, 10.0)], 6, 0.3, 4);
        let r = kmeans(&d, 2, 5, &mut seed::rng(1)).unwrap();
        assert_eq!(nmi(&r.assignments, &truth).unwrap(), 1.0);
        // exhaustive oracle over all 2^12 labelings
        let rows = d.rows();
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << rows.len()) {
            let labels: Vec<usize> = (0..rows.len()).map(|i| ((mask >> i) & 1) as usize).collect();
            let mut cost = 0.0;
            for c in 0..2 {
                let members: Vec<&Vec<f64>> = rows.iter().zip(&labels).filter(|(_, &l)| l == c).map(|(r, _)| r).collect();
                if members.is_empty() {
                    continue;
                }
                let m: Vec<f64> = (0..2).map(|j| members.iter().map(|r| r[j]).sum::<f64>() / members.len() as f64).collect();
                cost += members.iter().map(|r| sq_dist(r, &m)).sum::<f64>();
            }
            best = best.min(cost);
        }
        assert!((r.inertia - best).abs() < 1e-9);
    }

    #[test]
    fn duplicates_give_zero_inertia() {
        let rows = vec![vec![1.0], vec![5.0], vec![1.0], vec![5.0], vec![9.0]];
        let r = kmeans(&Dataset::new(rows, None).unwrap(), 3, 4, &mut seed::rng(2)).unwrap();
        assert_eq!(r.inertia, 0.0);
    }

    #[test]
    fn inertia_never_increases() {
        for s in 0..20 {
            let (d, _) = blobs(&[(0.0, 0.0), (2.0, 1.0), (1.0, 3.0)], 30, 1.0, s);
            let r = kmeans(&d, 3, 1, &mut seed::rng(s + 100)).unwrap();
            assert!(r.inertia_trace.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{:?}", r.inertia_trace);
        }
    }

    #[test]
    fn errors_and_determinism() {
        let (d, _) = blobs(&[(0.0, 0.0)], 3, 1.0, 0);
        assert!(kmeans(&d, 4, 1, &mut seed::rng(0)).is_err());
        assert!(kmeans(&d, 0, 1, &mut seed::rng(0)).is_err());
        let (d, _) = blobs(&[(0.0, 0.0), (3.0, 0.0)], 20, 1.0, 9);
        assert_eq!(kmeans(&d, 2, 3, &mut seed::rng(5)).unwrap(), kmeans(&d, 2, 3, &mut seed::rng(5)).unwrap());
    }
}
