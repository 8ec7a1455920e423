//! Exact optimal-stopping oracle for the classical secretary problem.

use bpr_core::agents::{random_ranks, run_secretary_rule, selected_position, HeuristicRule, RuleKind};
use bpr_core::seed;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DpOracle {
    pub num_applicants: usize,
    /// Optimal cutoff: reject the first `h - 1` applicants.
    pub cutoff: usize,
    pub success: f64,
}

/// Probability that rejecting the first `k` applicants and then hiring the
/// next candidate selects the overall best.
pub fn cutoff_success(num_applicants: usize, k: usize) -> f64 {
    let x = num_applicants as f64;
    if k == 0 {
        return 1.0 / x;
    }
    let tail: f64 = (k + 1..=num_applicants).map(|j| 1.0 / (j - 1) as f64).sum();
    k as f64 / x * tail
}

/// Maximize [`cutoff_success`] over `k ∈ 0..X`; ties go to the smaller `k`.
///
/// # Panics
/// If `num_applicants < 2`.
pub fn secretary_dp_oracle(num_applicants: usize) -> DpOracle {
    assert!(num_applicants >= 2, "need at least two applicants");
    let (k, success) = (0..num_applicants)
        .map(|k| (k, cutoff_success(num_applicants, k)))
        .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
    DpOracle {
        num_applicants,
        cutoff: k + 1,
        success,
    }
}

/// Monte Carlo success rate of the cutoff rule `h` over `samples` random
/// orderings. Returns `(successes, samples)`.
pub fn simulate_cutoff(num_applicants: usize, cutoff: usize, samples: usize, master_seed: u64) -> (usize, usize) {
    let rule = HeuristicRule::new(RuleKind::Cr, cutoff as f64).expect("cutoff ≥ 1");
    let mut rng = seed::rng_at(master_seed, &[seed::tag("dp-monte-carlo")]);
    let hits = (0..samples)
        .filter(|_| {
            let ranks = random_ranks(num_applicants, &mut rng);
            let t = run_secretary_rule(&rule, &ranks, &mut rng).expect("valid permutation");
            ranks[selected_position(&t, num_applicants) - 1] == 1
        })
        .count();
    (hits, samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Success of every cutoff by enumerating all orderings.
    fn exhaustive(n: usize) -> Vec<f64> {
        fn perms(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
            if k == items.len() {
                out.push(items.clone());
                return;
            }
            for i in k..items.len() {
                items.swap(k, i);
                perms(items, k + 1, out);
                items.swap(k, i);
            }
        }
        let mut all = Vec::new();
        perms(&mut (1..=n).collect(), 0, &mut all);
        let mut rng = seed::rng(0);
        (1..=n)
            .map(|h| {
                let rule = HeuristicRule::new(RuleKind::Cr, h as f64).unwrap();
                let wins = all
                    .iter()
                    .filter(|r| {
                        let t = run_secretary_rule(&rule, r, &mut rng).unwrap();
                        r[selected_position(&t, n) - 1] == 1
                    })
                    .count();
                wins as f64 / all.len() as f64
            })
            .collect()
    }

    #[test]
    fn four_applicants() {
        let o = secretary_dp_oracle(4);
        assert_eq!(o.cutoff, 2);
        assert!((o.success - 11.0 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn two_applicants_tie_goes_to_smaller_cutoff() {
        assert_eq!(cutoff_success(2, 0), 0.5);
        assert_eq!(cutoff_success(2, 1), 0.5);
        assert_eq!(secretary_dp_oracle(2).cutoff, 1);
    }

    #[test]
    fn formula_matches_enumeration() {
        for n in 2..=7 {
            let exact = exhaustive(n);
            for (k, e) in exact.iter().enumerate() {
                assert!((cutoff_success(n, k) - e).abs() < 1e-12, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn hundred_applicants_near_asymptote() {
        let o = secretary_dp_oracle(100);
        assert!(((o.cutoff - 1) as f64 - 100.0 / std::f64::consts::E).abs() <= 2.0);
        assert!((o.success - (-1.0f64).exp()).abs() <= 0.02);
    }
}
