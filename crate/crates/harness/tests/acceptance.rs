//! Acceptance suite: one test per criterion, each printing a single
//! `criterion N: PASS|FAIL` line followed by indented details.
//!
//! Criteria 1-4 run desk-scale experiments (minutes each) and are ignored by
//! default:
//!
//! ```text
//! cargo test --release -p bpr-harness --test acceptance -- --include-ignored --nocapture --test-threads 1
//! ```

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use bpr_core::agents::ObservationSet;
use bpr_core::agents::Trajectory;
use bpr_core::env::{build_secretary_mdp, reject_transition, SecretarySpec};
use bpr_core::features::Basis;
use bpr_core::irl::{
    proj_fit, GpHyper, GpirlObjective, GpirlOptions, IrlProblem, MlirlObjective, MlirlOptions, ProjOptions,
    RewardLayout, RewardPrior,
};
use bpr_core::mdp::{bellman_backup, value_iteration, Mdp, Reward};
use bpr_core::pattern::{
    clustering_accuracy, kmeans, nmi, train_classifier, ClassifierKind, ClassifierParams, Dataset,
};
use bpr_core::seed::{self, Rng};
use bpr_core::Execution;
use bpr_harness::config::{ExperimentConfig, ExperimentKind, Method, Profile};
use bpr_harness::dp::{secretary_dp_oracle, simulate_cutoff};
use bpr_harness::{run_experiment, ExperimentReport};
use num_rational::Ratio;
use rand::Rng as _;

fn verdict(criterion: &str, title: &str, pass: bool, details: &[String]) {
    println!("criterion {criterion}: {} — {title}", if pass { "PASS" } else { "FAIL" });
    for d in details {
        println!("    {d}");
    }
    assert!(pass, "criterion {criterion} failed");
}

fn run_desk(kind: ExperimentKind, edit: impl FnOnce(&mut ExperimentConfig)) -> (ExperimentReport, f64) {
    let dir = tempfile::tempdir().unwrap();
    let mut config = ExperimentConfig::preset(kind, Profile::Desk);
    config.output_dir = dir.path().to_path_buf();
    edit(&mut config);
    let start = Instant::now();
    let report = run_experiment(&config, Execution::Parallel).unwrap();
    assert_eq!(report.failed_cells(), 0, "experiment cells failed");
    (report, start.elapsed().as_secs_f64())
}

fn mean(report: &ExperimentReport, experiment: &str, method: &str, sweep: usize, metric: &str) -> f64 {
    report
        .get(experiment, method, sweep, metric)
        .unwrap_or_else(|| panic!("missing {experiment}/{method}/{sweep}/{metric}"))
        .mean
}

#[test]
#[ignore = "desk-scale experiment; run with --include-ignored"]
fn criterion_1_gridworld_clustering_trend() {
    let (report, secs) = run_desk(ExperimentKind::GridworldCluster, |_| {});
    let exp = "gridworld-cluster";
    let baselines = ["FE", "FT", "PROJ"];
    let mut pass = secs <= 1800.0;
    let mut details = vec![format!("runtime {secs:.0} s (limit 1800 s)")];
    for o in [4, 16, 40, 100] {
        let g = mean(&report, exp, "GPIRL", o, "nmi");
        let mut line = format!("|O|={o:3}: GPIRL {g:.4}");
        for b in baselines {
            let v = mean(&report, exp, b, o, "nmi");
            line += &format!("  {b} {v:.4}");
            if v > 0.3 {
                pass = false;
                line += " (>0.3)";
            }
            if o >= 16 && g <= v {
                pass = false;
                line += " (GPIRL not above)";
            }
        }
        if o >= 40 && g < 0.5 {
            pass = false;
            line += "  GPIRL < 0.5";
        }
        details.push(line);
    }
    verdict("1", "GridWorld clustering NMI trend", pass, &details);
}

#[test]
#[ignore = "desk-scale experiment; run with --include-ignored"]
fn criterion_2_gridworld_classification() {
    let (report, _) = run_desk(ExperimentKind::GridworldClassify, |c| {
        c.sweep = vec![40];
        c.methods = vec![Method::Fe, Method::Gpirl];
    });
    let mut pass = true;
    let mut details = Vec::new();
    for kind in ClassifierKind::ALL {
        let metric = format!("accuracy_{}", kind.name().to_lowercase());
        let g = mean(&report, "gridworld-classify", "GPIRL", 40, &metric);
        let f = mean(&report, "gridworld-classify", "FE", 40, &metric);
        let ok = g - f >= 0.10;
        pass &= ok;
        details.push(format!(
            "{}: GPIRL {:.4}  FE {:.4}  margin {:+.1} points{}",
            kind.name(),
            g,
            f,
            100.0 * (g - f),
            if ok { "" } else { " (< 10)" }
        ));
    }
    verdict("2", "GridWorld classification, GPIRL vs FE at |O|=40", pass, &details);
}

#[test]
#[ignore = "desk-scale experiment; run with --include-ignored"]
fn criterion_3_secretary_across_rules() {
    let (report, secs) = run_desk(ExperimentKind::SecretaryAcrossRules, |_| {});
    let exp = "secretary-across-rules";
    let mut pass = secs <= 600.0;
    let mut details = vec![format!("runtime {secs:.0} s (limit 600 s)")];
    for kind in ClassifierKind::ALL {
        let metric = format!("accuracy_{}", kind.name().to_lowercase());
        let g = report.get(exp, "GPIRL", 50, &metric).unwrap();
        let fe = mean(&report, exp, "FE", 50, &metric);
        let ft = mean(&report, exp, "FT", 50, &metric);
        let ok = g.mean == 1.0 && g.std == 0.0 && fe >= 0.99;
        pass &= ok;
        details.push(format!(
            "{}: GPIRL {:.4} ± {:.4}  FE {:.4}  (FT {:.4}){}",
            kind.name(),
            g.mean,
            g.std,
            fe,
            ft,
            if ok { "" } else { "  <- below target" }
        ));
    }
    verdict("3", "secretary across-rule classification at H=50", pass, &details);
}

#[test]
#[ignore = "desk-scale experiment; run with --include-ignored"]
fn criterion_4_secretary_within_rule() {
    let (report, _) = run_desk(ExperimentKind::SecretaryWithinRule, |_| {});
    let mut pass = true;
    let mut details = Vec::new();
    for rule in ["CR", "SNCCR", "CCR"] {
        let exp = format!("secretary-within-rule-{rule}");
        let mut line = format!("{rule:5}");
        for h in [1, 11, 21, 31, 41, 51] {
            let g = mean(&report, &exp, "GPIRL", h, "nmi");
            let a = mean(&report, &exp, "FE", h, "nmi");
            line += &format!("  H={h}: {g:.3}/{a:.3}");
            let checked = rule != "CCR";
            if checked && g < a {
                pass = false;
                line += "(reward<action)";
            }
            if rule == "CR" && h >= 41 && g < 0.85 {
                pass = false;
                line += "(<0.85)";
            }
        }
        if rule == "CCR" {
            line += "  [informational]";
        }
        details.push(line);
    }
    details.push("values are reward-space (GPIRL) / action-space (FE) mean NMI".into());
    verdict("4", "secretary within-rule clustering", pass, &details);
}

#[test]
fn criterion_5_optimal_stopping_oracle() {
    let o = secretary_dp_oracle(100);
    let e = std::f64::consts::E;
    let (hits, n) = simulate_cutoff(100, o.cutoff, 100_000, 0);
    let rate = hits as f64 / n as f64;
    let sigma = (o.success * (1.0 - o.success) / n as f64).sqrt();
    let checks = [
        (o.success - 1.0 / e).abs() <= 0.02,
        ((o.cutoff - 1) as f64 - 100.0 / e).abs() <= 2.0,
        (rate - o.success).abs() <= 3.0 * sigma,
    ];
    verdict(
        "5",
        "optimal-stopping oracle",
        checks.iter().all(|&c| c),
        &[
            format!("DP: h* = {}, success = {:.6} (1/e = {:.6})", o.cutoff, o.success, 1.0 / e),
            format!(
                "Monte Carlo: {hits}/{n} = {rate:.6}, |Δ| = {:.2}σ",
                (rate - o.success).abs() / sigma
            ),
        ],
    );
}

// ---------------------------------------------------------------------------
// Criterion 6: property suites.

fn random_mdp(rng: &mut Rng, s: usize, a: usize, gamma: f64) -> Mdp {
    let transitions = (0..a)
        .map(|_| {
            (0..s)
                .map(|_| {
                    // Sparse-ish rows: each successor kept with probability 1/2.
                    let mut row: Vec<f64> =
                        (0..s).map(|_| if rng.random_bool(0.5) { rng.random::<f64>() } else { 0.0 }).collect();
                    let j = rng.random_range(0..s);
                    row[j] += 0.1;
                    let total: f64 = row.iter().sum();
                    row.iter().map(|x| x / total).collect()
                })
                .collect()
        })
        .collect();
    let mut initial = vec![0.0; s];
    initial[0] = 1.0;
    Mdp::new(transitions, gamma, initial).unwrap()
}

fn random_observations(rng: &mut Rng, s: usize, a: usize, trajectories: usize, len: usize) -> ObservationSet {
    ObservationSet::new(
        (0..trajectories)
            .map(|_| Trajectory {
                steps: (0..len).map(|_| (rng.random_range(0..s), rng.random_range(0..a))).collect(),
            })
            .collect(),
    )
}

fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic.iter().zip(numeric).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = analytic.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-8);
    diff / scale
}

fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut p = x.to_vec();
            let mut m = x.to_vec();
            p[i] += h;
            m[i] -= h;
            (f(&p) - f(&m)) / (2.0 * h)
        })
        .collect()
}

fn bellman_residuals() -> (bool, String) {
    let mut rng = seed::rng(61);
    let tol = 1e-8;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let s = rng.random_range(2..30);
        let a = rng.random_range(1..5);
        let gamma = rng.random_range(0.0..0.99);
        let r: Vec<f64> = (0..s).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mdp = random_mdp(&mut rng, s, a, gamma).with_reward(Reward::PerState(r)).unwrap();
        let v = value_iteration(&mdp, tol, 100_000).unwrap();
        assert!(v.converged);
        let tv = bellman_backup(&mdp, &v.values.values).unwrap();
        let res = tv.iter().zip(&v.values.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        worst = worst.max(res);
    }
    (worst <= tol, format!("Bellman residual: max {worst:.2e} over 100 random MDPs (tol {tol:.0e})"))
}

fn secretary_rows_exact() -> (bool, String) {
    let mut ok = true;
    for x in 2..=12usize {
        for i in 1..=x {
            let mut total = Ratio::new(0u64, 1);
            for j in i + 1..=x {
                let (n, d) = reject_transition(i, Some(j), x);
                total += Ratio::new(n, d);
            }
            let (n, d) = reject_transition(i, None, x);
            total += Ratio::new(n, d);
            ok &= total == Ratio::from_integer(1);
        }
        // The floating kernel must carry the same numbers.
        let mdp = build_secretary_mdp(&SecretarySpec {
            num_applicants: x,
            ..SecretarySpec::default()
        })
        .unwrap();
        for i in 1..=x {
            for j in i + 1..=x {
                let (n, d) = reject_transition(i, Some(j), x);
                ok &= (mdp.prob(0, i - 1, j - 1) - n as f64 / d as f64).abs() < 1e-15;
            }
        }
    }
    (ok, "secretary reject rows sum to exactly 1 (rational) for X = 2..=12".into())
}

fn gradient_checks() -> (bool, String) {
    let mut rng = seed::rng(62);
    let (mut worst_ml, mut worst_gp): (f64, f64) = (0.0, 0.0);
    for _ in 0..10 {
        let (s, a) = (rng.random_range(2..7), rng.random_range(2..4));
        let mdp = random_mdp(&mut rng, s, a, 0.9);
        let obs = random_observations(&mut rng, s, a, 3, 4);

        let opts = MlirlOptions {
            layout: if rng.random_bool(0.5) { RewardLayout::PerState } else { RewardLayout::PerStateAction },
            ..MlirlOptions::default()
        };
        let prior = RewardPrior::Gaussian { mean: 0.0, std: 2.0 };
        let problem = IrlProblem::new(&mdp, &obs, prior).unwrap();
        let ml = MlirlObjective::new(&problem, &opts).unwrap();
        let theta: Vec<f64> = (0..ml.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = ml.evaluate(&theta).unwrap().gradient;
        let fd = central_difference(|t| ml.value(t).unwrap(), &theta, 1e-5);
        worst_ml = worst_ml.max(relative_error(&g, &fd));

        let coords: Vec<Vec<f64>> = (0..s).map(|i| vec![i as f64, (i * i % 3) as f64]).collect();
        let problem = IrlProblem::new(&mdp, &obs, RewardPrior::None).unwrap();
        let hyper = GpHyper::uniform(a, 0.5, 0.1);
        let gp = GpirlObjective::new(&problem, &coords, &hyper, &GpirlOptions::default()).unwrap();
        let r: Vec<f64> = (0..gp.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fd = central_difference(|x| gp.value(x), &r, 1e-5);
        worst_gp = worst_gp.max(relative_error(&gp.gradient(&r), &fd));
    }
    (
        worst_ml <= 1e-4 && worst_gp <= 1e-4,
        format!("FD gradients: MLIRL max rel err {worst_ml:.2e}, GPIRL {worst_gp:.2e} (10 points each, tol 1e-4)"),
    )
}

fn gpirl_convexity() -> (bool, String) {
    let mut rng = seed::rng(63);
    let (s, a) = (6, 3);
    let mdp = random_mdp(&mut rng, s, a, 0.9);
    let obs = random_observations(&mut rng, s, a, 4, 5);
    let coords: Vec<Vec<f64>> = (0..s).map(|i| vec![i as f64]).collect();
    let problem = IrlProblem::new(&mdp, &obs, RewardPrior::None).unwrap();
    let gp = GpirlObjective::new(&problem, &coords, &GpHyper::uniform(a, 0.5, 0.1), &GpirlOptions::default()).unwrap();
    let mut violations = 0;
    for _ in 0..50 {
        let x: Vec<f64> = (0..gp.dim()).map(|_| rng.random_range(-3.0..3.0)).collect();
        let y: Vec<f64> = (0..gp.dim()).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mid: Vec<f64> = x.iter().zip(&y).map(|(p, q)| 0.5 * (p + q)).collect();
        let chord = 0.5 * (gp.value(&x) + gp.value(&y));
        if gp.value(&mid) > chord + 1e-9 * (1.0 + chord.abs()) {
            violations += 1;
        }
    }
    (violations == 0, format!("GPIRL midpoint convexity: {violations} violations in 50 pairs"))
}

fn proj_margins() -> (bool, String) {
    let mut rng = seed::rng(64);
    let mut bad = 0;
    for _ in 0..20 {
        let (s, a) = (rng.random_range(3..10), rng.random_range(2..4));
        let mdp = random_mdp(&mut rng, s, a, 0.9);
        let obs = random_observations(&mut rng, s, a, 3, 5);
        let problem = IrlProblem::new(&mdp, &obs, RewardPrior::None).unwrap();
        let fit = proj_fit(&problem, &Basis::indicator(s), &ProjOptions::default()).unwrap();
        if fit.margins.windows(2).any(|w| w[1] > w[0] + 1e-12) {
            bad += 1;
        }
    }
    (bad == 0, format!("PROJ margins nonincreasing: {bad} of 20 random problems violate"))
}

fn metric_identities() -> (bool, String) {
    let close = |x: f64, y: f64| (x - y).abs() < 1e-12;
    let mut ok = true;
    // Hand-computed 4-point cases.
    ok &= close(nmi(&[0, 0, 1, 1], &[1, 1, 0, 0]).unwrap(), 1.0);
    ok &= close(nmi(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap(), 0.0);
    let (h_a, h_b) = (-(0.75f64 * 0.75f64.ln() + 0.25 * 0.25f64.ln()), 2.0f64.ln());
    let h_ab = -(0.5f64 * 0.5f64.ln() + 2.0 * 0.25 * 0.25f64.ln());
    ok &= close(nmi(&[0, 0, 0, 1], &[0, 0, 1, 1]).unwrap(), (h_a + h_b - h_ab) / (h_a * h_b).sqrt());
    ok &= close(clustering_accuracy(&[0, 0, 1, 1], &[1, 0, 0, 0]).unwrap(), 0.75);
    ok &= close(clustering_accuracy(&[2, 2, 5, 5], &[0, 0, 1, 1]).unwrap(), 1.0);
    // Symmetry and relabeling invariance on random labelings.
    let mut rng = seed::rng(65);
    for _ in 0..100 {
        let n = rng.random_range(2..40);
        let a: Vec<usize> = (0..n).map(|_| rng.random_range(0..4)).collect();
        let b: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let relabel: Vec<usize> = a.iter().map(|&x| (x + 1) % 4 + 10).collect();
        ok &= close(nmi(&a, &b).unwrap(), nmi(&b, &a).unwrap());
        ok &= close(nmi(&a, &b).unwrap(), nmi(&relabel, &b).unwrap());
        ok &= close(clustering_accuracy(&a, &b).unwrap(), clustering_accuracy(&relabel, &b).unwrap());
    }
    (ok, "NMI / clustering-accuracy identities and hand-computed cases".into())
}

fn kmeans_and_knn() -> (bool, String) {
    let mut rng = seed::rng(66);
    let mut ok = true;
    for _ in 0..20 {
        let n = rng.random_range(10..60);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random::<f64>(), rng.random::<f64>() * 3.0]).collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let data = Dataset::new(rows.clone(), Some(labels.clone())).unwrap();
        let c = kmeans(&data, 3, 1, &mut rng).unwrap();
        ok &= c.inertia_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12);
        let params = ClassifierParams {
            knn_k: 1,
            ..ClassifierParams::default()
        };
        let knn = train_classifier(ClassifierKind::Knn, &data, &params).unwrap();
        ok &= knn.predict(&rows) == labels;
    }
    (ok, "k-means inertia nonincreasing; 1-NN memorizes its training set".into())
}

fn end_to_end_determinism() -> (bool, String) {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/smoke.toml");
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        let status = Command::new(env!("CARGO_BIN_EXE_bpr"))
            .args(["--config", config.to_str().unwrap(), "run", "--seed", "7", "--out"])
            .arg(dir.path())
            .env("RUST_LOG", "error")
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(dir.path().join("metrics.csv")).unwrap()
    };
    let (a, b) = (run(), run());
    (a == b && !a.is_empty(), format!("`run --seed 7` twice: metrics.csv byte-identical ({} bytes)", a.len()))
}

#[test]
fn criterion_6_property_suites() {
    let start = Instant::now();
    let results = [
        bellman_residuals(),
        secretary_rows_exact(),
        gradient_checks(),
        gpirl_convexity(),
        proj_margins(),
        metric_identities(),
        kmeans_and_knn(),
        end_to_end_determinism(),
    ];
    let secs = start.elapsed().as_secs_f64();
    let mut details: Vec<String> = results
        .iter()
        .map(|(ok, msg)| format!("[{}] {msg}", if *ok { "ok" } else { "FAIL" }))
        .collect();
    details.push(format!("runtime {secs:.1} s (limit 300 s)"));
    let pass = results.iter().all(|(ok, _)| *ok) && secs <= 300.0;
    verdict("6", "property suites", pass, &details);
}
