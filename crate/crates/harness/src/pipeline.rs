//! The five pipeline stages. Each stage reads the previous stage's files
//! from the output directory, so any stage can be rerun on its own.
//!
//! ```text
//! <out>/<scenario>/rep_<r>/cohort.jsonl
//!                         /features_<method>.csv   FT, FE, PCA+FE, PCA+FT
//!                         /rewards_<engine>.csv    PROJ, MLIRL, GPIRL
//!                         /scores.csv
//! <out>/metrics.csv, fig<k>_*.csv, provenance.json, config.toml
//! ```

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use bpr_core::agents::{read_cohort_jsonl, write_cohort_jsonl, AgentRecord, ObservationSet};
use bpr_core::features::{feature_expectation, feature_trajectory_cohort, pca_project, FeatureVector};
use bpr_core::irl::{infer_rewards, RewardLayout};
use bpr_core::pattern::{clustering_accuracy, cross_validate, kmeans, nmi, Dataset};
use bpr_core::{seed, Execution};

use crate::config::{ExperimentConfig, Method};
use crate::report::{self, ExperimentReport};
use crate::scenario::{scenarios, Scenario, World};
use crate::table::{read_scores, write_scores, FeatureRow, FeatureTable, ScoreRow};

pub fn rep_dir(config: &ExperimentConfig, scenario: &str, replication: usize) -> PathBuf {
    config.output_dir.join(scenario).join(format!("rep_{replication:03}"))
}

fn cells(config: &ExperimentConfig) -> Vec<(Scenario, usize)> {
    scenarios(config)
        .into_iter()
        .flat_map(|s| (0..config.replications).map(move |r| (s.clone(), r)))
        .collect()
}

fn read_cohort(dir: &Path) -> Result<Vec<AgentRecord>> {
    let path = dir.join("cohort.jsonl");
    let file = File::open(&path).with_context(|| format!("opening {} (run `simulate` first)", path.display()))?;
    Ok(read_cohort_jsonl(BufReader::new(file))?)
}

pub fn simulate(config: &ExperimentConfig, exec: Execution) -> Result<()> {
    let world = World::new(config)?;
    for (scenario, rep) in cells(config) {
        let cohort = scenario.simulate(config, &world, rep, exec)?;
        let dir = rep_dir(config, &scenario.name, rep);
        fs::create_dir_all(&dir)?;
        let path = dir.join("cohort.jsonl");
        let mut out = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        write_cohort_jsonl(&cohort, &mut out)?;
        log::info!("simulated {} agents for {} replication {rep}", cohort.len(), scenario.name);
    }
    Ok(())
}

fn numbered(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// Table from per-agent outcomes at each sweep point; the value columns
/// come from the first successful row.
fn assemble(
    cohort: &[AgentRecord],
    per_sweep: Vec<(usize, Vec<std::result::Result<Vec<f64>, String>>)>,
    columns: impl FnOnce(usize) -> Vec<String>,
) -> FeatureTable {
    let dim = per_sweep
        .iter()
        .flat_map(|(_, v)| v.iter())
        .find_map(|r| r.as_ref().ok().map(Vec::len))
        .unwrap_or(0);
    let rows = per_sweep
        .into_iter()
        .flat_map(|(sweep, outcomes)| {
            cohort.iter().zip(outcomes).map(move |(agent, values)| FeatureRow {
                sweep,
                agent_id: agent.agent_id,
                label: agent.label,
                values,
            })
        })
        .collect();
    FeatureTable {
        columns: columns(dim),
        rows,
    }
}

/// Action-space representation of one cohort prefix.
pub fn action_features(
    method: Method,
    observations: &[&ObservationSet],
    config: &ExperimentConfig,
    world: &World,
) -> Vec<std::result::Result<Vec<f64>, String>> {
    let all_or_error = |r: bpr_core::Result<Vec<FeatureVector>>| match r {
        Ok(v) => v.into_iter().map(|f| Ok(f.values)).collect(),
        Err(e) => vec![Err(e.to_string()); observations.len()],
    };
    let ft = || feature_trajectory_cohort(observations, world.ft_horizon, config.features.ft_normalization);
    let fe = || {
        observations
            .iter()
            .map(|o| feature_expectation(o, &world.basis, world.discount()))
            .collect::<bpr_core::Result<Vec<_>>>()
    };
    let pca = |base: bpr_core::Result<Vec<FeatureVector>>, c: usize| {
        base.and_then(|v| {
            let keep = c.min(v.first().map_or(0, |f| f.values.len()));
            pca_project(&v, keep).map(|p| p.vectors)
        })
    };
    match method {
        Method::Ft => all_or_error(ft()),
        Method::Fe => all_or_error(fe()),
        Method::PcaFt => all_or_error(pca(ft(), config.features.pca_components_ft)),
        Method::PcaFe => all_or_error(pca(fe(), config.features.pca_components_fe)),
        _ => unreachable!("IRL methods are handled by the irl stage"),
    }
}

pub fn featurize(config: &ExperimentConfig) -> Result<()> {
    let world = World::new(config)?;
    for (scenario, rep) in cells(config) {
        let dir = rep_dir(config, &scenario.name, rep);
        let cohort = read_cohort(&dir)?;
        for &method in config.methods.iter().filter(|m| !m.is_irl()) {
            let per_sweep = config
                .sweep
                .iter()
                .map(|&h| {
                    let subsets: Vec<ObservationSet> = cohort.iter().map(|a| a.observations.truncated(h)).collect();
                    let refs: Vec<&ObservationSet> = subsets.iter().collect();
                    (h, action_features(method, &refs, config, &world))
                })
                .collect();
            let prefix = if matches!(method, Method::PcaFe | Method::PcaFt) { "pc" } else { "f" };
            assemble(&cohort, per_sweep, |d| numbered(prefix, d)).write(&dir.join(method.file_name()))?;
        }
    }
    Ok(())
}

pub fn irl(config: &ExperimentConfig, exec: Execution) -> Result<()> {
    let world = World::new(config)?;
    let (s, a) = (world.mdp.num_states(), world.mdp.num_actions());
    for (scenario, rep) in cells(config) {
        let dir = rep_dir(config, &scenario.name, rep);
        let cohort = read_cohort(&dir)?;
        for &method in config.methods.iter().filter(|m| m.is_irl()) {
            let engine = world.engine(method, config).expect("IRL method");
            let layout = match method {
                Method::Gpirl => RewardLayout::PerStateAction,
                Method::Mlirl => config.irl.mlirl.layout,
                _ => RewardLayout::PerState,
            };
            let per_sweep = config
                .sweep
                .iter()
                .map(|&h| {
                    let subset: Vec<AgentRecord> = cohort.iter().map(|r| r.truncated(h)).collect();
                    let outcomes = infer_rewards(&subset, &engine, &world.mdp, exec)
                        .into_iter()
                        .map(|r| r.outcome.map(|(f, _)| f.values).map_err(|e| e.to_string()))
                        .collect::<Vec<_>>();
                    let failed = outcomes.iter().filter(|o| o.is_err()).count();
                    if failed > 0 {
                        log::warn!("{method} failed for {failed} agents ({} rep {rep}, sweep {h})", scenario.name);
                    }
                    (h, outcomes)
                })
                .collect();
            assemble(&cohort, per_sweep, |_| layout.header(s, a)).write(&dir.join(method.file_name()))?;
            log::info!("{method} rewards for {} replication {rep}", scenario.name);
        }
    }
    Ok(())
}

/// Scores of one method at one sweep point. A failed agent fails the cell.
fn score_cell(
    config: &ExperimentConfig,
    rows: &[&FeatureRow],
    num_groups: usize,
    seed_path: &[u64],
    exec: Execution,
) -> Vec<(String, std::result::Result<f64, String>)> {
    let rec = &config.recognition;
    let metrics: Vec<String> = if config.kind.is_clustering() {
        vec!["nmi".into(), "accuracy".into()]
    } else {
        rec.classifiers
            .iter()
            .map(|c| format!("accuracy_{}", c.name().to_lowercase()))
            .collect()
    };
    let fail = |msg: String| metrics.iter().map(|m| (m.clone(), Err(msg.clone()))).collect();
    let vectors: std::result::Result<Vec<Vec<f64>>, String> =
        rows.iter().map(|r| r.values.clone()).collect();
    let labels: Option<Vec<usize>> = rows.iter().map(|r| r.label).collect();
    let (vectors, labels) = match (vectors, labels) {
        (Ok(v), Some(l)) if !v.is_empty() => (v, l),
        (Err(e), _) => return fail(format!("feature extraction failed: {e}")),
        (_, None) => return fail("unlabeled agents".into()),
        _ => return fail("no agents at this sweep point".into()),
    };
    let data = match Dataset::new(vectors, Some(labels.clone())) {
        Ok(d) => d,
        Err(e) => return fail(e.to_string()),
    };
    let derive = |extra: &[u64]| seed::derive(config.seed, &[seed_path, extra].concat());
    if config.kind.is_clustering() {
        let mut rng = seed::rng(derive(&[seed::tag("kmeans")]));
        match kmeans(&data, num_groups, rec.kmeans_restarts, &mut rng) {
            Ok(c) => vec![
                ("nmi".into(), nmi(&c.assignments, &labels).map_err(|e| e.to_string())),
                (
                    "accuracy".into(),
                    clustering_accuracy(&c.assignments, &labels).map_err(|e| e.to_string()),
                ),
            ],
            Err(e) => fail(e.to_string()),
        }
    } else {
        rec.classifiers
            .iter()
            .zip(metrics)
            .map(|(&kind, metric)| {
                let s = derive(&[seed::tag("cv"), seed::tag(kind.name())]);
                let r = cross_validate(&data, kind, &rec.classifier, rec.folds, rec.cv_replications, s, exec);
                (metric, r.map(|r| r.mean).map_err(|e| e.to_string()))
            })
            .collect()
    }
}

pub fn recognize(config: &ExperimentConfig, exec: Execution) -> Result<()> {
    for (scenario, rep) in cells(config) {
        let dir = rep_dir(config, &scenario.name, rep);
        let mut scores = Vec::new();
        for &method in &config.methods {
            let table = FeatureTable::read(&dir.join(method.file_name()))
                .with_context(|| format!("{method} features missing (run `featurize`/`irl` first)"))?;
            for &h in &config.sweep {
                let path = [seed::tag(&scenario.name), rep as u64, h as u64, seed::tag(method.name())];
                for (metric, value) in score_cell(config, &table.at_sweep(h), scenario.num_groups(), &path, exec) {
                    scores.push(ScoreRow {
                        method: method.name().into(),
                        sweep: h,
                        metric,
                        value,
                    });
                }
            }
        }
        write_scores(&scores, &dir.join("scores.csv"))?;
    }
    Ok(())
}

/// Aggregate the replications' scores and write the report files.
pub fn report(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut per_scenario = Vec::new();
    for scenario in scenarios(config) {
        let mut reps = Vec::new();
        for rep in 0..config.replications {
            reps.push(read_scores(&rep_dir(config, &scenario.name, rep).join("scores.csv"))?);
        }
        per_scenario.push((scenario.name, reps));
    }
    let report = ExperimentReport::aggregate(config, &per_scenario);
    report::write_all(config, &report)?;
    Ok(report)
}

/// All stages in order.
pub fn run_experiment(config: &ExperimentConfig, exec: Execution) -> Result<ExperimentReport> {
    config.validate()?;
    fs::create_dir_all(&config.output_dir)
        .with_context(|| format!("creating {}", config.output_dir.display()))?;
    simulate(config, exec)?;
    featurize(config)?;
    irl(config, exec)?;
    recognize(config, exec)?;
    report(config)
}
