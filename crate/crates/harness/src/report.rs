//! Aggregated metrics, plot data and provenance.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use bpr_core::features::{pca_project, FeatureSource, FeatureVector};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, Method};
use crate::pipeline::rep_dir;
use crate::scenario::scenarios;
use crate::table::{FeatureTable, ScoreRow};

/// Mean and sample standard deviation of one metric over replications.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    pub experiment: String,
    pub method: String,
    pub sweep: usize,
    pub metric: String,
    /// NaN when every replication failed.
    pub mean: f64,
    pub std: f64,
    /// Replications that produced a value.
    pub replications: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    /// Sorted by experiment, method, sweep value and metric.
    pub rows: Vec<MetricRow>,
    pub config_hash: String,
}

fn method_rank(name: &str) -> usize {
    Method::ALL.iter().position(|m| m.name() == name).unwrap_or(usize::MAX)
}

/// SHA-256 of the resolved config, excluding the output location.
pub fn config_hash(config: &ExperimentConfig) -> String {
    hex::encode(Sha256::digest(located_nowhere(config).to_toml_string().as_bytes()))
}

fn located_nowhere(config: &ExperimentConfig) -> ExperimentConfig {
    ExperimentConfig {
        output_dir: PathBuf::new(),
        ..config.clone()
    }
}

impl ExperimentReport {
    /// `per_scenario[i] = (scenario name, scores of each replication)`.
    pub fn aggregate(config: &ExperimentConfig, per_scenario: &[(String, Vec<Vec<ScoreRow>>)]) -> Self {
        type Key = (String, usize, String, usize, String);
        let mut cells: BTreeMap<Key, Vec<&std::result::Result<f64, String>>> = BTreeMap::new();
        for (scenario, reps) in per_scenario {
            for scores in reps {
                for s in scores {
                    let key = (scenario.clone(), method_rank(&s.method), s.method.clone(), s.sweep, s.metric.clone());
                    cells.entry(key).or_default().push(&s.value);
                }
            }
        }
        let rows = cells
            .into_iter()
            .map(|((experiment, _, method, sweep, metric), values)| {
                let ok: Vec<f64> = values.iter().filter_map(|v| v.as_ref().ok().copied()).collect();
                let n = ok.len();
                let mean = if n == 0 { f64::NAN } else { ok.iter().sum::<f64>() / n as f64 };
                let std = match n {
                    0 => f64::NAN,
                    1 => 0.0,
                    _ => (ok.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt(),
                };
                MetricRow {
                    experiment,
                    method,
                    sweep,
                    metric,
                    mean,
                    std,
                    replications: n,
                    failed: values.len() - n,
                }
            })
            .collect();
        ExperimentReport {
            rows,
            config_hash: config_hash(config),
        }
    }

    pub fn get(&self, experiment: &str, method: &str, sweep: usize, metric: &str) -> Option<&MetricRow> {
        self.rows
            .iter()
            .find(|r| r.experiment == experiment && r.method == method && r.sweep == sweep && r.metric == metric)
    }

    /// Cells with at least one failed replication.
    pub fn failed_cells(&self) -> usize {
        self.rows.iter().filter(|r| r.failed > 0).count()
    }
}

fn fmt_value(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        x.to_string()
    }
}

pub fn write_metrics(config: &ExperimentConfig, report: &ExperimentReport) -> Result<PathBuf> {
    let path = config.output_dir.join("metrics.csv");
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(["experiment", "method", "sweep", "metric", "mean", "std", "replications", "failed"])?;
    for r in &report.rows {
        w.write_record([
            r.experiment.clone(),
            r.method.clone(),
            r.sweep.to_string(),
            r.metric.clone(),
            fmt_value(r.mean),
            fmt_value(r.std),
            r.replications.to_string(),
            r.failed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(path)
}

/// Per-figure series files (x = sweep value, one column per method) and
/// PCA scatter projections of the first replication's vectors at the
/// largest sweep value.
pub fn emit_plot_data(config: &ExperimentConfig, report: &ExperimentReport) -> Result<Vec<PathBuf>> {
    if report.rows.is_empty() {
        log::warn!("report has no methods; no plot data written");
        return Ok(Vec::new());
    }
    let mut written = Vec::new();
    let mut k = 0;
    let mut next_path = |name: String| {
        k += 1;
        config.output_dir.join(format!("fig{k}_{name}.csv"))
    };

    let mut series: BTreeMap<(&str, &str), Vec<&MetricRow>> = BTreeMap::new();
    for r in &report.rows {
        series.entry((&r.experiment, &r.metric)).or_default().push(r);
    }
    for ((experiment, metric), rows) in series {
        let mut methods: Vec<&str> = rows.iter().map(|r| r.method.as_str()).collect();
        methods.dedup();
        let mut sweeps: Vec<usize> = rows.iter().map(|r| r.sweep).collect();
        sweeps.sort_unstable();
        sweeps.dedup();
        let path = next_path(format!("{experiment}_{metric}"));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(std::iter::once("sweep").chain(methods.iter().copied()))?;
        for h in sweeps {
            let mut rec = vec![h.to_string()];
            for m in &methods {
                let v = rows.iter().find(|r| r.method == *m && r.sweep == h).map_or(f64::NAN, |r| r.mean);
                rec.push(fmt_value(v));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        written.push(path);
    }

    let h = config.max_sweep();
    for scenario in scenarios(config) {
        let dir = rep_dir(config, &scenario.name, 0);
        for &method in &config.methods {
            let table = FeatureTable::read(&dir.join(method.file_name()))?;
            let rows = table.at_sweep(h);
            let vectors: std::result::Result<Vec<FeatureVector>, _> = rows
                .iter()
                .map(|r| {
                    r.values.clone().map(|values| FeatureVector {
                        values,
                        source: FeatureSource::Reward,
                    })
                })
                .collect();
            let Ok(vectors) = vectors else {
                log::warn!("{method} has failed agents in {}; projection skipped", scenario.name);
                continue;
            };
            for &c in &config.recognition.projection_components {
                let projection = match pca_project(&vectors, c) {
                    Ok(p) => p,
                    Err(e) => {
                        log::warn!("{method} projection to {c} components skipped: {e}");
                        continue;
                    }
                };
                let path = next_path(format!("{}_{}_{c}d", scenario.name, method.slug()));
                let mut w = csv::Writer::from_path(&path)?;
                let header: Vec<String> = (1..=c).map(|i| format!("pc{i}")).chain(["label".into()]).collect();
                w.write_record(&header)?;
                for (v, row) in projection.vectors.iter().zip(&rows) {
                    let label = row.label.map_or_else(String::new, |l| l.to_string());
                    w.write_record(v.values.iter().map(|x| x.to_string()).chain([label]))?;
                }
                w.flush()?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

#[derive(Serialize)]
struct Provenance<'a> {
    config_hash: &'a str,
    seed: u64,
    kind: &'a str,
    profile: crate::config::Profile,
    replications: usize,
    versions: BTreeMap<&'static str, &'static str>,
    engines: Vec<&'static str>,
    action_featurizers: Vec<&'static str>,
    failed_cells: usize,
    config: ExperimentConfig,
}

pub fn write_provenance(config: &ExperimentConfig, report: &ExperimentReport) -> Result<PathBuf> {
    let provenance = Provenance {
        config_hash: &report.config_hash,
        seed: config.seed,
        kind: config.kind.name(),
        profile: config.profile,
        replications: config.replications,
        versions: BTreeMap::from([
            ("bpr-core", bpr_core::VERSION),
            ("bpr-harness", env!("CARGO_PKG_VERSION")),
        ]),
        engines: config.methods.iter().filter(|m| m.is_irl()).map(|m| m.name()).collect(),
        action_featurizers: config.methods.iter().filter(|m| !m.is_irl()).map(|m| m.name()).collect(),
        failed_cells: report.failed_cells(),
        config: located_nowhere(config),
    };
    let path = config.output_dir.join("provenance.json");
    let mut text = serde_json::to_string_pretty(&provenance)?;
    text.push('\n');
    fs::write(&path, text)?;
    Ok(path)
}

pub fn write_all(config: &ExperimentConfig, report: &ExperimentReport) -> Result<()> {
    fs::write(config.output_dir.join("config.toml"), located_nowhere(config).to_toml_string())?;
    write_metrics(config, report)?;
    emit_plot_data(config, report)?;
    write_provenance(config, report)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ExperimentKind, Profile};

    fn score(method: &str, sweep: usize, value: std::result::Result<f64, String>) -> ScoreRow {
        ScoreRow {
            method: method.into(),
            sweep,
            metric: "nmi".into(),
            value,
        }
    }

    #[test]
    fn aggregation_sorts_and_counts_failures() {
        let c = ExperimentConfig::preset(ExperimentKind::GridworldCluster, Profile::Desk);
        let reps = vec![
            vec![score("GPIRL", 40, Ok(0.5)), score("FE", 40, Ok(0.1)), score("FE", 4, Err("x".into()))],
            vec![score("GPIRL", 40, Ok(0.7)), score("FE", 40, Ok(0.1)), score("FE", 4, Err("y".into()))],
        ];
        let r = ExperimentReport::aggregate(&c, &[("g".into(), reps)]);
        let order: Vec<(&str, usize)> = r.rows.iter().map(|x| (x.method.as_str(), x.sweep)).collect();
        assert_eq!(order, vec![("FE", 4), ("FE", 40), ("GPIRL", 40)]);
        let g = r.get("g", "GPIRL", 40, "nmi").unwrap();
        assert!((g.mean - 0.6).abs() < 1e-15);
        assert!((g.std - 0.02f64.sqrt()).abs() < 1e-15);
        assert_eq!(r.get("g", "FE", 40, "nmi").unwrap().std, 0.0);
        let f = r.get("g", "FE", 4, "nmi").unwrap();
        assert!(f.mean.is_nan());
        assert_eq!((f.replications, f.failed), (0, 2));
        assert_eq!(r.failed_cells(), 1);
    }

    #[test]
    fn hash_ignores_output_location() {
        let mut c = ExperimentConfig::preset(ExperimentKind::GridworldCluster, Profile::Desk);
        let h = config_hash(&c);
        c.output_dir = "elsewhere".into();
        assert_eq!(config_hash(&c), h);
        c.seed = 1;
        assert_ne!(config_hash(&c), h);
    }

    #[test]
    fn empty_report_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = ExperimentConfig::preset(ExperimentKind::GridworldCluster, Profile::Desk);
        c.output_dir = dir.path().into();
        let r = ExperimentReport {
            rows: Vec::new(),
            config_hash: config_hash(&c),
        };
        assert!(emit_plot_data(&c, &r).unwrap().is_empty());
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
    }
}
