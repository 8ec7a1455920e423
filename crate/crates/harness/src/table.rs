//! CSV tables passed between pipeline stages.
//!
//! Floats are written in Rust's shortest round-trip form, so reading a table
//! back reproduces the exact values that were written.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};

/// One agent's vector at one sweep point. `Err` keeps the failure message.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub sweep: usize,
    pub agent_id: usize,
    pub label: Option<usize>,
    pub values: std::result::Result<Vec<f64>, String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureTable {
    /// Names of the value columns.
    pub columns: Vec<String>,
    pub rows: Vec<FeatureRow>,
}

const FIXED: [&str; 4] = ["sweep", "agent_id", "label", "status"];

impl FeatureTable {
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
        w.write_record(FIXED.iter().copied().chain(self.columns.iter().map(String::as_str)))?;
        for row in &self.rows {
            let mut rec = vec![
                row.sweep.to_string(),
                row.agent_id.to_string(),
                row.label.map_or_else(String::new, |l| l.to_string()),
            ];
            match &row.values {
                Ok(v) => {
                    rec.push("ok".into());
                    rec.extend(v.iter().map(|x| x.to_string()));
                }
                Err(msg) => {
                    rec.push(format!("error: {msg}"));
                    rec.extend(std::iter::repeat_n(String::new(), self.columns.len()));
                }
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
        let header = r.headers()?.clone();
        if header.len() < FIXED.len() || header.iter().take(FIXED.len()).ne(FIXED) {
            bail!("{}: unexpected header", path.display());
        }
        let columns: Vec<String> = header.iter().skip(FIXED.len()).map(String::from).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let field = |i: usize| rec.get(i).ok_or_else(|| anyhow!("{}: short record", path.display()));
            let label = match field(2)? {
                "" => None,
                s => Some(s.parse()?),
            };
            let status = field(3)?;
            let values = if status == "ok" {
                Ok(rec.iter().skip(FIXED.len()).map(str::parse).collect::<std::result::Result<Vec<f64>, _>>()?)
            } else {
                Err(status.strip_prefix("error: ").unwrap_or(status).to_string())
            };
            rows.push(FeatureRow {
                sweep: field(0)?.parse()?,
                agent_id: field(1)?.parse()?,
                label,
                values,
            });
        }
        Ok(FeatureTable { columns, rows })
    }

    /// Rows of one sweep point, in agent order.
    pub fn at_sweep(&self, sweep: usize) -> Vec<&FeatureRow> {
        self.rows.iter().filter(|r| r.sweep == sweep).collect()
    }
}

/// One recognition score of one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub method: String,
    pub sweep: usize,
    pub metric: String,
    pub value: std::result::Result<f64, String>,
}

pub fn write_scores(rows: &[ScoreRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(["method", "sweep", "metric", "value", "status"])?;
    for row in rows {
        let (value, status) = match &row.value {
            Ok(v) => (v.to_string(), "ok".to_string()),
            Err(msg) => (String::new(), format!("error: {msg}")),
        };
        w.write_record([row.method.clone(), row.sweep.to_string(), row.metric.clone(), value, status])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_scores(path: &Path) -> Result<Vec<ScoreRow>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 5 {
            bail!("{}: expected 5 fields", path.display());
        }
        let value = if &rec[4] == "ok" {
            Ok(rec[3].parse()?)
        } else {
            Err(rec[4].strip_prefix("error: ").unwrap_or(&rec[4]).to_string())
        };
        rows.push(ScoreRow {
            method: rec[0].to_string(),
            sweep: rec[1].parse()?,
            metric: rec[2].to_string(),
            value,
        });
    }
    Ok(rows)
}
