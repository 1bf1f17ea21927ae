//! Collects the per-experiment records of one output directory into
//! `summary.json`.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::{Map, Value};

use crate::experiments::EXPERIMENTS;
use crate::output::{ExperimentRecord, HASH_PREFIX};

#[derive(Debug, Serialize)]
pub struct Summary {
    pub config_hash: String,
    pub experiments: Vec<SummaryEntry>,
    pub acceptance: Acceptance,
    pub theta: Value,
}

#[derive(Debug, Serialize)]
pub struct SummaryEntry {
    pub name: String,
    pub params: Value,
    pub metrics: Map<String, Value>,
    pub pass: bool,
}

#[derive(Debug, Serialize)]
pub struct Acceptance {
    pub all: bool,
    pub failed: Vec<String>,
}

fn csv_hash(path: &Path) -> Result<String> {
    let text = std::fs::read_to_string(path).with_context(|| format!("missing artifact {}", path.display()))?;
    let first = text.lines().next().unwrap_or_default();
    match first.strip_prefix(HASH_PREFIX) {
        Some(h) => Ok(h.to_string()),
        None => bail!("{} does not start with a config hash line", path.display()),
    }
}

fn load_record(dir: &Path, stem: &str) -> Result<ExperimentRecord> {
    let path = dir.join(format!("{stem}.json"));
    let text = std::fs::read_to_string(&path).with_context(|| format!("missing artifact {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Builds the summary for `dir`, which must hold every experiment's CSV and
/// JSON produced under the config with hash `hash`.
pub fn build(dir: &Path, hash: &str) -> Result<Summary> {
    let mut experiments = Vec::new();
    let mut failed = Vec::new();
    let mut theta = Value::Null;
    for (name, stem) in EXPERIMENTS {
        let csv = dir.join(format!("{stem}.csv"));
        let found = csv_hash(&csv)?;
        if found != hash {
            bail!("{} was produced with config hash {found}, expected {hash}", csv.display());
        }
        let rec = load_record(dir, stem)?;
        if rec.config_hash != hash || rec.name != name {
            bail!("{stem}.json does not belong to this run");
        }
        if name == "fundamental-identity" {
            theta = rec.metrics.get("theta").cloned().unwrap_or(Value::Null);
        }
        if !rec.pass {
            failed.push(name.to_string());
        }
        experiments.push(SummaryEntry {
            name: rec.name,
            params: rec.params,
            metrics: rec.metrics,
            pass: rec.pass,
        });
    }
    Ok(Summary {
        config_hash: hash.to_string(),
        experiments,
        acceptance: Acceptance {
            all: failed.is_empty(),
            failed,
        },
        theta,
    })
}

pub fn write(dir: &Path, summary: &Summary) -> Result<()> {
    let path = dir.join("summary.json");
    let text = serde_json::to_string_pretty(summary)?;
    std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))
}
