use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub const HASH_PREFIX: &str = "# config_hash=";

/// Decimal for moderate magnitudes, exponent form otherwise; identical
/// inputs always print identically.
pub fn num(v: f64) -> String {
    if v == 0.0 || (1e-4..1e15).contains(&v.abs()) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Writes `<dir>/<stem>.csv`: the provenance line, the header, the rows.
pub fn write_csv(dir: &Path, stem: &str, hash: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf> {
    let path = dir.join(format!("{stem}.csv"));
    let mut file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    writeln!(file, "{HASH_PREFIX}{hash}")?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(path)
}

/// One experiment's outcome, stored next to its CSV as `<stem>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentRecord {
    pub name: String,
    pub csv: String,
    pub config_hash: String,
    pub params: Value,
    pub metrics: Map<String, Value>,
    pub pass: bool,
}

impl ExperimentRecord {
    pub fn new(name: &str, stem: &str, hash: &str, params: impl Serialize) -> Self {
        Self {
            name: name.to_string(),
            csv: format!("{stem}.csv"),
            config_hash: hash.to_string(),
            params: serde_json::to_value(params).expect("params serialize"),
            metrics: Map::new(),
            pass: true,
        }
    }

    pub fn metric(&mut self, key: &str, value: impl Serialize) {
        self.metrics
            .insert(key.to_string(), serde_json::to_value(value).expect("metric serializes"));
    }

    /// Records a named check and folds it into `pass`.
    pub fn check(&mut self, key: &str, ok: bool) {
        self.metric(&format!("check_{key}"), ok);
        self.pass &= ok;
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let stem = self.csv.trim_end_matches(".csv");
        let path = dir.join(format!("{stem}.json"));
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
