//! Configuration, seeded orchestration, persistence and the pass/fail report.

mod config;
pub mod persist;
mod run;
mod verify;

pub use config::{ChainSettings, ExperimentConfig, ExperimentKind, Overrides, Sizes};
pub use run::run_experiment;
pub use verify::{expected_metrics, verify_acceptance, verify_in, AcceptanceReport};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// How `value` is judged against `comparator`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// |value − comparator| ≤ tolerance
    Within,
    /// value ≤ comparator + tolerance
    AtMost,
    /// value ≥ comparator − tolerance
    AtLeast,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub metric: String,
    pub value: f64,
    pub comparator: f64,
    pub tolerance: f64,
    pub rule: Rule,
    /// Where the comparator comes from.
    pub source: String,
    pub pass: bool,
}

impl ResultRecord {
    pub fn new(metric: &str, value: f64, comparator: f64, tolerance: f64, rule: Rule, source: &str) -> Self {
        let mut r = ResultRecord {
            metric: metric.to_string(),
            value,
            comparator,
            tolerance,
            rule,
            source: source.to_string(),
            pass: false,
        };
        r.pass = r.evaluate();
        r
    }

    /// Recomputes the verdict from the stored numbers (NaN never passes).
    pub fn evaluate(&self) -> bool {
        match self.rule {
            Rule::Within => (self.value - self.comparator).abs() <= self.tolerance,
            Rule::AtMost => self.value <= self.comparator + self.tolerance,
            Rule::AtLeast => self.value >= self.comparator - self.tolerance,
        }
    }

    pub fn describe_rule(&self) -> String {
        match self.rule {
            Rule::Within => format!("|value - {}| <= {}", self.comparator, self.tolerance),
            Rule::AtMost => format!("value <= {}", self.comparator + self.tolerance),
            Rule::AtLeast => format!("value >= {}", self.comparator - self.tolerance),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultFile {
    /// Relative to the run's output directory.
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Complete,
    Failed { stage: String, message: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub version: String,
    pub started_unix: f64,
    pub wall_clock_seconds: f64,
    pub stage_seeds: BTreeMap<String, u64>,
    pub files: Vec<ResultFile>,
    pub records: Vec<ResultRecord>,
    /// Spin configurations whose constraint was checked.
    pub configurations_checked: usize,
    pub status: RunStatus,
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const RESULTS_FILE: &str = "results.csv";

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        persist::read_json(path)
    }

    pub fn dir(&self) -> &Path {
        &self.config.out
    }

    pub fn record(&self, metric: &str) -> Option<&ResultRecord> {
        self.records.iter().find(|r| r.metric == metric)
    }
}

/// Writes the record table (summary CSV) and the manifest itself; the
/// table's digest is added to the manifest before it is written.
pub fn persist_results(records: &[ResultRecord], manifest: &mut RunManifest) -> Result<PathBuf> {
    use persist::Field;
    let dir = manifest.dir().to_path_buf();
    let rows: Vec<Vec<Field>> = records
        .iter()
        .map(|r| {
            vec![
                r.metric.as_str().into(),
                r.value.into(),
                r.comparator.into(),
                r.tolerance.into(),
                serde_json::to_value(r.rule).expect("unit enum").as_str().unwrap_or_default().into(),
                r.pass.into(),
                r.source.as_str().into(),
            ]
        })
        .collect();
    let table = dir.join(RESULTS_FILE);
    persist::write_csv(&table, &["metric", "value", "comparator", "tolerance", "rule", "pass", "source"], &rows)?;
    manifest.files.retain(|f| f.path != Path::new(RESULTS_FILE));
    manifest.files.push(ResultFile { path: RESULTS_FILE.into(), sha256: persist::sha256_file(&table)? });
    manifest.records = records.to_vec();
    let path = dir.join(MANIFEST_FILE);
    persist::write_json(&path, manifest)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rules() {
        assert!(ResultRecord::new("a", 0.76, 0.75, 0.02, Rule::Within, "s").pass);
        assert!(!ResultRecord::new("a", 0.78, 0.75, 0.02, Rule::Within, "s").pass);
        assert!(ResultRecord::new("a", 0.04, 0.0, 0.05, Rule::AtMost, "s").pass);
        assert!(!ResultRecord::new("a", 0.04, 0.05, 0.0, Rule::AtLeast, "s").pass);
        assert!(!ResultRecord::new("a", f64::NAN, 0.0, 1.0, Rule::AtMost, "s").pass);
    }
}
