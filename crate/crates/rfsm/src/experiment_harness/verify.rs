use std::path::Path;

use serde::{Deserialize, Serialize};

use super::persist::{fmt17, sha256_file};
use super::{ExperimentConfig, ExperimentKind, ResultRecord, Rule, RunManifest, RunStatus};

/// Metrics a run of this configuration must report.
pub fn expected_metrics(cfg: &ExperimentConfig) -> Vec<&'static str> {
    let (d, s) = (cfg.model.d, &cfg.sizes);
    let mut m = Vec::new();
    match cfg.kind {
        ExperimentKind::GibbsSample => {
            m.extend(["constraint_deviation_max", "split_rhat"]);
            if d <= 2 && s.n <= 200 {
                m.push("oracle_z_max");
            }
        }
        ExperimentKind::OverlapUnscaled => {
            m.push("constraint_deviation_max");
            if s.replicas == 1 {
                m.extend(["overlap_mean", "overlap_stdev", "overlap_mean_vs_maximizer"]);
            } else {
                m.push("overlap_mean_spread");
            }
        }
        ExperimentKind::OverlapScaled => {
            m.push("constraint_deviation_max");
            if s.replicas == 1 {
                m.push("overlap_bl_distance");
                if d == 1 {
                    m.push("overlap_mean_d1");
                }
            } else {
                m.push("overlap_mean_spread");
            }
        }
        ExperimentKind::Ultrametricity => m.push("violation_rate"),
        ExperimentKind::MetastateAw => m.extend(["constraint_deviation_max", "aw_total_variation"]),
        ExperimentKind::MetastateNs => {
            m.push("constraint_deviation_max");
            m.push(if d >= 2 { "occupation_max_diff" } else { "arcsine_ks" });
            m.push("gibbs_proxy_agreement");
        }
        ExperimentKind::WalkDiagnostics => {
            if d >= 2 {
                m.push("conditioning_pass_fraction");
            }
            if d >= 3 {
                m.push("conditioning_small_fraction");
                if s.horizon >= 20 {
                    m.push("escape_fraction");
                }
            } else {
                m.push("ball_revisit_fraction");
            }
        }
        ExperimentKind::PartitionCheck => m.extend(["equal_area_max_dev", "diameter_scaling_spread"]),
    }
    m
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceReport {
    pub kind: ExperimentKind,
    /// Verdicts recomputed from value, comparator, tolerance and rule.
    pub records: Vec<ResultRecord>,
    /// Run-level problems: failed stages, missing or altered result files.
    pub problems: Vec<String>,
}

impl AcceptanceReport {
    pub fn passed(&self) -> bool {
        self.problems.is_empty() && self.records.iter().all(|r| r.pass)
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }

    pub fn failures(&self) -> Vec<&str> {
        self.records.iter().filter(|r| !r.pass).map(|r| r.metric.as_str()).collect()
    }

    /// One line per record, then the problems and an overall verdict.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&format!(
                "{} {}: value {} ({}) [{}]\n",
                if r.pass { "PASS" } else { "FAIL" },
                r.metric,
                fmt17(r.value),
                r.describe_rule(),
                r.source
            ));
        }
        for p in &self.problems {
            out.push_str(&format!("FAIL {p}\n"));
        }
        out.push_str(&format!("{}: {}\n", self.kind, if self.passed() { "all checks passed" } else { "checks failed" }));
        out
    }
}

/// Re-judges every record of a manifest, reporting missing metrics and
/// result files that are absent or no longer match their digest.
pub fn verify_acceptance(manifest: &RunManifest) -> AcceptanceReport {
    verify_in(manifest, manifest.dir())
}

/// As [`verify_acceptance`], with result files resolved against `dir`.
pub fn verify_in(manifest: &RunManifest, dir: &Path) -> AcceptanceReport {
    let mut records: Vec<ResultRecord> = manifest
        .records
        .iter()
        .map(|r| {
            let mut r = r.clone();
            r.pass = r.evaluate() && !r.source.trim().is_empty();
            r
        })
        .collect();
    for metric in expected_metrics(&manifest.config) {
        if !records.iter().any(|r| r.metric == metric) {
            let mut r = ResultRecord::new(metric, f64::NAN, f64::NAN, 0.0, Rule::Within, "missing metric");
            r.pass = false;
            records.push(r);
        }
    }
    let mut problems = Vec::new();
    if let RunStatus::Failed { stage, message } = &manifest.status {
        problems.push(format!("run failed in stage `{stage}`: {message}"));
    }
    for f in &manifest.files {
        match sha256_file(&dir.join(&f.path)) {
            Ok(h) if h == f.sha256 => {}
            Ok(_) => problems.push(format!("{} does not match its digest", f.path.display())),
            Err(e) => problems.push(format!("{}: {e}", f.path.display())),
        }
    }
    AcceptanceReport { kind: manifest.config.kind, records, problems }
}
