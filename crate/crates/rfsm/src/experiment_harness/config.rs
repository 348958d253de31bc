use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::gibbs_sampler::ChainConfig;
use crate::model_core::{FieldScaling, ModelParams};
use crate::stochastic_drivers::FieldDistributionSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    GibbsSample,
    OverlapUnscaled,
    OverlapScaled,
    Ultrametricity,
    MetastateAw,
    MetastateNs,
    WalkDiagnostics,
    PartitionCheck,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::GibbsSample,
        ExperimentKind::OverlapUnscaled,
        ExperimentKind::OverlapScaled,
        ExperimentKind::Ultrametricity,
        ExperimentKind::MetastateAw,
        ExperimentKind::MetastateNs,
        ExperimentKind::WalkDiagnostics,
        ExperimentKind::PartitionCheck,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::GibbsSample => "gibbs_sample",
            ExperimentKind::OverlapUnscaled => "overlap_unscaled",
            ExperimentKind::OverlapScaled => "overlap_scaled",
            ExperimentKind::Ultrametricity => "ultrametricity",
            ExperimentKind::MetastateAw => "metastate_aw",
            ExperimentKind::MetastateNs => "metastate_ns",
            ExperimentKind::WalkDiagnostics => "walk_diagnostics",
            ExperimentKind::PartitionCheck => "partition_check",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Counts used by the experiments; each kind reads only the ones it needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sizes {
    /// Volume n.
    pub n: usize,
    /// Walk horizon N.
    pub horizon: usize,
    /// Independent disorder replicas.
    pub replicas: usize,
    /// Replica pairs per disorder draw.
    pub pairs: usize,
    /// Gibbs configurations per run.
    pub samples: usize,
    /// Walk / Brownian paths.
    pub paths: usize,
    /// Partition cells for histograms.
    pub cells: usize,
    pub triples: usize,
    /// Fingerprint window width (sites 0..window).
    pub window: usize,
    /// Strided volumes for full Gibbs validation.
    pub volumes: usize,
    pub brownian_steps: usize,
    /// Tilt κ for the ultrametricity experiment; derived from a disorder draw when absent.
    pub kappa: Option<f64>,
    pub partition_sizes: Vec<usize>,
}

impl Default for Sizes {
    fn default() -> Self {
        Sizes {
            n: 1000,
            horizon: 10_000,
            replicas: 1,
            pairs: 500,
            samples: 200,
            paths: 1000,
            cells: 16,
            triples: 100_000,
            window: 16,
            volumes: 10,
            brownian_steps: 2000,
            kappa: None,
            partition_sizes: vec![8, 32, 128],
        }
    }
}

/// Chain settings without a seed; seeds are derived per stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainSettings {
    pub proposal_sd: Option<f64>,
    pub burn_in: usize,
    pub thinning: usize,
    pub chains: usize,
}

impl Default for ChainSettings {
    fn default() -> Self {
        let c = ChainConfig::new(0);
        ChainSettings { proposal_sd: c.proposal_sd, burn_in: c.burn_in, thinning: c.thinning, chains: c.chains }
    }
}

impl ChainSettings {
    pub fn with_seed(&self, seed: u64) -> ChainConfig {
        ChainConfig { proposal_sd: self.proposal_sd, burn_in: self.burn_in, thinning: self.thinning, chains: self.chains, seed }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub out: PathBuf,
    #[serde(default)]
    pub workers: Option<usize>,
    pub model: ModelParams,
    pub field: FieldDistributionSpec,
    #[serde(default)]
    pub sizes: Sizes,
    #[serde(default)]
    pub chain: ChainSettings,
}

/// Values given on the command line; they win over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
}

fn iso(d: usize, v: f64) -> FieldDistributionSpec {
    FieldDistributionSpec::Gaussian { cov: (0..d).map(|i| (0..d).map(|j| if i == j { v } else { 0.0 }).collect()).collect() }
}

fn two_point(d: usize) -> FieldDistributionSpec {
    // per-component variance 1/8
    FieldDistributionSpec::TwoPoint { a: vec![0.125f64.sqrt(); d] }
}

impl ExperimentConfig {
    /// Desk-scale defaults for a kind; a config file only needs the values it changes.
    pub fn preset(kind: ExperimentKind, seed: u64) -> Self {
        use ExperimentKind::*;
        let unit = |d, beta| ModelParams { d, beta, scaling: FieldScaling::Unit };
        let scaled = |d, beta| ModelParams { d, beta, scaling: FieldScaling::InverseSqrtVolume };
        let mut sizes = Sizes::default();
        let (model, field) = match kind {
            GibbsSample => {
                sizes.n = 40;
                sizes.samples = 20_000;
                (unit(2, 8.0), two_point(2))
            }
            OverlapUnscaled => (unit(2, 8.0), two_point(2)),
            OverlapScaled => {
                sizes.n = 10_000;
                sizes.pairs = 2000;
                (scaled(2, 8.0), two_point(2))
            }
            Ultrametricity => {
                sizes.kappa = Some(1.0);
                (scaled(2, 8.0), two_point(2))
            }
            MetastateAw => {
                sizes.replicas = 2000;
                sizes.samples = 100;
                (unit(2, 8.0), FieldDistributionSpec::Gaussian { cov: vec![vec![0.1, 0.0], vec![0.0, 0.4]] })
            }
            MetastateNs => {
                sizes.cells = 8;
                sizes.samples = 100;
                (unit(2, 8.0), iso(2, 0.125))
            }
            WalkDiagnostics => {
                sizes.horizon = 100_000;
                sizes.paths = 100;
                (unit(2, 8.0), iso(2, 0.125))
            }
            PartitionCheck => (unit(3, 8.0), two_point(3)),
        };
        ExperimentConfig {
            kind,
            seed,
            out: PathBuf::from(format!("runs/{}-{}", kind.as_str(), seed)),
            workers: None,
            model,
            field,
            sizes,
            chain: ChainSettings::default(),
        }
    }

    /// The preset for `kind`, overlaid with a TOML file (if any), then with
    /// the command-line overrides. Nested tables merge key by key except
    /// `field`, which is replaced whole (its keys depend on its kind).
    pub fn load(kind: ExperimentKind, file: Option<&Path>, ov: &Overrides) -> Result<Self> {
        let mut base = serde_json::to_value(Self::preset(kind, ov.seed)).map_err(|e| Error::Format(e.to_string()))?;
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let parsed: toml::Table = toml::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
            let overlay = serde_json::to_value(parsed).map_err(|e| Error::Format(e.to_string()))?;
            if let Some(k) = overlay.get("kind") {
                if k.as_str() != Some(kind.as_str()) {
                    return Err(Error::InvalidArgument(format!("config declares kind {k}, but the command runs {kind}")));
                }
            }
            merge(&mut base, overlay);
        }
        let mut cfg: ExperimentConfig = serde_json::from_value(base).map_err(|e| Error::Format(e.to_string()))?;
        cfg.seed = ov.seed;
        if let Some(out) = &ov.out {
            cfg.out = out.clone();
        }
        if ov.workers.is_some() {
            cfg.workers = ov.workers;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.field.validate()?;
        if self.field.d() != self.model.d {
            return Err(Error::DimensionMismatch(format!("field has d={} but model d={}", self.field.d(), self.model.d)));
        }
        let required = match self.kind {
            ExperimentKind::OverlapUnscaled => Some(FieldScaling::Unit),
            ExperimentKind::OverlapScaled => Some(FieldScaling::InverseSqrtVolume),
            _ => None,
        };
        if let Some(req) = required {
            if self.model.scaling != req {
                return Err(Error::InvalidArgument(format!("{} requires model.scaling = {req:?}", self.kind)));
            }
        }
        let s = &self.sizes;
        let counts = [
            ("n", s.n),
            ("horizon", s.horizon),
            ("replicas", s.replicas),
            ("pairs", s.pairs),
            ("samples", s.samples),
            ("paths", s.paths),
            ("cells", s.cells),
            ("triples", s.triples),
            ("window", s.window),
            ("volumes", s.volumes),
            ("brownian_steps", s.brownian_steps),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidArgument(format!("sizes.{name} must be positive")));
        }
        if s.partition_sizes.is_empty() || s.partition_sizes.contains(&0) {
            return Err(Error::InvalidArgument("sizes.partition_sizes must be non-empty and positive".into()));
        }
        if let Some(k) = s.kappa {
            if !(k >= 0.0 && k.is_finite()) {
                return Err(Error::InvalidArgument(format!("sizes.kappa must be finite and >= 0, got {k}")));
            }
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidArgument("workers must be positive".into()));
        }
        let smallest_volume = match self.kind {
            ExperimentKind::MetastateNs => s.horizon / s.volumes,
            _ => s.n,
        };
        if matches!(self.kind, ExperimentKind::MetastateAw | ExperimentKind::MetastateNs) && s.window > smallest_volume {
            return Err(Error::InvalidArgument(format!("fingerprint window {} exceeds the volume {smallest_volume}", s.window)));
        }
        self.chain.with_seed(0).validate()
    }
}

fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if k != "field" && slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for k in ExperimentKind::ALL {
            ExperimentConfig::preset(k, 1).validate().unwrap();
            assert_eq!(ExperimentKind::parse(k.as_str()), Some(k));
        }
    }

    #[test]
    fn file_overlays_preset_and_flags_win() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(
            &path,
            "seed = 3\nout = \"elsewhere\"\n[model]\nbeta = 6.0\n[sizes]\npairs = 40\n[field]\nkind = \"gaussian\"\ncov = [[0.1, 0.0], [0.0, 0.2]]\n",
        )
        .unwrap();
        let ov = Overrides { seed: 99, out: Some("flag".into()), workers: Some(2) };
        let c = ExperimentConfig::load(ExperimentKind::OverlapUnscaled, Some(&path), &ov).unwrap();
        assert_eq!(c.seed, 99);
        assert_eq!(c.out, PathBuf::from("flag"));
        assert_eq!(c.workers, Some(2));
        assert_eq!(c.model.beta, 6.0);
        assert_eq!(c.model.d, 2);
        assert_eq!(c.sizes.pairs, 40);
        assert_eq!(c.sizes.n, 1000);
        assert!(matches!(c.field, FieldDistributionSpec::Gaussian { .. }));
    }

    #[test]
    fn rejects_bad_configs() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        let ov = Overrides { seed: 1, ..Default::default() };
        std::fs::write(&path, "kind = \"metastate_aw\"\n").unwrap();
        assert!(ExperimentConfig::load(ExperimentKind::OverlapUnscaled, Some(&path), &ov).is_err());
        std::fs::write(&path, "[sizes]\npairs = 0\n").unwrap();
        assert!(ExperimentConfig::load(ExperimentKind::OverlapUnscaled, Some(&path), &ov).is_err());
        std::fs::write(&path, "[sizes]\nbogus = 1\n").unwrap();
        assert!(ExperimentConfig::load(ExperimentKind::OverlapUnscaled, Some(&path), &ov).is_err());
        std::fs::write(&path, "[model]\nd = 3\n").unwrap();
        assert!(matches!(
            ExperimentConfig::load(ExperimentKind::OverlapUnscaled, Some(&path), &ov),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(
            ExperimentConfig::load(ExperimentKind::OverlapUnscaled, Some(Path::new("/nonexistent/c.toml")), &ov),
            Err(Error::Io { .. })
        ));
    }
}
