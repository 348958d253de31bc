use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rfsm::experiment_harness::{
    persist, run_experiment, verify_in, ExperimentConfig, ExperimentKind, Overrides, RunManifest, MANIFEST_FILE,
};

/// Experiments for the mean-field spherical model in random fields.
#[derive(Parser)]
#[command(name = "rfsm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// TOML file overlaid on the experiment's defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; every random stream is derived from it.
    #[arg(long)]
    seed: u64,
    /// Output directory [default: runs/<kind>-<seed>].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (results do not depend on it).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Exact finite-volume Gibbs draws, checked against the quadrature oracle at small n.
    #[command(name = "gibbs_sample")]
    GibbsSample(RunArgs),
    /// Replica overlaps with unscaled fields (point-mass limit).
    #[command(name = "overlap_unscaled")]
    OverlapUnscaled(RunArgs),
    /// Replica overlaps with n^{-1/2}-scaled fields against rho^R.
    #[command(name = "overlap_scaled")]
    OverlapScaled(RunArgs),
    /// Three-replica ultrametricity violations under the tilted sphere law.
    #[command(name = "ultrametricity")]
    Ultrametricity(RunArgs),
    /// Fingerprint directions over disorder replicas against the AW density.
    #[command(name = "metastate_aw")]
    MetastateAw(RunArgs),
    /// Walk-direction occupation against Brownian occupation, with Gibbs validation.
    #[command(name = "metastate_ns")]
    MetastateNs(RunArgs),
    /// Recurrence / conditioning statistics of the field walk.
    #[command(name = "walk_diagnostics")]
    WalkDiagnostics(RunArgs),
    /// Equal-area partition areas and diameter scaling.
    #[command(name = "partition_check")]
    PartitionCheck(RunArgs),
    /// Re-check a finished run from its manifest.
    Verify {
        /// manifest.json, or the run directory containing it.
        manifest: PathBuf,
    },
}

fn main() -> ExitCode {
    let (kind, args) = match Cli::parse().command {
        Command::GibbsSample(a) => (ExperimentKind::GibbsSample, a),
        Command::OverlapUnscaled(a) => (ExperimentKind::OverlapUnscaled, a),
        Command::OverlapScaled(a) => (ExperimentKind::OverlapScaled, a),
        Command::Ultrametricity(a) => (ExperimentKind::Ultrametricity, a),
        Command::MetastateAw(a) => (ExperimentKind::MetastateAw, a),
        Command::MetastateNs(a) => (ExperimentKind::MetastateNs, a),
        Command::WalkDiagnostics(a) => (ExperimentKind::WalkDiagnostics, a),
        Command::PartitionCheck(a) => (ExperimentKind::PartitionCheck, a),
        Command::Verify { manifest } => {
            let path = if manifest.is_dir() { manifest.join(MANIFEST_FILE) } else { manifest };
            return report(&path);
        }
    };
    let ov = Overrides { seed: args.seed, out: args.out, workers: args.workers };
    let cfg = match ExperimentConfig::load(kind, args.config.as_deref(), &ov) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = run_experiment(&cfg) {
        eprintln!("error: {e}");
        // a failed stage still leaves a manifest; report on what was produced
        if !cfg.out.join(MANIFEST_FILE).exists() {
            return ExitCode::from(2);
        }
    }
    report(&cfg.out.join(MANIFEST_FILE))
}

fn report(manifest_path: &Path) -> ExitCode {
    let manifest = match RunManifest::load(manifest_path) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let rep = verify_in(&manifest, dir);
    print!("{}", rep.render());
    if let Err(e) = persist::write_json(&dir.join("report.json"), &rep) {
        eprintln!("error: {e}");
    }
    ExitCode::from(rep.exit_code() as u8)
}
