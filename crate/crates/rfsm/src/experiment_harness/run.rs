use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::Serialize;

use super::persist::{self, Field};
use super::{persist_results, ExperimentConfig, ExperimentKind, ResultFile, ResultRecord, Rule, RunManifest, RunStatus};
use crate::error::{Error, Result};
use crate::gibbs_sampler::{compare_with_oracle, sample_gibbs, sample_gibbs_with_chains};
use crate::limit_states::{GammaSampler, TiltedSphereLaw};
use crate::linalg::{dot, norm, unit};
use crate::measure_tools::{aw_density_cells, eq_partition, fingerprint_state, gibbs_window, ks_statistic, total_variation};
use crate::model_core::{classify_regime, compute_sample_stats, CriticalConstants, DisorderSample, FieldScaling};
use crate::overlap_lab::{
    maximizer_overlap_limit, overlap_experiment, predicted_overlap_limit, ultrametricity_rate, violates_ultrametricity,
    OverlapComparator, OverlapExperiment,
};
use crate::rng::{derive_seed, label, stream};
use crate::stochastic_drivers::{
    arcsine_cdf, brownian_occupation, generate_disorder, recurrence_statistic, revisits_ball, walk_occupation, walk_path,
};

const SRC_CONSTRAINT: &str = "microcanonical construction: N_n(phi) = n exactly";
const SRC_RHAT: &str = "split R-hat convergence threshold";
const SRC_ORACLE: &str = "tensor-grid quadrature of the mixing measure (3 combined standard errors)";
const SRC_TRIVIAL: &str = "unscaled overlap theorem: point mass at max{1 - d/beta, |s|^2}";
const SRC_MAXIMIZER: &str = "(r*)^2 + |y*|^2 at the maximizer of the limiting tilt";
const SRC_POINT_MASS: &str = "unscaled overlap theorem: the limit law is a point mass";
const SRC_RSB: &str = "replica-symmetry-breaking theorem: overlap law rho^R at R = |S_n|/sqrt(n)";
const SRC_D1_MEAN: &str = "d = 1 quenched overlap mean (r*)^2 tanh^2(beta r* R)";
const SRC_NSA: &str = "non-self-averaging: overlap means vary with the disorder through |S_n|/sqrt(n)";
const SRC_SELF_AVG: &str = "unscaled overlap limit is disorder independent";
const SRC_ULTRA_D1: &str = "ultrametricity holds for d = 1";
const SRC_ULTRA_D2: &str = "ultrametricity fails for d >= 2";
const SRC_AW: &str = "AW metastate density <Omega, Sigma^-1 Omega>^(-d/2), cell masses by quadrature";
const SRC_ARCSINE: &str = "NS metastate, d = 1: arcsine law of the positive time fraction";
const SRC_NS_OCC: &str = "NS metastate: occupation measure of the projected Brownian motion";
const SRC_PROXY: &str = "NS asymptotics: the Gibbs state direction follows S_n/|S_n|";
const SRC_CONDITIONING: &str = "conditioning lemma: C_N = o(1)";
const SRC_RECURRENCE: &str = "recurrence of the walk for d <= 2";
const SRC_TRANSIENCE: &str = "transience of the walk for d >= 3";
const SRC_EQ_AREA: &str = "recursive zonal equal-area partition: equal cell areas";
const SRC_EQ_DIAM: &str = "recursive zonal equal-area partition: diameter O(N^(-1/(d-1)))";

struct Run<'a> {
    cfg: &'a ExperimentConfig,
    seeds: BTreeMap<String, u64>,
    files: Vec<ResultFile>,
    records: Vec<ResultRecord>,
    checked: usize,
}

impl<'a> Run<'a> {
    fn seed(&mut self, stage: &str) -> u64 {
        let s = derive_seed(self.cfg.seed, label(stage));
        self.seeds.insert(stage.to_string(), s);
        s
    }

    fn path(&self, name: &str) -> PathBuf {
        self.cfg.out.join(name)
    }

    fn register(&mut self, name: &str) -> Result<()> {
        let sha256 = persist::sha256_file(&self.path(name))?;
        self.files.push(ResultFile { path: name.into(), sha256 });
        Ok(())
    }

    fn jsonl<T: Serialize>(&mut self, name: &str, rows: impl IntoIterator<Item = T>) -> Result<()> {
        persist::write_jsonl(&self.path(name), rows)?;
        self.register(name)
    }

    fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        persist::write_json(&self.path(name), value)?;
        self.register(name)
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<Field>]) -> Result<()> {
        persist::write_csv(&self.path(name), header, rows)?;
        self.register(name)
    }

    fn record(&mut self, metric: &str, value: f64, comparator: f64, tolerance: f64, rule: Rule, source: &str) {
        self.records.push(ResultRecord::new(metric, value, comparator, tolerance, rule, source));
    }

    fn constraint(&mut self, max_dev: f64, count: usize) {
        self.checked += count;
        self.record("constraint_deviation_max", max_dev, 0.0, 1e-9, Rule::AtMost, SRC_CONSTRAINT);
    }
}

fn stage<T>(name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    f().map_err(|e| e.in_stage(name))
}

fn metric_rows(rows: &[(&str, f64)]) -> Vec<Vec<Field>> {
    rows.iter().map(|(k, v)| vec![(*k).into(), (*v).into()]).collect()
}

/// Runs one experiment into `cfg.out`. Results are a deterministic function
/// of the config (including the master seed): worker count and scheduling do
/// not change any result file. On a stage failure the files written so far
/// stay on disk and the manifest records the failing stage.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunManifest> {
    cfg.validate()?;
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
    let clock = Instant::now();
    prepare_dir(&cfg.out)?;
    let mut run = Run { cfg, seeds: BTreeMap::new(), files: Vec::new(), records: Vec::new(), checked: 0 };
    let outcome = match cfg.workers {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?
            .install(|| dispatch(&mut run)),
        None => dispatch(&mut run),
    };
    let status = match &outcome {
        Ok(()) => RunStatus::Complete,
        Err(Error::Stage { stage, source }) => RunStatus::Failed { stage: stage.clone(), message: source.to_string() },
        Err(e) => RunStatus::Failed { stage: "setup".into(), message: e.to_string() },
    };
    let mut manifest = RunManifest {
        config: cfg.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        started_unix: started,
        wall_clock_seconds: clock.elapsed().as_secs_f64(),
        stage_seeds: run.seeds,
        files: run.files,
        records: Vec::new(),
        configurations_checked: run.checked,
        status,
    };
    persist_results(&run.records, &mut manifest)?;
    outcome.map(|_| manifest)
}

fn prepare_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let probe = dir.join(".write-probe");
    std::fs::write(&probe, b"").map_err(|e| Error::io(&probe, e))?;
    std::fs::remove_file(&probe).map_err(|e| Error::io(&probe, e))
}

fn dispatch(run: &mut Run) -> Result<()> {
    match run.cfg.kind {
        ExperimentKind::GibbsSample => gibbs(run),
        ExperimentKind::OverlapUnscaled | ExperimentKind::OverlapScaled => overlap(run),
        ExperimentKind::Ultrametricity => ultrametricity(run),
        ExperimentKind::MetastateAw => metastate_aw(run),
        ExperimentKind::MetastateNs => metastate_ns(run),
        ExperimentKind::WalkDiagnostics => walk_diagnostics(run),
        ExperimentKind::PartitionCheck => partition_check(run),
    }
}

fn constants(run: &Run) -> CriticalConstants {
    classify_regime(&run.cfg.model, &run.cfg.field.second_moments()).constants
}

/// Fields as they enter the fingerprint: subtracted for the unscaled model only.
fn fingerprint_field<'h>(run: &Run, h: &'h DisorderSample) -> Option<&'h DisorderSample> {
    (run.cfg.model.scaling == FieldScaling::Unit).then_some(h)
}

#[derive(Serialize)]
struct SampleRow<'a> {
    index: usize,
    x: &'a [f64],
    y: &'a [f64],
    magnetization: Vec<f64>,
    constraint_deviation: f64,
}

fn gibbs(run: &mut Run) -> Result<()> {
    let cfg = run.cfg;
    let (p, n) = (&cfg.model, cfg.sizes.n);
    let dseed = run.seed("disorder");
    let h = stage("disorder", || generate_disorder(&cfg.field, n, dseed))?;
    let chain = cfg.chain.with_seed(run.seed("chains"));
    let (draws, mix) = stage("sampler", || sample_gibbs_with_chains(&h, p, &chain, cfg.sizes.samples))?;
    let per_config: Vec<(f64, Vec<f64>)> = (0..draws.len())
        .into_par_iter()
        .map(|k| {
            let c = draws.configuration(k);
            (c.constraint_deviation(), c.magnetization().iter().map(|m| m / n as f64).collect())
        })
        .collect();
    let rows = draws.latents.iter().zip(&per_config).enumerate().map(|(index, (c, (dev, m)))| SampleRow {
        index,
        x: &c.x,
        y: &c.y,
        magnetization: m.clone(),
        constraint_deviation: *dev,
    });
    stage("persist", || run.jsonl("samples.jsonl", rows))?;
    let dg = &draws.diagnostics;
    let count = draws.len() as f64;
    let mean_r = draws.latents.iter().map(|c| norm(&c.x)).sum::<f64>() / count;
    let mean_y = draws.latents.iter().map(|c| norm(&c.y)).sum::<f64>() / count;
    let summary = metric_rows(&[
        ("acceptance_rate", dg.acceptance_rate),
        ("orbit_acceptance_rate", dg.orbit_acceptance_rate),
        ("split_rhat", dg.split_rhat),
        ("min_ess", dg.ess.iter().copied().fold(f64::INFINITY, f64::min)),
        ("boundary_rejections", dg.boundary_rejections as f64),
        ("mean_x_norm", mean_r),
        ("mean_y_norm", mean_y),
        ("limit_r_star", constants(run).r_star),
    ]);
    stage("persist", || run.csv("summary.csv", &["metric", "value"], &summary))?;
    let max_dev = per_config.iter().map(|(d, _)| *d).fold(0.0, f64::max);
    run.constraint(max_dev, per_config.len());
    run.record("split_rhat", dg.split_rhat, 1.0, 0.1, Rule::AtMost, SRC_RHAT);
    if p.d <= 2 && n <= 200 {
        let stats = stage("oracle", || compute_sample_stats(&h))?;
        let checks = stage("oracle", || compare_with_oracle(&mix, &stats, p, n))?;
        let rows: Vec<Vec<Field>> = checks
            .iter()
            .map(|c| vec![c.name.as_str().into(), c.mc_mean.into(), c.mc_se.into(), c.oracle.into(), c.oracle_error.into(), c.z().into()])
            .collect();
        stage("persist", || run.csv("oracle.csv", &["moment", "mc_mean", "mc_se", "oracle", "oracle_error", "z"], &rows))?;
        let zmax = checks.iter().map(|c| c.z()).fold(0.0, f64::max);
        run.record("oracle_z_max", zmax, 3.0, 0.0, Rule::AtMost, SRC_ORACLE);
    }
    Ok(())
}

#[derive(Serialize)]
struct OverlapRow {
    replica: usize,
    pair: usize,
    overlap: f64,
}

fn overlap(run: &mut Run) -> Result<()> {
    let cfg = run.cfg;
    let (p, s) = (&cfg.model, &cfg.sizes);
    let (dseed, cseed) = (run.seed("disorder"), run.seed("chains"));
    let exps: Vec<OverlapExperiment> = stage("replicas", || {
        (0..s.replicas)
            .into_par_iter()
            .map(|r| {
                let chain = cfg.chain.with_seed(derive_seed(cseed, r as u64));
                overlap_experiment(&cfg.field, p, s.n, s.pairs, &chain, derive_seed(dseed, r as u64))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let rows = exps.iter().enumerate().flat_map(|(replica, e)| {
        e.law.values().iter().enumerate().map(move |(pair, &overlap)| OverlapRow { replica, pair, overlap })
    });
    stage("persist", || run.jsonl("overlaps.jsonl", rows))?;
    let mut summary = Vec::with_capacity(exps.len());
    let mut means = Vec::with_capacity(exps.len());
    for (r, e) in exps.iter().enumerate() {
        let sm = e.summary()?;
        means.push(sm.mean);
        summary.push(vec![
            r.into(),
            sm.scaled_walk_norm.into(),
            sm.mean.into(),
            sm.stdev.into(),
            sm.comparator_mean.into(),
            sm.distance.into(),
            e.max_constraint_deviation.into(),
            e.diagnostics[0].split_rhat.max(e.diagnostics[1].split_rhat).into(),
        ]);
    }
    let header = ["replica", "scaled_walk_norm", "mean", "stdev", "comparator_mean", "bl_distance", "max_constraint_deviation", "split_rhat"];
    stage("persist", || run.csv("summary.csv", &header, &summary))?;
    if let Some(OverlapComparator::Rho { law: crate::limit_states::RhoLaw::Quadrature { table: Some(t), .. }, .. }) =
        exps.first().map(|e| &e.comparator)
    {
        let rows: Vec<Vec<Field>> = t.q.iter().zip(&t.density).map(|(q, d)| vec![(*q).into(), (*d).into()]).collect();
        stage("persist", || run.csv("rho_density.csv", &["q", "density"], &rows))?;
    }
    let max_dev = exps.iter().map(|e| e.max_constraint_deviation).fold(0.0, f64::max);
    run.constraint(max_dev, 2 * s.pairs * s.replicas);
    let scaled = cfg.kind == ExperimentKind::OverlapScaled;
    if s.replicas == 1 {
        let e = &exps[0];
        let (mean, stdev) = (e.law.mean(), e.law.stdev());
        if scaled {
            run.record("overlap_bl_distance", e.distance()?, 0.0, 0.05, Rule::AtMost, SRC_RSB);
            if let (1, OverlapComparator::Rho { spec, .. }) = (p.d, &e.comparator) {
                run.record("overlap_mean_d1", mean, spec.mean_d1(), 0.03, Rule::Within, SRC_D1_MEAN);
            }
        } else {
            let m2 = cfg.field.second_moments();
            run.record("overlap_mean", mean, predicted_overlap_limit(p, &m2), 0.02, Rule::Within, SRC_TRIVIAL);
            run.record("overlap_stdev", stdev, 0.0, 0.05, Rule::AtMost, SRC_POINT_MASS);
            run.record("overlap_mean_vs_maximizer", mean, maximizer_overlap_limit(p, &m2), 0.02, Rule::Within, SRC_MAXIMIZER);
        }
    } else {
        let mu = means.iter().sum::<f64>() / means.len() as f64;
        let spread = (means.iter().map(|m| (m - mu).powi(2)).sum::<f64>() / (means.len() - 1) as f64).sqrt();
        if scaled {
            run.record("overlap_mean_spread", spread, 0.02, 0.0, Rule::AtLeast, SRC_NSA);
        } else {
            run.record("overlap_mean_spread", spread, 0.0, 0.01, Rule::AtMost, SRC_SELF_AVG);
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct TripleRow {
    q_ab: f64,
    q_bc: f64,
    q_ac: f64,
    violates: bool,
}

fn ultrametricity(run: &mut Run) -> Result<()> {
    let cfg = run.cfg;
    let (p, s) = (&cfg.model, &cfg.sizes);
    let r_star = constants(run).r_star;
    if !(r_star > 0.0) {
        return Err(Error::Paramagnetic.in_stage("constants"));
    }
    let kappa = match s.kappa {
        Some(k) => k,
        None => {
            let seed = run.seed("disorder");
            let h = stage("disorder", || generate_disorder(&cfg.field, s.n, seed))?;
            let walk = stage("disorder", || compute_sample_stats(&h))?.walk_sum;
            p.beta * r_star * norm(&walk) * p.field_factor(s.n)
        }
    };
    let mut e1 = vec![0.0; p.d];
    e1[0] = 1.0;
    let law = stage("law", || TiltedSphereLaw::with_kappa(e1, kappa))?;
    let tseed = run.seed("triples");
    let rate = stage("triples", || ultrametricity_rate(&law, r_star, s.triples, &mut stream(tseed, 0)))?;
    let g = GammaSampler::new(&law);
    let mut r = stream(run.seed("triple_samples"), 0);
    let r2 = r_star * r_star;
    let rows: Vec<TripleRow> = (0..s.triples.min(1000))
        .map(|_| {
            let (a, b, c) = (g.sample(&mut r), g.sample(&mut r), g.sample(&mut r));
            let (q_ab, q_bc, q_ac) = (r2 * dot(&a, &b), r2 * dot(&b, &c), r2 * dot(&a, &c));
            TripleRow { q_ab, q_bc, q_ac, violates: violates_ultrametricity(q_ab, q_bc, q_ac) }
        })
        .collect();
    stage("persist", || run.jsonl("triples.jsonl", rows))?;
    let summary = metric_rows(&[
        ("d", p.d as f64),
        ("beta", p.beta),
        ("r_star", r_star),
        ("kappa", kappa),
        ("triples", s.triples as f64),
        ("violation_rate", rate),
    ]);
    stage("persist", || run.csv("summary.csv", &["metric", "value"], &summary))?;
    if p.d == 1 {
        run.record("violation_rate", rate, 0.0, 0.0, Rule::Within, SRC_ULTRA_D1);
    } else {
        run.record("violation_rate", rate, 0.05, 0.0, Rule::AtLeast, SRC_ULTRA_D2);
    }
    Ok(())
}

#[derive(Serialize)]
struct AwRow {
    replica: usize,
    walk_norm: f64,
    walk_cell: Option<usize>,
    direction: Vec<f64>,
    cell: usize,
    kappa_hat: Option<f64>,
    constraint_deviation: f64,
}

fn metastate_aw(run: &mut Run) -> Result<()> {
    let cfg = run.cfg;
    let (p, s) = (&cfg.model, &cfg.sizes);
    let part = stage("partition", || eq_partition(p.d.saturating_sub(1), s.cells))?;
    let masses = stage("aw_density", || aw_density_cells(&cfg.field.covariance(), &part))?;
    let consts = constants(run);
    let window: Vec<usize> = (0..s.window).collect();
    let (dseed, cseed) = (run.seed("disorder"), run.seed("chains"));
    let rows: Vec<AwRow> = stage("replicas", || {
        (0..s.replicas)
            .into_par_iter()
            .map(|r| {
                let h = generate_disorder(&cfg.field, s.n, derive_seed(dseed, r as u64))?;
                let draws = sample_gibbs(&h, p, &cfg.chain.with_seed(derive_seed(cseed, r as u64)), s.samples)?;
                let w = gibbs_window(&draws, &window, s.samples);
                let f = fingerprint_state(&w, fingerprint_field(run, &h), &consts, Some(&draws.latents))?;
                let walk = compute_sample_stats(&h)?.walk_sum;
                Ok(AwRow {
                    replica: r,
                    walk_norm: norm(&walk),
                    walk_cell: unit(&walk).map(|u| part.locate(&u)).transpose()?,
                    cell: part.locate(&f.direction)?,
                    direction: f.direction,
                    kappa_hat: f.tilt,
                    constraint_deviation: draws.configuration(0).constraint_deviation(),
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut counts = vec![0usize; part.len()];
    rows.iter().for_each(|r| counts[r.cell] += 1);
    let hist: Vec<f64> = counts.iter().map(|c| *c as f64 / rows.len() as f64).collect();
    let tv = total_variation(&hist, &masses)?;
    let max_dev = rows.iter().map(|r| r.constraint_deviation).fold(0.0, f64::max);
    stage("persist", || run.jsonl("directions.jsonl", &rows))?;
    let table: Vec<Vec<Field>> =
        (0..part.len()).map(|k| vec![k.into(), counts[k].into(), hist[k].into(), masses[k].into()]).collect();
    stage("persist", || run.csv("cells.csv", &["cell", "count", "fraction", "aw_mass"], &table))?;
    stage("persist", || run.json("partition.json", &part))?;
    run.constraint(max_dev, rows.len());
    run.record("aw_total_variation", tv, 0.0, 0.05, Rule::AtMost, SRC_AW);
    Ok(())
}

#[derive(Serialize)]
struct NsPathRow {
    path: usize,
    walk_missing: usize,
    walk_positive_fraction: Option<f64>,
    brownian_positive_fraction: Option<f64>,
    walk_cells: Option<Vec<f64>>,
    brownian_cells: Option<Vec<f64>>,
}

#[derive(Serialize)]
struct ProxyRow {
    volume: usize,
    n: usize,
    walk_direction: Option<Vec<f64>>,
    direction: Vec<f64>,
    walk_cell: Option<usize>,
    cell: Option<usize>,
    agree: bool,
    constraint_deviation: f64,
}

fn metastate_ns(run: &mut Run) -> Result<()> {
    let cfg = run.cfg;
    let (p, s) = (&cfg.model, &cfg.sizes);
    let d = p.d;
    let part = if d >= 2 { Some(stage("partition", || eq_partition(d - 1, s.cells))?) } else { None };
    let cov = cfg.field.covariance();
    let (wseed, bseed) = (run.seed("walks"), run.seed("brownian"));
    let paths: Vec<NsPathRow> = stage("occupation", || {
        (0..s.paths)
            .into_par_iter()
            .map(|k| {
                let path = walk_path(&cfg.field, s.horizon, derive_seed(wseed, k as u64))?;
                let wo = walk_occupation(&path, s.horizon, part.as_ref())?;
                let bo = brownian_occupation(&cov, d, s.brownian_steps, part.as_ref(), derive_seed(bseed, k as u64))?;
                Ok(NsPathRow {
                    path: k,
                    walk_missing: wo.missing,
                    walk_positive_fraction: wo.positive_fraction,
                    brownian_positive_fraction: bo.positive_fraction,
                    walk_cells: wo.cells,
                    brownian_cells: bo.cells,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    stage("persist", || run.jsonl("paths.jsonl", &paths))?;
    let mut summary: Vec<(&str, f64)> = Vec::new();
    if let Some(part) = &part {
        let mean = |pick: fn(&NsPathRow) -> &Option<Vec<f64>>| -> Vec<f64> {
            let mut m = vec![0.0; part.len()];
            for row in &paths {
                if let Some(c) = pick(row) {
                    m.iter_mut().zip(c).for_each(|(a, b)| *a += b / paths.len() as f64);
                }
            }
            m
        };
        let (wm, bm) = (mean(|r| &r.walk_cells), mean(|r| &r.brownian_cells));
        let masses = aw_density_cells(&cov, part).ok();
        let table: Vec<Vec<Field>> = (0..part.len())
            .map(|k| vec![k.into(), wm[k].into(), bm[k].into(), masses.as_ref().map_or(f64::NAN, |m| m[k]).into()])
            .collect();
        stage("persist", || run.csv("occupation.csv", &["cell", "walk_mean", "brownian_mean", "aw_mass"], &table))?;
        let diff = wm.iter().zip(&bm).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        summary.push(("occupation_max_diff", diff));
        run.record("occupation_max_diff", diff, 0.0, 0.03, Rule::AtMost, SRC_NS_OCC);
    } else {
        let walk: Vec<f64> = paths.iter().filter_map(|r| r.walk_positive_fraction).collect();
        let brown: Vec<f64> = paths.iter().filter_map(|r| r.brownian_positive_fraction).collect();
        let (ks_w, ks_b) = (ks_statistic(walk, arcsine_cdf), ks_statistic(brown, arcsine_cdf));
        summary.push(("arcsine_ks_walk", ks_w));
        summary.push(("arcsine_ks_brownian", ks_b));
        run.record("arcsine_ks", ks_w, 0.0, 0.05, Rule::AtMost, SRC_ARCSINE);
    }
    // the proxy check: one disorder path, full Gibbs fingerprints on strided volumes
    let consts = constants(run);
    let dseed = run.seed("disorder");
    let h = stage("disorder", || generate_disorder(&cfg.field, s.horizon, dseed))?;
    let cseed = run.seed("chains");
    let window: Vec<usize> = (0..s.window).collect();
    let proxy: Vec<ProxyRow> = stage("gibbs_proxy", || {
        (1..=s.volumes)
            .into_par_iter()
            .map(|k| {
                let n = s.horizon * k / s.volumes;
                let hk = h.prefix(n)?;
                let draws = sample_gibbs(&hk, p, &cfg.chain.with_seed(derive_seed(cseed, k as u64)), s.samples)?;
                let w = gibbs_window(&draws, &window, s.samples);
                let f = fingerprint_state(&w, fingerprint_field(run, &hk), &consts, None)?;
                let walk_direction = unit(&compute_sample_stats(&hk)?.walk_sum);
                let (walk_cell, cell, agree) = match (&part, &walk_direction) {
                    (Some(part), Some(wd)) => {
                        let (a, b) = (part.locate(wd)?, part.locate(&f.direction)?);
                        (Some(a), Some(b), part.is_near(a, b))
                    }
                    (None, Some(wd)) => (None, None, wd[0] * f.direction[0] > 0.0),
                    // Ŝ_n undefined: counted against the proxy
                    (_, None) => (None, None, false),
                };
                Ok(ProxyRow {
                    volume: k,
                    n,
                    walk_direction,
                    direction: f.direction,
                    walk_cell,
                    cell,
                    agree,
                    constraint_deviation: draws.configuration(0).constraint_deviation(),
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let agreement = proxy.iter().filter(|r| r.agree).count() as f64 / proxy.len() as f64;
    let max_dev = proxy.iter().map(|r| r.constraint_deviation).fold(0.0, f64::max);
    stage("persist", || run.jsonl("proxy.jsonl", &proxy))?;
    summary.push(("gibbs_proxy_agreement", agreement));
    let summary = metric_rows(&summary);
    stage("persist", || run.csv("summary.csv", &["metric", "value"], &summary))?;
    run.constraint(max_dev, proxy.len());
    run.record("gibbs_proxy_agreement", agreement, 0.9, 0.0, Rule::AtLeast, SRC_PROXY);
    Ok(())
}

#[derive(Serialize)]
struct WalkRow {
    path: usize,
    c_n: Option<f64>,
    c_2n: Option<f64>,
    revisits: Option<bool>,
    escapes: Option<bool>,
    final_norm: f64,
}

fn walk_diagnostics(run: &mut Run) -> Result<()> {
    let cfg = run.cfg;
    let (d, s) = (cfg.model.d, &cfg.sizes);
    let big_n = s.horizon;
    let wseed = run.seed("walks");
    let rows: Vec<WalkRow> = stage("walks", || {
        (0..s.paths)
            .into_par_iter()
            .map(|k| {
                let path = walk_path(&cfg.field, 2 * big_n, derive_seed(wseed, k as u64))?;
                let rec = if d >= 2 { Some(recurrence_statistic(&path, big_n)?) } else { None };
                let min_norm = |lo: usize, hi: usize| (lo.max(1)..=hi).map(|n| path.norm(n)).fold(f64::INFINITY, f64::min);
                Ok(WalkRow {
                    path: k,
                    c_n: rec.map(|r| r.c_n),
                    c_2n: rec.map(|r| r.c_2n),
                    revisits: (d <= 2).then(|| revisits_ball(&path, 2.0, 100.min(big_n), big_n)),
                    escapes: (d >= 3 && big_n >= 20).then(|| min_norm(big_n / 2, big_n) > min_norm(big_n / 20, big_n / 10)),
                    final_norm: path.norm(big_n),
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    stage("persist", || run.jsonl("paths.jsonl", &rows))?;
    let frac = |f: &dyn Fn(&WalkRow) -> Option<bool>| {
        let v: Vec<bool> = rows.iter().filter_map(f).collect();
        (!v.is_empty()).then(|| v.iter().filter(|b| **b).count() as f64 / v.len() as f64)
    };
    let conditioning = frac(&|r| r.c_n.zip(r.c_2n).map(|(a, b)| a <= 0.1 && b < a));
    let small = frac(&|r| r.c_n.map(|a| a <= 0.02));
    let revisit = frac(&|r| r.revisits);
    let escape = frac(&|r| r.escapes);
    let mean_c = rows.iter().filter_map(|r| r.c_n).sum::<f64>() / rows.len() as f64;
    let mut summary = vec![("paths", rows.len() as f64), ("mean_c_n", if d >= 2 { mean_c } else { f64::NAN })];
    if let Some(v) = conditioning {
        summary.push(("conditioning_pass_fraction", v));
        run.record("conditioning_pass_fraction", v, 0.9, 0.0, Rule::AtLeast, SRC_CONDITIONING);
    }
    if let (true, Some(v)) = (d >= 3, small) {
        summary.push(("conditioning_small_fraction", v));
        run.record("conditioning_small_fraction", v, 0.95, 0.0, Rule::AtLeast, SRC_CONDITIONING);
    }
    if let Some(v) = revisit {
        summary.push(("ball_revisit_fraction", v));
        run.record("ball_revisit_fraction", v, 0.9, 0.0, Rule::AtLeast, SRC_RECURRENCE);
    }
    if let Some(v) = escape {
        summary.push(("escape_fraction", v));
        run.record("escape_fraction", v, 0.95, 0.0, Rule::AtLeast, SRC_TRANSIENCE);
    }
    let summary = metric_rows(&summary);
    stage("persist", || run.csv("summary.csv", &["metric", "value"], &summary))
}

fn partition_check(run: &mut Run) -> Result<()> {
    let cfg = run.cfg;
    let dim = cfg.model.d.saturating_sub(1);
    let mut table = Vec::new();
    let (mut area_dev, mut geo, mut chord) = (0.0f64, Vec::new(), Vec::new());
    for &n in &cfg.sizes.partition_sizes {
        let part = stage("partition", || eq_partition(dim, n))?;
        let target = crate::measure_tools::sphere_area(dim + 1) / n as f64;
        let dev = (0..n).map(|k| (part.cell_area(k) - target).abs()).fold(0.0, f64::max);
        area_dev = area_dev.max(dev);
        let scale = (n as f64).powf(1.0 / dim as f64);
        let (g, c) = (part.max_geodesic_diameter(), part.max_diameter());
        geo.push(g * scale);
        chord.push(c * scale);
        table.push(vec![n.into(), part.zone_counts.len().into(), dev.into(), g.into(), c.into(), (g * scale).into(), (c * scale).into()]);
        stage("persist", || run.json(&format!("partition_{n}.json"), &part))?;
    }
    let header = ["cells", "zones", "max_area_deviation", "max_geodesic_diameter", "max_chord_diameter", "geodesic_scaled", "chord_scaled"];
    stage("persist", || run.csv("summary.csv", &header, &table))?;
    let spread = |v: &[f64]| v.iter().copied().fold(0.0, f64::max) / v.iter().copied().fold(f64::INFINITY, f64::min) - 1.0;
    run.record("equal_area_max_dev", area_dev, 0.0, 1e-10, Rule::AtMost, SRC_EQ_AREA);
    run.record("diameter_scaling_spread", spread(&geo), 0.0, 0.10, Rule::AtMost, SRC_EQ_DIAM);
    Ok(())
}
