//! Acceptance suite: one PASS/FAIL line per criterion, sub-checks indented
//! below it. Tolerances are the pinned ones; sizes are the full desk-scale
//! sizes. Set RFSM_ACCEPTANCE_OUT=<dir> to keep the run directories.
//!
//! A few sub-checks are known to fail for reasons analysed in the decision
//! log (see README). They still print FAIL, but only an unexpected failure
//! makes the process exit nonzero.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rfsm::experiment_harness::{run_experiment, ExperimentConfig, ExperimentKind, RunManifest};
use rfsm::gibbs_sampler::{sample_gibbs, ChainConfig, MixtureCoordinate};
use rfsm::limit_states::PureStateSpec;
use rfsm::measure_tools::{eq_partition, fingerprint_state, gibbs_window};
use rfsm::model_core::{
    classify_regime, compute_sample_stats, maximizer_set_numeric, FieldScaling, ModelParams, RegimeClass, Symmetry,
    TiltCoefficients,
};
use rfsm::overlap_lab::microcanonical_overlap;
use rfsm::rng::{derive_seed, label};
use rfsm::stochastic_drivers::{generate_disorder, FieldDistributionSpec};

const SEED: u64 = 2026;

/// (criterion, sub-check) pairs expected to fail, with the reason.
const KNOWN_FAILURES: &[(u32, &str, &str)] = &[
    (5, "paramagnetic mean vs |s|^2", "the limiting tilt's maximizer gives (sqrt(5) - 2)^2, not |s|^2"),
    (11, "conditioning fraction", "expected pass rate ~0.84 at N = 10^5 (C_2N < C_N is the binding condition); passes or fails with the seed"),
    (13, "d=2 ball revisits", "for a 2D walk with step 0.5 the revisit probability over [10^2, 10^5] is ~0.8"),
];

struct Check {
    name: String,
    pass: bool,
    detail: String,
}

struct Criterion {
    id: u32,
    title: &'static str,
    checks: Vec<Check>,
    info: Vec<String>,
    error: Option<String>,
    seconds: f64,
}

impl Criterion {
    fn pass(&self) -> bool {
        self.error.is_none() && self.checks.iter().all(|c| c.pass)
    }

    fn unexpected(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .checks
            .iter()
            .filter(|c| !c.pass && !KNOWN_FAILURES.iter().any(|(id, n, _)| *id == self.id && *n == c.name))
            .map(|c| format!("{}: {}", self.id, c.name))
            .collect();
        if let Some(e) = &self.error {
            out.push(format!("{}: error: {e}", self.id));
        }
        out
    }
}

struct Ctx {
    root: PathBuf,
    _tmp: Option<tempfile::TempDir>,
    /// (run, max constraint deviation, configurations checked)
    constraint: Vec<(String, f64, usize)>,
}

impl Ctx {
    fn run(&mut self, name: &str, kind: ExperimentKind, edit: impl FnOnce(&mut ExperimentConfig)) -> Result<RunManifest, String> {
        let mut cfg = ExperimentConfig::preset(kind, derive_seed(SEED, label(name)));
        cfg.out = self.root.join(name);
        edit(&mut cfg);
        let m = run_experiment(&cfg).map_err(|e| format!("{name}: {e}"))?;
        if let Some(r) = m.record("constraint_deviation_max") {
            self.constraint.push((name.to_string(), r.value, m.configurations_checked));
        }
        Ok(m)
    }
}

fn value(m: &RunManifest, metric: &str) -> Result<f64, String> {
    m.record(metric).map(|r| r.value).ok_or_else(|| format!("run lacks {metric}"))
}

fn check(name: &str, pass: bool, detail: String) -> Check {
    Check { name: name.to_string(), pass, detail }
}

/// Harness record as a check, under a local name.
fn record(m: &RunManifest, metric: &str, name: &str) -> Result<Check, String> {
    let r = m.record(metric).ok_or_else(|| format!("run lacks {metric}"))?;
    Ok(check(name, r.pass, format!("{} = {:.6} ({})", metric, r.value, r.describe_rule())))
}

fn two_point(d: usize) -> FieldDistributionSpec {
    FieldDistributionSpec::two_point(vec![0.125f64.sqrt(); d]).expect("valid amplitudes")
}

type Outcome = Result<(Vec<Check>, Vec<String>), String>;

fn c1(ctx: &mut Ctx) -> Outcome {
    let total: usize = ctx.constraint.iter().map(|c| c.2).sum();
    let worst = ctx.constraint.iter().map(|c| c.1).fold(0.0, f64::max);
    Ok((
        vec![
            check("configurations checked", total >= 10_000, format!("{total} across {} runs (>= 10000)", ctx.constraint.len())),
            check("max |N_n/n - 1|", worst <= 1e-9, format!("{worst:.3e} (<= 1e-9)")),
        ],
        vec![],
    ))
}

fn c2(_: &mut Ctx) -> Outcome {
    let mut worst = 0.0f64;
    let mut count = 0;
    let mut wrong_class = Vec::new();
    for beta in [4.0, 5.0, 8.0, 12.0, 20.0] {
        for s2 in [0.05, 0.1, 0.2, 0.3] {
            let p = ModelParams::new(2, beta, FieldScaling::Unit).map_err(|e| e.to_string())?;
            // anisotropic split of |s|^2
            let sm = [0.3 * s2, 0.7 * s2];
            let reg = classify_regime(&p, &sm);
            let r_closed = (1.0 - 2.0 / beta - s2).sqrt();
            let num = maximizer_set_numeric(&TiltCoefficients::limit(&sm, &p), &p).map_err(|e| e.to_string())?;
            if reg.class != RegimeClass::FerromagneticSphere || num.symmetry != Symmetry::Orbit {
                wrong_class.push(format!("beta={beta} |s|^2={s2}"));
            }
            let dy = num.y.iter().zip(&sm).map(|(y, v)| (y - v.sqrt()).abs()).fold(0.0, f64::max);
            worst = worst.max((num.r_star - r_closed).abs()).max(dy).max((reg.constants.r_star - r_closed).abs());
            count += 1;
        }
    }
    Ok((
        vec![
            check("sweep deviation", worst <= 1e-8, format!("max |r* - r*_closed|, |y* - s| = {worst:.3e} over {count} points (<= 1e-8)")),
            check("ordered phase with orbit", wrong_class.is_empty(), format!("misclassified: {wrong_class:?}")),
        ],
        vec![],
    ))
}

fn c3(ctx: &mut Ctx) -> Outcome {
    let mut checks = Vec::new();
    for (d, n) in [(1, 20), (1, 40), (1, 80), (2, 20), (2, 40)] {
        let m = ctx.run(&format!("c3-d{d}-n{n}"), ExperimentKind::GibbsSample, |c| {
            c.model.d = d;
            c.field = two_point(d);
            c.sizes.n = n;
        })?;
        checks.push(record(&m, "oracle_z_max", &format!("d={d} n={n}"))?);
    }
    Ok((checks, vec![]))
}

fn c4(_: &mut Ctx) -> Outcome {
    let ca = MixtureCoordinate::new(vec![0.5, 0.1], vec![0.3, -0.2]).map_err(|e| e.to_string())?;
    let cb = MixtureCoordinate::new(vec![-0.2, 0.4], vec![0.1, 0.25]).map_err(|e| e.to_string())?;
    let mut checks = Vec::new();
    for n in [100, 1000, 10_000] {
        let h = generate_disorder(&two_point(2), n, derive_seed(SEED, label(&format!("c4-{n}")))).map_err(|e| e.to_string())?;
        let (mean, pred) =
            microcanonical_overlap(&h, &ca, &cb, 1000, derive_seed(SEED, label(&format!("c4-mc-{n}")))).map_err(|e| e.to_string())?;
        let tol = 5.0 / (n as f64).sqrt();
        checks.push(check(&format!("n={n}"), (mean - pred).abs() <= tol, format!("E R = {mean:.5}, prediction {pred:.5}, tol {tol:.4}")));
    }
    Ok((checks, vec![]))
}

fn c5(ctx: &mut Ctx) -> Outcome {
    let ferro = ctx.run("c5-ordered", ExperimentKind::OverlapUnscaled, |_| {})?;
    let para = ctx.run("c5-paramagnetic", ExperimentKind::OverlapUnscaled, |c| c.model.beta = 1.0)?;
    Ok((
        vec![
            record(&ferro, "overlap_mean", "ordered mean")?,
            record(&ferro, "overlap_stdev", "ordered stdev")?,
            record(&para, "overlap_mean", "paramagnetic mean vs |s|^2")?,
        ],
        vec![format!(
            "paramagnetic mean vs maximizer (r2*)^2: {:.5} vs {:.5} ({})",
            value(&para, "overlap_mean")?,
            para.record("overlap_mean_vs_maximizer").map_or(f64::NAN, |r| r.comparator),
            if para.record("overlap_mean_vs_maximizer").is_some_and(|r| r.pass) { "within 0.02" } else { "outside 0.02" }
        )],
    ))
}

fn c6(ctx: &mut Ctx) -> Outcome {
    let d2 = ctx.run("c6-d2", ExperimentKind::OverlapScaled, |_| {})?;
    // beta = 4 makes (r*)^2 = 1 - 1/beta = 0.75 in the scaled d = 1 model
    let d1 = ctx.run("c6-d1", ExperimentKind::OverlapScaled, |c| {
        c.model.d = 1;
        c.model.beta = 4.0;
        c.field = two_point(1);
    })?;
    let r = d1.record("overlap_mean_d1").ok_or("run lacks overlap_mean_d1")?;
    Ok((
        vec![
            record(&d2, "overlap_bl_distance", "d=2 BL distance to rho^R")?,
            check("d=1 conditional mean", r.pass, format!("{:.5} vs 0.75 tanh^2(beta r* R) = {:.5} (+-0.03)", r.value, r.comparator)),
        ],
        vec![],
    ))
}

fn c7(ctx: &mut Ctx) -> Outcome {
    let scaled = ctx.run("c7-scaled", ExperimentKind::OverlapScaled, |c| {
        c.sizes.replicas = 50;
        c.sizes.pairs = 500;
    })?;
    let unscaled = ctx.run("c7-unscaled", ExperimentKind::OverlapUnscaled, |c| {
        c.sizes.n = 10_000;
        c.sizes.replicas = 50;
        c.sizes.pairs = 500;
    })?;
    Ok((
        vec![record(&scaled, "overlap_mean_spread", "scaled spread")?, record(&unscaled, "overlap_mean_spread", "unscaled spread")?],
        vec![],
    ))
}

fn c8(ctx: &mut Ctx) -> Outcome {
    let d1 = ctx.run("c8-d1", ExperimentKind::Ultrametricity, |c| {
        c.model.d = 1;
        c.field = two_point(1);
    })?;
    let d2 = ctx.run("c8-d2", ExperimentKind::Ultrametricity, |_| {})?;
    Ok((vec![record(&d1, "violation_rate", "d=1 rate is 0")?, record(&d2, "violation_rate", "d=2 rate")?], vec![]))
}

fn c9(ctx: &mut Ctx) -> Outcome {
    let aw = ctx.run("c9-aw", ExperimentKind::MetastateAw, |_| {})?;
    let iso = ctx.run("c9-isotropic", ExperimentKind::MetastateAw, |c| {
        c.field = FieldDistributionSpec::gaussian(vec![vec![0.25, 0.0], vec![0.0, 0.25]]).expect("valid covariance");
    })?;
    Ok((
        vec![record(&aw, "aw_total_variation", "TV to AW cell masses")?, record(&iso, "aw_total_variation", "isotropic TV to uniform")?],
        vec![],
    ))
}

fn c10(ctx: &mut Ctx) -> Outcome {
    let d1 = ctx.run("c10-d1", ExperimentKind::MetastateNs, |c| {
        c.model.d = 1;
        c.field = FieldDistributionSpec::gaussian(vec![vec![0.125]]).expect("valid covariance");
    })?;
    let d2 = ctx.run("c10-d2", ExperimentKind::MetastateNs, |_| {})?;
    Ok((
        vec![
            record(&d1, "arcsine_ks", "d=1 arcsine KS")?,
            record(&d2, "occupation_max_diff", "d=2 occupation")?,
            record(&d1, "gibbs_proxy_agreement", "d=1 Gibbs proxy")?,
            record(&d2, "gibbs_proxy_agreement", "d=2 Gibbs proxy")?,
        ],
        vec![],
    ))
}

fn c11(ctx: &mut Ctx) -> Outcome {
    let m = ctx.run("c11", ExperimentKind::WalkDiagnostics, |_| {})?;
    Ok((vec![record(&m, "conditioning_pass_fraction", "conditioning fraction")?], vec![]))
}

fn c12(ctx: &mut Ctx) -> Outcome {
    let m = ctx.run("c12", ExperimentKind::PartitionCheck, |_| {})?;
    let diam: Vec<f64> = [8usize, 32, 128]
        .iter()
        .map(|&n| eq_partition(2, n).map(|p| p.max_diameter() * (n as f64).sqrt()))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let (lo, hi) = diam.iter().fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
    Ok((
        vec![record(&m, "equal_area_max_dev", "equal areas")?, record(&m, "diameter_scaling_spread", "geodesic diameter scaling")?],
        vec![format!("chord-metric spread for comparison: {:.4}", hi / lo - 1.0)],
    ))
}

fn c13(ctx: &mut Ctx) -> Outcome {
    let (d, beta, runs) = (3, 8.0, 20);
    let p = ModelParams::new(d, beta, FieldScaling::Unit).map_err(|e| e.to_string())?;
    let spec = two_point(d);
    let sm = spec.second_moments();
    let consts = classify_regime(&p, &sm).constants;
    let window: Vec<usize> = (0..16).collect();
    let (mut tilted, mut matched, mut raw_big, mut total) = (0, 0, 0, 0);
    for n in [1000usize, 10_000] {
        for r in 0..runs {
            let tag = format!("c13-{n}-{r}");
            let h = generate_disorder(&spec, n, derive_seed(SEED, label(&tag))).map_err(|e| e.to_string())?;
            let draws =
                sample_gibbs(&h, &p, &ChainConfig::new(derive_seed(SEED, label(&format!("{tag}-chain")))), 200).map_err(|e| e.to_string())?;
            let w = gibbs_window(&draws, &window, 200);
            let f = fingerprint_state(&w, Some(&h), &consts, Some(&draws.latents)).map_err(|e| e.to_string())?;
            let walk = compute_sample_stats(&h).map_err(|e| e.to_string())?.walk_sum;
            let walk_norm = walk.iter().map(|v| v * v).sum::<f64>().sqrt();
            let omega: Vec<f64> = walk.iter().map(|v| v / walk_norm).collect();
            let pure = PureStateSpec::for_model(omega.clone(), &p, &sm).map_err(|e| e.to_string())?;
            // pure state ν_Ω at Ω = Ŝ_n: per-site means within 5 standard errors, sd within 20%
            let se = pure.marginal_sd() / (f.count as f64).sqrt();
            let mean_ok = window.iter().enumerate().all(|(k, &i)| {
                (0..d).all(|j| (f.mean[k * d + j] - pure.marginal_mean(&omega, Some(h.site(i)), j)).abs() <= 5.0 * se)
            });
            let sd_ok = f.stdev.iter().all(|s| (s / pure.marginal_sd() - 1.0).abs() <= 0.2);
            let aligned = f.direction.iter().zip(&omega).map(|(a, b)| a * b).sum::<f64>() >= 0.95;
            total += 1;
            tilted += usize::from(f.tilt.unwrap_or(0.0) > 10.0);
            matched += usize::from(mean_ok && sd_ok && aligned);
            raw_big += usize::from(walk_norm > 10.0);
        }
    }
    let walk = ctx.run("c13-d2", ExperimentKind::WalkDiagnostics, |c| {
        c.field = two_point(2);
        c.sizes.paths = 1000;
    })?;
    let frac = |k: usize| k as f64 / total as f64;
    Ok((
        vec![
            check("d=3 tilt > 10", frac(tilted) >= 0.95, format!("kappa-hat > 10 in {tilted}/{total} runs (>= 95%)")),
            check("d=3 pure-state fingerprints", frac(matched) >= 0.95, format!("{matched}/{total} runs match nu_Omega at Omega = S_n/|S_n| (>= 95%)")),
            record(&walk, "ball_revisit_fraction", "d=2 ball revisits")?,
        ],
        vec![format!("|S_n| > 10 in {raw_big}/{total} runs")],
    ))
}

fn main() {
    let (root, tmp) = match std::env::var_os("RFSM_ACCEPTANCE_OUT") {
        Some(dir) => (PathBuf::from(dir), None),
        None => {
            let t = tempfile::tempdir().expect("temporary directory");
            (t.path().to_path_buf(), Some(t))
        }
    };
    let mut ctx = Ctx { root, _tmp: tmp, constraint: Vec::new() };
    let plan: [(u32, &str, fn(&mut Ctx) -> Outcome); 13] = [
        (2, "maximizer matches the closed form", c2),
        (3, "latent sampler agrees with the quadrature oracle", c3),
        (4, "microcanonical overlap", c4),
        (5, "unscaled overlap is trivial", c5),
        (6, "scaled overlap law", c6),
        (7, "non-self-averaging", c7),
        (8, "ultrametricity", c8),
        (9, "AW metastate", c9),
        (10, "NS metastate", c10),
        (11, "conditioning statistic", c11),
        (12, "partition properties", c12),
        (13, "cluster-point dichotomy", c13),
        // last: aggregates the constraint checks of every run above
        (1, "constraint conservation", c1),
    ];
    let started = Instant::now();
    let mut done = Vec::new();
    for (id, title, f) in plan {
        eprintln!("acceptance: criterion {id} ({title}) ...");
        let t = Instant::now();
        let (checks, info, error) = match f(&mut ctx) {
            Ok((c, i)) => (c, i, None),
            Err(e) => (Vec::new(), Vec::new(), Some(e)),
        };
        done.push(Criterion { id, title, checks, info, error, seconds: t.elapsed().as_secs_f64() });
    }
    done.sort_by_key(|c| c.id);

    for c in &done {
        println!("{} {:>2} {} [{:.1} s]", if c.pass() { "PASS" } else { "FAIL" }, c.id, c.title, c.seconds);
        for k in &c.checks {
            let known = KNOWN_FAILURES.iter().find(|(id, n, _)| *id == c.id && *n == k.name);
            let mark = match (k.pass, known) {
                (true, _) => "ok  ",
                (false, Some(_)) => "xx  ",
                (false, None) => "XX  ",
            };
            println!("       {mark}{}: {}", k.name, k.detail);
            if let (false, Some((_, _, why))) = (k.pass, known) {
                println!("           known: {why}");
            }
        }
        for i in &c.info {
            println!("       ..  {i}");
        }
        if let Some(e) = &c.error {
            println!("       XX  error: {e}");
        }
    }
    let failed = done.iter().filter(|c| !c.pass()).count();
    let unexpected: Vec<String> = done.iter().flat_map(Criterion::unexpected).collect();
    for c in &done {
        for k in c.checks.iter().filter(|k| k.pass) {
            if KNOWN_FAILURES.iter().any(|(id, n, _)| *id == c.id && *n == k.name) {
                println!("note: known failure {} `{}` passed in this run", c.id, k.name);
            }
        }
    }
    println!(
        "acceptance: {} passed, {} failed ({} unexpected) in {:.0} s; outputs in {}",
        done.len() - failed,
        failed,
        unexpected.len(),
        started.elapsed().as_secs_f64(),
        if ctx._tmp.is_some() { "a temporary directory".to_string() } else { display(&ctx.root) }
    );
    if !unexpected.is_empty() {
        println!("unexpected failures: {}", unexpected.join("; "));
        std::process::exit(1);
    }
}

fn display(p: &Path) -> String {
    p.display().to_string()
}
