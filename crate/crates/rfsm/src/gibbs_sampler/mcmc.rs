use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::diagnostics::SamplerDiagnostics;
use super::{ChainConfig, MixtureCoordinate};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm_sq, unit};
use crate::model_core::{classify_regime, FieldScaling, ModelParams, RegimeClass, SampleStats, TiltCoefficients};
use crate::rng;

/// Unnormalized log density of the mixing measure,
/// n ψ_n(x, y) − (d + 1) ln(1 − |x|² − |y|²).
#[derive(Clone, Debug)]
pub struct MixtureTarget {
    pub n: usize,
    pub d: usize,
    pub beta: f64,
    pub coef: TiltCoefficients,
    /// Exponent of (1 − |x|² − |y|²): nd/2 − d − 1.
    pub power: f64,
}

impl MixtureTarget {
    pub fn new(stats: &SampleStats, p: &ModelParams, n: usize) -> Result<Self> {
        if stats.d() != p.d {
            return Err(Error::DimensionMismatch(format!("stats d={} but model d={}", stats.d(), p.d)));
        }
        let d = p.d;
        Ok(MixtureTarget {
            n,
            d,
            beta: p.beta,
            coef: TiltCoefficients::finite(stats, p, n),
            power: (n * d) as f64 / 2.0 - d as f64 - 1.0,
        })
    }

    /// −∞ outside the open ball.
    pub fn log_density(&self, x: &[f64], y: &[f64]) -> f64 {
        let xx = norm_sq(x);
        let slack = 1.0 - xx - norm_sq(y);
        if !(slack > 0.0) {
            return f64::NEG_INFINITY;
        }
        let lin = 0.5 * self.beta * xx + self.beta * dot(&self.coef.m, x) + self.beta * dot(&self.coef.s, y);
        self.n as f64 * lin + self.power * slack.ln()
    }
}

pub fn log_mixture_density(c: &MixtureCoordinate, stats: &SampleStats, p: &ModelParams, n: usize) -> Result<f64> {
    let r2 = norm_sq(&c.x) + norm_sq(&c.y);
    if !(r2 < 1.0) {
        return Err(Error::OutsideBall { norm_sq: r2 });
    }
    Ok(MixtureTarget::new(stats, p, n)?.log_density(&c.x, &c.y))
}

#[derive(Clone, Debug)]
pub struct MixtureRun {
    pub chains: Vec<Vec<MixtureCoordinate>>,
    pub diagnostics: SamplerDiagnostics,
    pub count: usize,
}

impl MixtureRun {
    /// Draws interleaved across chains (round robin), truncated to the requested count.
    pub fn draws(&self) -> Vec<MixtureCoordinate> {
        let per = self.chains.iter().map(|c| c.len()).max().unwrap_or(0);
        let mut out = Vec::with_capacity(self.count);
        'outer: for k in 0..per {
            for c in &self.chains {
                if out.len() == self.count {
                    break 'outer;
                }
                if let Some(v) = c.get(k) {
                    out.push(v.clone());
                }
            }
        }
        out
    }
}

/// Random-walk Metropolis on the open ball, with symmetric orbit moves.
///
/// Each iteration makes one Gaussian random-walk move on (x, y) (proposals
/// leaving the ball are rejected) and one orbit move on x: a sign flip for
/// d = 1, a rotation by a N(0, σ_rot) angle in a uniformly random plane for
/// d ≥ 2. Both moves are symmetric, so plain Metropolis acceptance applies.
/// Step sizes adapt during burn-in only (random walk toward 0.3 acceptance).
/// Chains start on the closed-form maximizer orbit of the finite-n tilt.
pub fn sample_mixture(
    stats: &SampleStats,
    p: &ModelParams,
    n: usize,
    cfg: &ChainConfig,
    count: usize,
) -> Result<MixtureRun> {
    cfg.validate()?;
    p.validate()?;
    if n < 3 {
        return Err(Error::InvalidArgument(format!("mixing measure needs n >= 3, got {n}")));
    }
    if count == 0 {
        return Err(Error::InvalidArgument("sample count must be positive".into()));
    }
    let target = MixtureTarget::new(stats, p, n)?;
    let per_chain = count.div_ceil(cfg.chains);
    let sd0 = cfg.proposal_sd.unwrap_or(0.3 / (n as f64).sqrt());
    let start = start_point(stats, p);
    let results: Vec<ChainOutput> = (0..cfg.chains)
        .into_par_iter()
        .map(|c| run_chain(&target, &start, sd0, cfg, per_chain, &mut rng::stream(cfg.seed, c as u64)))
        .collect();
    let diagnostics = SamplerDiagnostics::from_chains(&results);
    Ok(MixtureRun { chains: results.into_iter().map(|r| r.samples).collect(), diagnostics, count })
}

/// (r*, y*) of the finite-n closed form, or `None` for the origin.
fn start_point(stats: &SampleStats, p: &ModelParams) -> Option<(f64, Vec<f64>)> {
    let moments: Vec<f64> = stats.stdev.iter().map(|s| s * s).collect();
    let reg = classify_regime(p, &moments);
    match reg.class {
        RegimeClass::FerromagneticSphere => {
            let y = match p.scaling {
                FieldScaling::Unit => stats.stdev.clone(),
                FieldScaling::InverseSqrtVolume => vec![0.0; p.d],
            };
            Some((reg.constants.r_star, y))
        }
        RegimeClass::UniqueMaximizer => None,
    }
}

pub(super) struct ChainOutput {
    pub samples: Vec<MixtureCoordinate>,
    pub rw_accepted: u64,
    pub rw_proposed: u64,
    pub orbit_accepted: u64,
    pub orbit_proposed: u64,
    pub boundary_rejections: u64,
    pub final_sd: f64,
}

fn run_chain(
    target: &MixtureTarget,
    start: &Option<(f64, Vec<f64>)>,
    sd0: f64,
    cfg: &ChainConfig,
    per_chain: usize,
    rng: &mut rng::StreamRng,
) -> ChainOutput {
    let d = target.d;
    let (mut x, mut y) = match start {
        Some((r, ys)) => {
            let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let om = unit(&g).unwrap_or_else(|| {
                let mut e = vec![0.0; d];
                e[0] = 1.0;
                e
            });
            (om.iter().map(|v| v * r).collect::<Vec<f64>>(), ys.clone())
        }
        None => (vec![0.0; d], vec![0.0; d]),
    };
    let mut lp = target.log_density(&x, &y);
    let mut sd = sd0;
    let mut rot = 0.5f64;
    let total = cfg.burn_in + per_chain * cfg.thinning;
    let mut out = ChainOutput {
        samples: Vec::with_capacity(per_chain),
        rw_accepted: 0,
        rw_proposed: 0,
        orbit_accepted: 0,
        orbit_proposed: 0,
        boundary_rejections: 0,
        final_sd: sd,
    };
    let (mut batch_rw, mut batch_orbit) = (0u32, 0u32);
    let mut xp = vec![0.0; d];
    let mut yp = vec![0.0; d];
    for it in 0..total {
        let burning = it < cfg.burn_in;
        // random walk on (x, y)
        for j in 0..d {
            xp[j] = x[j] + sd * rng.sample::<f64, _>(StandardNormal);
            yp[j] = y[j] + sd * rng.sample::<f64, _>(StandardNormal);
        }
        let lq = target.log_density(&xp, &yp);
        let mut accepted = false;
        if lq == f64::NEG_INFINITY {
            if !burning {
                out.boundary_rejections += 1;
            }
        } else if lq >= lp || rng.random::<f64>() < (lq - lp).exp() {
            x.copy_from_slice(&xp);
            y.copy_from_slice(&yp);
            lp = lq;
            accepted = true;
        }
        if !burning {
            out.rw_proposed += 1;
            out.rw_accepted += accepted as u64;
        }
        batch_rw += accepted as u32;

        // orbit move on x
        orbit_proposal(&x, &mut xp, rot, rng);
        let lq = target.log_density(&xp, &y);
        let accepted = lq > f64::NEG_INFINITY && (lq >= lp || rng.random::<f64>() < (lq - lp).exp());
        if accepted {
            x.copy_from_slice(&xp);
            lp = lq;
        }
        if !burning {
            out.orbit_proposed += 1;
            out.orbit_accepted += accepted as u64;
        }
        batch_orbit += accepted as u32;

        if burning && (it + 1) % 50 == 0 {
            let a = batch_rw as f64 / 50.0;
            sd *= (2.0 * (a - 0.3)).exp();
            let b = batch_orbit as f64 / 50.0;
            rot = (rot * (2.0 * (b - 0.4)).exp()).clamp(1e-6, std::f64::consts::PI);
            batch_rw = 0;
            batch_orbit = 0;
        }
        if !burning && (it + 1 - cfg.burn_in) % cfg.thinning == 0 {
            out.samples.push(MixtureCoordinate { x: x.clone(), y: y.clone() });
        }
    }
    out.final_sd = sd;
    out
}

fn orbit_proposal(x: &[f64], out: &mut [f64], rot: f64, rng: &mut rng::StreamRng) {
    let d = x.len();
    if d == 1 {
        out[0] = -x[0];
        return;
    }
    let a: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let a = unit(&a).unwrap_or_else(|| (0..d).map(|k| if k == 0 { 1.0 } else { 0.0 }).collect());
    let mut b: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let ab = dot(&a, &b);
    for (bk, ak) in b.iter_mut().zip(&a) {
        *bk -= ab * ak;
    }
    let b = unit(&b).unwrap_or_else(|| (0..d).map(|k| if k == 1 { 1.0 } else { 0.0 }).collect());
    let angle = rot * rng.sample::<f64, _>(StandardNormal);
    let (xa, xb) = (dot(x, &a), dot(x, &b));
    let (c, s) = (angle.cos(), angle.sin());
    for k in 0..d {
        out[k] = x[k] + (c - 1.0) * (xa * a[k] + xb * b[k]) + s * (xa * b[k] - xb * a[k]);
    }
}
