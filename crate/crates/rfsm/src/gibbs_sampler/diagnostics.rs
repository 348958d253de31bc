use serde::{Deserialize, Serialize};

use super::mcmc::ChainOutput;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerDiagnostics {
    /// Post-burn-in acceptance of the random-walk moves.
    pub acceptance_rate: f64,
    pub orbit_acceptance_rate: f64,
    /// Effective sample size per latent coordinate (x₁..x_d, y₁..y_d).
    pub ess: Vec<f64>,
    /// Maximum split-chain potential scale reduction over coordinates.
    pub split_rhat: f64,
    pub boundary_rejections: u64,
    pub converged: bool,
    pub chains: usize,
    pub samples_per_chain: usize,
    pub mean_final_proposal_sd: f64,
}

impl SamplerDiagnostics {
    pub(super) fn from_chains(chains: &[ChainOutput]) -> Self {
        let sum = |f: fn(&ChainOutput) -> u64| chains.iter().map(f).sum::<u64>();
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let d = chains.first().and_then(|c| c.samples.first()).map(|s| s.x.len()).unwrap_or(0);
        let mut ess = Vec::with_capacity(2 * d);
        let mut rhat = 1.0f64;
        for k in 0..2 * d {
            let series: Vec<Vec<f64>> = chains
                .iter()
                .map(|c| c.samples.iter().map(|s| if k < d { s.x[k] } else { s.y[k - d] }).collect())
                .collect();
            ess.push(effective_sample_size(&series));
            rhat = rhat.max(split_rhat(&series));
        }
        SamplerDiagnostics {
            acceptance_rate: ratio(sum(|c| c.rw_accepted), sum(|c| c.rw_proposed)),
            orbit_acceptance_rate: ratio(sum(|c| c.orbit_accepted), sum(|c| c.orbit_proposed)),
            ess,
            split_rhat: rhat,
            boundary_rejections: sum(|c| c.boundary_rejections),
            converged: rhat <= 1.1,
            chains: chains.len(),
            samples_per_chain: chains.first().map(|c| c.samples.len()).unwrap_or(0),
            mean_final_proposal_sd: chains.iter().map(|c| c.final_sd).sum::<f64>() / chains.len().max(1) as f64,
        }
    }

    pub fn ensure_converged(&self) -> Result<()> {
        if self.converged {
            Ok(())
        } else {
            Err(Error::SamplerNotConverged { rhat: self.split_rhat })
        }
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn var(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)
}

/// Split-chain R̂: each chain is halved and the between/within variance ratio
/// of the halves is formed. Returns 1 for constant or too-short input.
pub fn split_rhat(chains: &[Vec<f64>]) -> f64 {
    let half = chains.iter().map(|c| c.len() / 2).min().unwrap_or(0);
    if half < 2 {
        return 1.0;
    }
    let parts: Vec<&[f64]> = chains.iter().flat_map(|c| [&c[..half], &c[half..2 * half]]).collect();
    let l = half as f64;
    let means: Vec<f64> = parts.iter().map(|p| mean(p)).collect();
    let w = parts.iter().map(|p| var(p)).sum::<f64>() / parts.len() as f64;
    let b = l * var(&means);
    if !(w > 0.0) {
        return 1.0;
    }
    (((l - 1.0) / l * w + b / l) / w).sqrt()
}

/// Sum over chains of the single-chain ESS (Geyer initial positive sequence).
pub fn effective_sample_size(chains: &[Vec<f64>]) -> f64 {
    chains.iter().map(|c| single_chain_ess(c)).sum()
}

fn single_chain_ess(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 4 {
        return n as f64;
    }
    let m = mean(x);
    let c0 = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64;
    if !(c0 > 0.0) {
        return n as f64;
    }
    let acov = |lag: usize| (0..n - lag).map(|i| (x[i] - m) * (x[i + lag] - m)).sum::<f64>() / n as f64;
    let mut tau = -1.0;
    let mut lag = 0;
    while lag + 1 < n / 2 {
        let pair = (acov(lag) + acov(lag + 1)) / c0;
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        lag += 2;
    }
    (n as f64 / tau.max(1.0 / n as f64)).min(n as f64 * (n as f64).log10().max(1.0))
}

/// Standard error of the grand mean by non-overlapping batch means
/// (`batches` per chain), pooled over chains.
pub fn batch_standard_error(chains: &[Vec<f64>], batches: usize) -> f64 {
    let mut bm = Vec::new();
    for c in chains {
        let size = c.len() / batches.max(1);
        if size == 0 {
            continue;
        }
        for b in 0..batches {
            bm.push(mean(&c[b * size..(b + 1) * size]));
        }
    }
    if bm.len() < 2 {
        return f64::INFINITY;
    }
    (var(&bm) / bm.len() as f64).sqrt()
}
