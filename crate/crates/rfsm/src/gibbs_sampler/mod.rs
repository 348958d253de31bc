//! Exact finite-volume sampling of the Gibbs state through its mixture
//! representation: a latent (x, y) drawn from the mixing measure, then a
//! configuration from the shifted microcanonical measure at (x, y).

mod diagnostics;
mod mcmc;
mod microcanonical;
mod quadrature;

pub use diagnostics::{batch_standard_error, effective_sample_size, split_rhat, SamplerDiagnostics};
pub use mcmc::{log_mixture_density, sample_mixture, MixtureRun, MixtureTarget};
pub use microcanonical::{sample_microcanonical, sample_microcanonical_one};
pub use quadrature::{
    compare_with_oracle, frame_moments, mixture_quadrature_oracle, moment_names, MomentCheck, QuadratureResult, ReducedPoint,
};

use serde::{Deserialize, Serialize};

use crate::basis_transform::{build_basis, OrthonormalBasis};
use crate::error::{Error, Result};
use crate::linalg::norm_sq;
use crate::model_core::{compute_sample_stats, DisorderSample, ModelParams};
use crate::rng;

/// A point of the open ball B_{2d}(0, 1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureCoordinate {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl MixtureCoordinate {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() || x.is_empty() {
            return Err(Error::DimensionMismatch("x and y must share d >= 1".into()));
        }
        let r2 = norm_sq(&x) + norm_sq(&y);
        if !(r2 < 1.0) {
            return Err(Error::OutsideBall { norm_sq: r2 });
        }
        Ok(MixtureCoordinate { x, y })
    }

    pub fn origin(d: usize) -> Self {
        MixtureCoordinate { x: vec![0.0; d], y: vec![0.0; d] }
    }

    pub fn d(&self) -> usize {
        self.x.len()
    }

    /// 1 − |x|² − |y|².
    pub fn slack(&self) -> f64 {
        1.0 - norm_sq(&self.x) - norm_sq(&self.y)
    }
}

/// φ ∈ (ℝ^d)^n, row-major by site.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinConfiguration {
    pub n: usize,
    pub d: usize,
    pub values: Vec<f64>,
}

impl SpinConfiguration {
    pub fn new(n: usize, d: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * d {
            return Err(Error::DimensionMismatch(format!("expected {} values, got {}", n * d, values.len())));
        }
        Ok(SpinConfiguration { n, d, values })
    }

    pub fn site(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    /// N_n(φ) = Σ |φ(i)|².
    pub fn norm_sq(&self) -> f64 {
        norm_sq(&self.values)
    }

    pub fn constraint_deviation(&self) -> f64 {
        (self.norm_sq() / self.n as f64 - 1.0).abs()
    }

    pub fn magnetization(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.d];
        for i in 0..self.n {
            for (a, b) in m.iter_mut().zip(self.site(i)) {
                *a += b;
            }
        }
        m
    }

    /// Values at the given sites, concatenated.
    pub fn window(&self, sites: &[usize]) -> Vec<f64> {
        sites.iter().flat_map(|&i| self.site(i).iter().copied()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    /// Initial random-walk proposal stdev; `None` means 0.3/√n.
    pub proposal_sd: Option<f64>,
    pub burn_in: usize,
    pub thinning: usize,
    pub chains: usize,
    pub seed: u64,
}

impl ChainConfig {
    pub fn new(seed: u64) -> Self {
        ChainConfig { proposal_sd: None, burn_in: 2000, thinning: 5, chains: 4, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.burn_in == 0 || self.thinning == 0 || self.chains == 0 {
            return Err(Error::InvalidArgument("chain counts must be positive".into()));
        }
        if let Some(sd) = self.proposal_sd {
            if !(sd > 0.0 && sd.is_finite()) {
                return Err(Error::InvalidArgument(format!("proposal stdev must be positive, got {sd}")));
            }
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        ChainConfig { seed, ..self.clone() }
    }
}

/// Latent draws plus the basis needed to turn each into a configuration.
/// Configurations are produced lazily; draw k always uses RNG stream k, so
/// any subset can be generated in any order or in parallel.
#[derive(Clone, Debug)]
pub struct GibbsDraws {
    pub latents: Vec<MixtureCoordinate>,
    pub diagnostics: SamplerDiagnostics,
    pub basis: OrthonormalBasis,
    seed: u64,
}

impl GibbsDraws {
    pub fn len(&self) -> usize {
        self.latents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.latents.is_empty()
    }

    pub fn configuration(&self, k: usize) -> SpinConfiguration {
        let mut r = rng::stream(self.seed, k as u64);
        sample_microcanonical_one(&self.latents[k], &self.basis, &mut r)
    }

    pub fn iter(&self) -> impl Iterator<Item = SpinConfiguration> + '_ {
        (0..self.len()).map(move |k| self.configuration(k))
    }
}

/// `count` draws from μ_n^h: latent chains, then one microcanonical draw per latent sample.
pub fn sample_gibbs(h: &DisorderSample, p: &ModelParams, cfg: &ChainConfig, count: usize) -> Result<GibbsDraws> {
    sample_gibbs_with_chains(h, p, cfg, count).map(|(draws, _)| draws)
}

/// [`sample_gibbs`], also returning the per-chain latent run (for oracle checks).
pub fn sample_gibbs_with_chains(
    h: &DisorderSample,
    p: &ModelParams,
    cfg: &ChainConfig,
    count: usize,
) -> Result<(GibbsDraws, MixtureRun)> {
    if h.d != p.d {
        return Err(Error::DimensionMismatch(format!("field d={} but model d={}", h.d, p.d)));
    }
    let stats = compute_sample_stats(h)?;
    let basis = build_basis(h)?;
    let latent_cfg = cfg.with_seed(rng::derive_seed(cfg.seed, rng::label("latent")));
    let run = sample_mixture(&stats, p, h.n, &latent_cfg, count)?;
    let draws = GibbsDraws {
        latents: run.draws(),
        diagnostics: run.diagnostics.clone(),
        basis,
        seed: rng::derive_seed(cfg.seed, rng::label("microcanonical")),
    };
    Ok((draws, run))
}

/// Single-site marginals of the limiting product state ν^{x,y,h} on a window:
/// mean x_j + y_j (h_j(i) − m_j)/s_j and stdev sqrt((1 − |x|² − |y|²)/d).
/// Components with s_j = 0 carry no y-shift.
pub fn limit_marginal_params(
    c: &MixtureCoordinate,
    h: Option<&DisorderSample>,
    window: &[usize],
    m: &[f64],
    s: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let d = c.d();
    if m.len() != d || s.len() != d {
        return Err(Error::DimensionMismatch("limits must have length d".into()));
    }
    let sd = (c.slack().max(0.0) / d as f64).sqrt();
    let mut out = Vec::with_capacity(window.len() * d);
    for &i in window {
        for j in 0..d {
            let hij = match h {
                Some(h) => {
                    if i >= h.n {
                        return Err(Error::InvalidArgument(format!("site {i} outside the field of {} sites", h.n)));
                    }
                    h.get(i, j)
                }
                None => 0.0,
            };
            let shift = if s[j] > 0.0 { c.y[j] * (hij - m[j]) / s[j] } else { 0.0 };
            out.push((c.x[j] + shift, sd));
        }
    }
    Ok(out)
}
