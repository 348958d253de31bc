use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs_sampler::{GibbsDraws, MixtureCoordinate};
use crate::limit_states::{kappa_from_resultant, WindowedConfigurations};
use crate::linalg::{norm, unit};
use crate::model_core::{CriticalConstants, DisorderSample};

/// Finite summary of a state on a window of sites.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowFingerprint {
    pub window: Vec<usize>,
    pub d: usize,
    pub count: usize,
    /// Per (site, component), row-major in window order.
    pub mean: Vec<f64>,
    pub stdev: Vec<f64>,
    /// Estimated magnetization direction Ω̂.
    pub direction: Vec<f64>,
    /// Estimated tilt concentration κ̂ of the direction law, from latent draws.
    pub tilt: Option<f64>,
}

/// Summarizes windowed draws.
///
/// The direction is the normalized average of (φ_j(i) − h_j(i))/r* over draws
/// and window sites (pass `h = None` for the scaled model). When latent
/// coordinates are given, κ̂ inverts the mean resultant length of the x̂
/// directions, i.e. the concentration of the tilted sphere law they follow.
pub fn fingerprint_state(
    configs: &WindowedConfigurations,
    h: Option<&DisorderSample>,
    constants: &CriticalConstants,
    latents: Option<&[MixtureCoordinate]>,
) -> Result<WindowFingerprint> {
    if configs.len() < 100 {
        return Err(Error::InvalidArgument(format!("fingerprints need >= 100 configurations, got {}", configs.len())));
    }
    if !(constants.r_star > 0.0) {
        return Err(Error::Paramagnetic);
    }
    let d = configs.d;
    let width = configs.window.len() * d;
    let cnt = configs.len() as f64;
    let mut mean = vec![0.0; width];
    for draw in &configs.draws {
        if draw.len() != width {
            return Err(Error::DimensionMismatch("draw does not match its window".into()));
        }
        mean.iter_mut().zip(draw).for_each(|(m, v)| *m += v / cnt);
    }
    let mut var = vec![0.0; width];
    for draw in &configs.draws {
        var.iter_mut().zip(draw.iter().zip(&mean)).for_each(|(s, (v, m))| *s += (v - m).powi(2) / (cnt - 1.0));
    }
    let mut acc = vec![0.0; d];
    for (w, &i) in configs.window.iter().enumerate() {
        for j in 0..d {
            let hij = match h {
                Some(h) => *h.site(i).get(j).ok_or_else(|| Error::DimensionMismatch("field d differs".into()))?,
                None => 0.0,
            };
            acc[j] += (mean[w * d + j] - hij) / constants.r_star;
        }
    }
    let direction = unit(&acc).ok_or(Error::ZeroVector)?;
    let tilt = latents.map(|ls| {
        let mut r = vec![0.0; d];
        for c in ls {
            if let Some(u) = unit(&c.x) {
                r.iter_mut().zip(&u).for_each(|(a, b)| *a += b / ls.len() as f64);
            }
        }
        kappa_from_resultant(d, norm(&r))
    });
    Ok(WindowFingerprint {
        window: configs.window.clone(),
        d,
        count: configs.len(),
        mean,
        stdev: var.into_iter().map(f64::sqrt).collect(),
        direction,
        tilt,
    })
}

/// The first `count` Gibbs configurations restricted to a window.
pub fn gibbs_window(draws: &GibbsDraws, window: &[usize], count: usize) -> WindowedConfigurations {
    let count = count.min(draws.len());
    let d = draws.latents.first().map(|c| c.d()).unwrap_or(0);
    let rows = (0..count).into_par_iter().map(|k| draws.configuration(k).window(window)).collect();
    WindowedConfigurations { window: window.to_vec(), d, draws: rows }
}
