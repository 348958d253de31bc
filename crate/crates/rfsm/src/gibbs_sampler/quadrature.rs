//! Tensor-grid quadrature of the mixing measure, used only as a small-n oracle.
//!
//! Everything is computed in frame coordinates x' = O x, y' = U y, where the
//! density depends on x' only through (|x'|, x'₁) and on y' only through
//! (|y'|, y'₁). For d = 1 the grid is the (x, y) square clipped to the disk.
//! For d = 2 the x-plane is written in polar form (r, θ) with θ ∈ [0, π]
//! (weight 2 by reflection) and y' = (y₁, y_⊥); the y_⊥ integral is done in
//! closed form: with A = 1 − r² − y₁² and p = nd/2 − d − 1,
//!   ∫_{|y_⊥|² < A} (A − |y_⊥|²)^p dy_⊥ ∝ A^{p + (d−1)/2},
//!   E[|y_⊥|² | r, θ, y₁] = A (d − 1)/(d − 1 + 2p + 2).

use serde::{Deserialize, Serialize};

use super::{batch_standard_error, MixtureCoordinate, MixtureRun};
use crate::basis_transform::{change_of_frame, FieldFrames, Frame, FrameDirection};
use crate::error::{Error, Result};
use crate::linalg::norm;
use crate::model_core::{ModelParams, SampleStats, TiltCoefficients};

/// Names of the frame-coordinate moments reported by the oracle, in order.
pub fn moment_names(d: usize) -> Vec<&'static str> {
    match d {
        1 => vec!["x", "y", "x^2", "y^2", "xy"],
        _ => vec!["x1", "x2", "y1", "y2", "x1^2", "x2^2", "y1^2", "y2^2", "x1*y1"],
    }
}

/// The same moment functions evaluated at one latent point (for Monte Carlo averages).
pub fn frame_moments(c: &MixtureCoordinate, frames: &FieldFrames) -> Vec<f64> {
    let x = change_of_frame(&c.x, frames, Frame::O, FrameDirection::Forward).expect("frames present");
    let y = change_of_frame(&c.y, frames, Frame::U, FrameDirection::Forward).expect("frames present");
    match c.d() {
        1 => vec![x[0], y[0], x[0] * x[0], y[0] * y[0], x[0] * y[0]],
        _ => vec![x[0], x[1], y[0], y[1], x[0] * x[0], x[1] * x[1], y[0] * y[0], y[1] * y[1], x[0] * y[0]],
    }
}

/// A grid node in reduced coordinates: r = |x'|, θ the angle of x' to m̂,
/// y₁ the ŝ-component of y. For d = 1, θ ∈ {0, π} encodes the sign of x'.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReducedPoint {
    pub r: f64,
    pub theta: f64,
    pub y1: f64,
}

#[derive(Clone, Debug)]
pub struct QuadratureResult {
    pub d: usize,
    pub moments: Vec<(String, f64)>,
    pub total_mass: f64,
    /// max |moment(N) − moment(N/2)|.
    pub error_estimate: f64,
    pub resolution: usize,
    nodes: Vec<(ReducedPoint, f64)>,
}

impl QuadratureResult {
    pub fn moment(&self, name: &str) -> Option<f64> {
        self.moments.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }

    /// Normalized mass of the nodes satisfying `pred`.
    pub fn mass_where(&self, pred: impl Fn(&ReducedPoint) -> bool) -> f64 {
        self.nodes.iter().filter(|(p, _)| pred(p)).map(|(_, w)| w).sum()
    }

    /// The normalized density table (node, weight); nodes with negligible weight are dropped.
    pub fn table(&self) -> &[(ReducedPoint, f64)] {
        &self.nodes
    }
}

pub fn mixture_quadrature_oracle(
    stats: &SampleStats,
    p: &ModelParams,
    n: usize,
    resolution: usize,
) -> Result<QuadratureResult> {
    let d = p.d;
    if d > 2 {
        return Err(Error::InvalidArgument("quadrature oracle supports d <= 2".into()));
    }
    if !(8..=256).contains(&resolution) {
        return Err(Error::InvalidArgument(format!("resolution must be in 8..=256, got {resolution}")));
    }
    if n < 3 {
        return Err(Error::InvalidArgument("mixing measure needs n >= 3".into()));
    }
    let coef = TiltCoefficients::finite(stats, p, n);
    let fine = integrate(&coef, p.beta, n, d, resolution);
    let coarse = integrate(&coef, p.beta, n, d, resolution / 2);
    let error_estimate = fine
        .moments
        .iter()
        .zip(&coarse.moments)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if error_estimate > 1e-4 {
        return Err(Error::QuadratureTooCoarse { estimate: error_estimate });
    }
    let names = moment_names(d);
    Ok(QuadratureResult {
        d,
        moments: names.iter().map(|s| s.to_string()).zip(fine.moments).collect(),
        total_mass: fine.nodes.iter().map(|(_, w)| w).sum(),
        error_estimate,
        resolution,
        nodes: fine.nodes,
    })
}

/// One latent moment: Monte Carlo mean ± batch-means standard error against the oracle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentCheck {
    pub name: String,
    pub mc_mean: f64,
    pub mc_se: f64,
    pub oracle: f64,
    pub oracle_error: f64,
}

impl MomentCheck {
    /// |mc − oracle| in units of the combined standard error.
    pub fn z(&self) -> f64 {
        (self.mc_mean - self.oracle).abs() / (self.mc_se.powi(2) + self.oracle_error.powi(2)).sqrt()
    }
}

/// Frame moments of a finished latent run against the quadrature oracle (resolution 256).
pub fn compare_with_oracle(run: &MixtureRun, stats: &SampleStats, p: &ModelParams, n: usize) -> Result<Vec<MomentCheck>> {
    let quad = mixture_quadrature_oracle(stats, p, n, 256)?;
    let frames = FieldFrames::new_or_identity(&stats.mean, &stats.stdev);
    let per_chain: Vec<Vec<Vec<f64>>> =
        run.chains.iter().map(|c| c.iter().map(|s| frame_moments(s, &frames)).collect()).collect();
    Ok(moment_names(p.d)
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let series: Vec<Vec<f64>> = per_chain.iter().map(|c| c.iter().map(|m| m[k]).collect()).collect();
            let total: usize = series.iter().map(Vec::len).sum();
            MomentCheck {
                name: name.to_string(),
                mc_mean: series.iter().flatten().sum::<f64>() / total as f64,
                mc_se: batch_standard_error(&series, 20),
                oracle: quad.moment(name).expect("named moment"),
                oracle_error: quad.error_estimate,
            }
        })
        .collect())
}

struct Integrated {
    moments: Vec<f64>,
    nodes: Vec<(ReducedPoint, f64)>,
}

fn integrate(coef: &TiltCoefficients, beta: f64, n: usize, d: usize, res: usize) -> Integrated {
    let (mn, sn) = (norm(&coef.m), norm(&coef.s));
    let nf = n as f64;
    let power = (n * d) as f64 / 2.0 - d as f64 - 1.0;
    let mut raw: Vec<(ReducedPoint, f64, f64)> = Vec::new(); // node, log weight, E|y_⊥|² factor
    let h = 2.0 / res as f64;
    if d == 1 {
        for a in 0..res {
            let x = -1.0 + (a as f64 + 0.5) * h;
            for b in 0..res {
                let y = -1.0 + (b as f64 + 0.5) * h;
                let slack = 1.0 - x * x - y * y;
                if slack <= 0.0 {
                    continue;
                }
                let lw = nf * (0.5 * beta * x * x + beta * mn * x + beta * sn * y) + power * slack.ln();
                let pt = ReducedPoint { r: x.abs(), theta: if x < 0.0 { std::f64::consts::PI } else { 0.0 }, y1: y };
                raw.push((pt, lw, 0.0));
            }
        }
    } else {
        let k = (d - 1) as f64;
        let hr = 1.0 / res as f64;
        let ht = std::f64::consts::PI / res as f64;
        for a in 0..res {
            let r = (a as f64 + 0.5) * hr;
            for t in 0..res {
                let th = (t as f64 + 0.5) * ht;
                let sin_w = th.sin().powi(d as i32 - 2);
                for b in 0..res {
                    let y1 = -1.0 + (b as f64 + 0.5) * h;
                    let slack = 1.0 - r * r - y1 * y1;
                    if slack <= 0.0 {
                        continue;
                    }
                    let lw = nf * (0.5 * beta * r * r + beta * mn * r * th.cos() + beta * sn * y1)
                        + (power + k / 2.0) * slack.ln()
                        + (r.powi(d as i32 - 1) * sin_w).ln();
                    let yperp = slack * k / (k + 2.0 * power + 2.0);
                    raw.push((ReducedPoint { r, theta: th, y1 }, lw, yperp));
                }
            }
        }
    }
    let lmax = raw.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = raw.iter().map(|v| (v.1 - lmax).exp()).collect();
    let total: f64 = weights.iter().sum();
    let nm = moment_names(d).len();
    let mut moments = vec![0.0; nm];
    let mut nodes = Vec::new();
    for ((pt, _, yperp), w) in raw.iter().zip(&weights) {
        let w = w / total;
        let vals = if d == 1 {
            let x = if pt.theta > 0.0 { -pt.r } else { pt.r };
            vec![x, pt.y1, x * x, pt.y1 * pt.y1, x * pt.y1]
        } else {
            let x1 = pt.r * pt.theta.cos();
            let x2sq = (pt.r * pt.theta.sin()).powi(2);
            // x₂ and y₂ have symmetric laws: first moments vanish.
            vec![x1, 0.0, pt.y1, 0.0, x1 * x1, x2sq, pt.y1 * pt.y1, *yperp, x1 * pt.y1]
        };
        for (m, v) in moments.iter_mut().zip(vals) {
            *m += w * v;
        }
        if w > 1e-18 {
            nodes.push((*pt, w));
        }
    }
    Integrated { moments, nodes }
}
