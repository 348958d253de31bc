//! Limiting states: pure states ν_Ω, tilted sphere laws γ^z, tilted mixtures
//! of pure states, and the overlap family ρ^R.

use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, norm_sq, unit};
use crate::measure_tools::EmpiricalLaw1D;
use crate::model_core::{classify_regime, CriticalConstants, DisorderSample, ModelParams};

/// A limiting pure state: product Gaussian with site marginals
/// N(r*Ω_j + (y*_j/s_j) h_j(i), (1 − r*² − |y*|²)/d). In the ordered phase
/// y* = s, so the mean is r*Ω_j + h_j(i) and the variance is 1/β.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PureStateSpec {
    pub omega: Vec<f64>,
    pub constants: CriticalConstants,
    /// Limiting s_j = sqrt(E h_j²); zero for the scaled model.
    pub s: Vec<f64>,
}

impl PureStateSpec {
    pub fn new(omega: Vec<f64>, constants: CriticalConstants, s: Vec<f64>) -> Result<Self> {
        if (norm(&omega) - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("|Omega| = {} is not 1", norm(&omega))));
        }
        if s.len() != omega.len() || constants.y_star.len() != omega.len() {
            return Err(Error::DimensionMismatch("Omega, s and y* must share d".into()));
        }
        Ok(PureStateSpec { omega, constants, s })
    }

    /// Constants from the closed-form regime of `p` with field moments E h_j².
    pub fn for_model(omega: Vec<f64>, p: &ModelParams, second_moments: &[f64]) -> Result<Self> {
        let reg = classify_regime(p, second_moments);
        let s = match p.scaling {
            crate::model_core::FieldScaling::Unit => second_moments.iter().map(|v| v.sqrt()).collect(),
            crate::model_core::FieldScaling::InverseSqrtVolume => vec![0.0; p.d],
        };
        PureStateSpec::new(omega, reg.constants, s)
    }

    pub fn d(&self) -> usize {
        self.omega.len()
    }

    pub fn marginal_sd(&self) -> f64 {
        let slack = 1.0 - self.constants.r_star.powi(2) - norm_sq(&self.constants.y_star);
        (slack.max(0.0) / self.d() as f64).sqrt()
    }

    /// Mean of φ_j(i) given the field row h(i) (None: zero field).
    pub fn marginal_mean(&self, omega: &[f64], h_row: Option<&[f64]>, j: usize) -> f64 {
        let shift = match h_row {
            Some(row) if self.s[j] > 0.0 => self.constants.y_star[j] / self.s[j] * row[j],
            _ => 0.0,
        };
        self.constants.r_star * omega[j] + shift
    }
}

/// Draws restricted to a finite window of sites; each draw is row-major by
/// (site in window order, component).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowedConfigurations {
    pub window: Vec<usize>,
    pub d: usize,
    pub draws: Vec<Vec<f64>>,
}

impl WindowedConfigurations {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }
}

fn field_rows<'a>(h: Option<&'a DisorderSample>, window: &[usize]) -> Result<Vec<Option<&'a [f64]>>> {
    window
        .iter()
        .map(|&i| match h {
            Some(h) if i >= h.n => Err(Error::InvalidArgument(format!("site {i} outside the field of {} sites", h.n))),
            Some(h) => Ok(Some(h.site(i))),
            None => Ok(None),
        })
        .collect()
}

fn pure_draw<R: Rng + ?Sized>(spec: &PureStateSpec, omega: &[f64], rows: &[Option<&[f64]>], rng: &mut R) -> Vec<f64> {
    let d = spec.d();
    let sd = spec.marginal_sd();
    let mut out = Vec::with_capacity(rows.len() * d);
    for row in rows {
        for j in 0..d {
            out.push(spec.marginal_mean(omega, *row, j) + sd * rng.sample::<f64, _>(StandardNormal));
        }
    }
    out
}

pub fn sample_pure_state<R: Rng + ?Sized>(
    spec: &PureStateSpec,
    h: Option<&DisorderSample>,
    window: &[usize],
    count: usize,
    rng: &mut R,
) -> Result<WindowedConfigurations> {
    if let Some(h) = h {
        if h.d != spec.d() {
            return Err(Error::DimensionMismatch("field and state dimensions differ".into()));
        }
    }
    let rows = field_rows(h, window)?;
    let draws = (0..count).map(|_| pure_draw(spec, &spec.omega, &rows, rng)).collect();
    Ok(WindowedConfigurations { window: window.to_vec(), d: spec.d(), draws })
}

/// γ^z(dΩ) ∝ exp(βr*⟨z, Ω⟩) dΩ on S^{d−1}, stored as (ẑ, κ = βr*|z|).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TiltedSphereLaw {
    pub direction: Vec<f64>,
    pub kappa: f64,
}

impl TiltedSphereLaw {
    pub fn new(z: &[f64], beta: f64, r_star: f64) -> Result<Self> {
        if z.is_empty() {
            return Err(Error::InvalidArgument("tilt must have d >= 1".into()));
        }
        let kappa = beta * r_star * norm(z);
        let direction = unit(z).unwrap_or_else(|| e1(z.len()));
        TiltedSphereLaw::with_kappa(direction, kappa)
    }

    pub fn with_kappa(direction: Vec<f64>, kappa: f64) -> Result<Self> {
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(Error::Domain(format!("concentration must be finite and >= 0, got {kappa}")));
        }
        if (norm(&direction) - 1.0).abs() > 1e-9 {
            return Err(Error::Domain("tilt direction must be a unit vector".into()));
        }
        Ok(TiltedSphereLaw { direction, kappa })
    }

    pub fn d(&self) -> usize {
        self.direction.len()
    }

    /// E⟨Ω, ẑ⟩ under the law.
    pub fn mean_resultant_length(&self) -> f64 {
        mean_resultant_length(self.d(), self.kappa)
    }
}

fn e1(d: usize) -> Vec<f64> {
    let mut e = vec![0.0; d];
    e[0] = 1.0;
    e
}

/// Reusable sampler for one γ^z; the d = 2 angular CDF is tabulated once.
pub struct GammaSampler {
    law: TiltedSphereLaw,
    /// d = 2: (angles, cumulative mass) on the 4096-point grid.
    table: Option<(Vec<f64>, Vec<f64>)>,
    /// d = 2: ẑ rotated by +π/2.
    perp: Vec<f64>,
}

const ANGLE_GRID: usize = 4096;

impl GammaSampler {
    pub fn new(law: &TiltedSphereLaw) -> Self {
        let d = law.d();
        let z = &law.direction;
        let (table, perp) = if d == 2 {
            // exp(κ(cos θ − 1)) is negligible beyond 12 standard deviations ~ 12/√κ
            let half = if law.kappa > 0.0 { (12.0 / law.kappa.sqrt()).min(std::f64::consts::PI) } else { std::f64::consts::PI };
            let step = 2.0 * half / (ANGLE_GRID - 1) as f64;
            let angles: Vec<f64> = (0..ANGLE_GRID).map(|k| -half + k as f64 * step).collect();
            let w: Vec<f64> = angles.iter().map(|t| (law.kappa * (t.cos() - 1.0)).exp()).collect();
            let mut cdf = vec![0.0; ANGLE_GRID];
            for k in 1..ANGLE_GRID {
                cdf[k] = cdf[k - 1] + 0.5 * (w[k] + w[k - 1]) * step;
            }
            let total = cdf[ANGLE_GRID - 1];
            cdf.iter_mut().for_each(|c| *c /= total);
            (Some((angles, cdf)), vec![-z[1], z[0]])
        } else {
            (None, Vec::new())
        };
        GammaSampler { law: law.clone(), table, perp }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let d = self.law.d();
        let z = &self.law.direction;
        let k = self.law.kappa;
        match d {
            1 => {
                // P(+ẑ) = e^κ/(e^κ + e^−κ) = 1/(1 + e^{−2κ})
                let p_plus = 1.0 / (1.0 + (-2.0 * k).exp());
                let s = if rng.random::<f64>() < p_plus { 1.0 } else { -1.0 };
                vec![s * z[0]]
            }
            2 => {
                let (angles, cdf) = self.table.as_ref().expect("tabulated for d = 2");
                let u: f64 = rng.random();
                let i = cdf.partition_point(|c| *c < u).clamp(1, ANGLE_GRID - 1);
                let span = cdf[i] - cdf[i - 1];
                let f = if span > 0.0 { (u - cdf[i - 1]) / span } else { 0.5 };
                let th = angles[i - 1] + f * (angles[i] - angles[i - 1]);
                let (s, c) = th.sin_cos();
                vec![c * z[0] + s * self.perp[0], c * z[1] + s * self.perp[1]]
            }
            _ => {
                let w = if d == 3 { cos_angle_d3(k, rng) } else { cos_angle_wood(d, k, rng) };
                let t = tangent_direction(z, rng);
                let sw = (1.0 - w * w).max(0.0).sqrt();
                z.iter().zip(&t).map(|(a, b)| w * a + sw * b).collect()
            }
        }
    }
}

/// Exact inversion of the tilted-cosine law on S²: cos θ = 1 + ln(u + (1 − u)e^{−2κ})/κ.
fn cos_angle_d3<R: Rng + ?Sized>(k: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    if k < 1e-8 {
        return 2.0 * u - 1.0;
    }
    // ln(u + (1−u)e^{−2κ}) evaluated without underflow for large κ
    let a = u.ln();
    let b = (1.0 - u).ln() - 2.0 * k;
    let lse = a.max(b) + (-(a - b).abs()).exp().ln_1p();
    (1.0 + lse / k).clamp(-1.0, 1.0)
}

/// Wood's rejection sampler for the cosine of the angle to the pole, d > 3.
fn cos_angle_wood<R: Rng + ?Sized>(d: usize, k: f64, rng: &mut R) -> f64 {
    let m = (d - 1) as f64;
    let half = Beta::new(m / 2.0, m / 2.0).expect("valid beta parameters");
    let b = m / ((4.0 * k * k + m * m).sqrt() + 2.0 * k);
    let x0 = (1.0 - b) / (1.0 + b);
    let c = k * x0 + m * (1.0 - x0 * x0).ln();
    loop {
        let z: f64 = half.sample(rng);
        let w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
        let u: f64 = rng.random();
        if k * w + m * (1.0 - x0 * w).ln() - c >= u.ln() {
            return w;
        }
    }
}

/// Uniform unit vector orthogonal to the unit vector `z`.
fn tangent_direction<R: Rng + ?Sized>(z: &[f64], rng: &mut R) -> Vec<f64> {
    loop {
        let mut g: Vec<f64> = (0..z.len()).map(|_| rng.sample(StandardNormal)).collect();
        let gz = dot(&g, z);
        g.iter_mut().zip(z).for_each(|(a, b)| *a -= gz * b);
        if let Some(t) = unit(&g) {
            return t;
        }
    }
}

pub fn sample_gamma<R: Rng + ?Sized>(law: &TiltedSphereLaw, count: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let s = GammaSampler::new(law);
    (0..count).map(|_| s.sample(rng)).collect()
}

/// E⟨Ω, ẑ⟩ = ∫ cos θ e^{κ cos θ} sin^{d−2}θ dθ / ∫ e^{κ cos θ} sin^{d−2}θ dθ,
/// by Simpson quadrature on [0, min(π, 40/√κ)] (tanh κ for d = 1).
pub fn mean_resultant_length(d: usize, kappa: f64) -> f64 {
    if kappa <= 0.0 {
        return 0.0;
    }
    if d == 1 {
        return kappa.tanh();
    }
    let upper = (40.0 / kappa.sqrt()).min(std::f64::consts::PI);
    let n = 20_000;
    let h = upper / n as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..=n {
        let th = k as f64 * h;
        let w = if k == 0 || k == n { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
        let f = (kappa * (th.cos() - 1.0)).exp() * th.sin().powi(d as i32 - 2);
        num += w * f * th.cos();
        den += w * f;
    }
    num / den
}

/// Inverse of [`mean_resultant_length`] in κ by bisection on a log scale.
pub fn kappa_from_resultant(d: usize, rbar: f64) -> f64 {
    if rbar <= 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (-12.0f64, 12.0f64);
    if mean_resultant_length(d, hi.exp()) <= rbar {
        return hi.exp();
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if mean_resultant_length(d, mid.exp()) < rbar {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi)).exp()
}

/// Hierarchical draws from ν̄_z: Ω ~ γ^z, then the pure state at Ω. Returns
/// the configurations and the Ω used for each.
pub fn sample_tilted_mixture<R: Rng + ?Sized>(
    law: &TiltedSphereLaw,
    spec: &PureStateSpec,
    h: Option<&DisorderSample>,
    window: &[usize],
    count: usize,
    rng: &mut R,
) -> Result<(WindowedConfigurations, Vec<Vec<f64>>)> {
    if law.d() != spec.d() {
        return Err(Error::DimensionMismatch("tilt and state dimensions differ".into()));
    }
    let rows = field_rows(h, window)?;
    let gs = GammaSampler::new(law);
    let mut omegas = Vec::with_capacity(count);
    let mut draws = Vec::with_capacity(count);
    for _ in 0..count {
        let om = gs.sample(rng);
        draws.push(pure_draw(spec, &om, &rows, rng));
        omegas.push(om);
    }
    Ok((WindowedConfigurations { window: window.to_vec(), d: spec.d(), draws }, omegas))
}

/// ρ^R: the law of (r*)²⟨Ω^a, Ω^b⟩ for independent Ω^a, Ω^b ~ γ^{R e₁}.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapLawSpec {
    pub r: f64,
    pub d: usize,
    pub beta: f64,
    pub r_star: f64,
}

impl OverlapLawSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.r >= 0.0 && self.r.is_finite()) || self.d == 0 || !(self.beta > 0.0) || !(0.0..1.0).contains(&self.r_star) {
            return Err(Error::InvalidArgument(format!("invalid overlap law parameters {self:?}")));
        }
        Ok(())
    }

    pub fn kappa(&self) -> f64 {
        self.beta * self.r_star * self.r
    }

    pub fn tilt(&self) -> TiltedSphereLaw {
        TiltedSphereLaw { direction: e1(self.d), kappa: self.kappa() }
    }

    /// d = 1 mean: (r*)² tanh²(βr*R).
    pub fn mean_d1(&self) -> f64 {
        self.r_star.powi(2) * self.kappa().tanh().powi(2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RhoMode {
    Sample(usize),
    Quadrature,
}

/// Binned density of ρ^R on [−(r*)², (r*)²].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityTable {
    pub q: Vec<f64>,
    pub density: Vec<f64>,
}

#[derive(Clone, Debug)]
pub enum RhoLaw {
    Sampled(EmpiricalLaw1D),
    /// A discretized law (weighted atoms) plus, for d ≥ 2, its binned density.
    Quadrature { law: EmpiricalLaw1D, table: Option<DensityTable> },
}

impl RhoLaw {
    pub fn law(&self) -> &EmpiricalLaw1D {
        match self {
            RhoLaw::Sampled(l) => l,
            RhoLaw::Quadrature { law, .. } => law,
        }
    }
}

pub fn rho_r<R: Rng + ?Sized>(spec: &OverlapLawSpec, mode: RhoMode, rng: &mut R) -> Result<RhoLaw> {
    spec.validate()?;
    let r2 = spec.r_star * spec.r_star;
    match mode {
        RhoMode::Sample(count) => {
            if count == 0 {
                return Err(Error::EmptySample);
            }
            let gs = GammaSampler::new(&spec.tilt());
            let values = (0..count)
                .map(|_| (r2 * dot(&gs.sample(rng), &gs.sample(rng))).clamp(-r2, r2))
                .collect();
            Ok(RhoLaw::Sampled(EmpiricalLaw1D::new(values)?))
        }
        RhoMode::Quadrature => rho_quadrature(spec),
    }
}

const RHO_BINS: usize = 400;

fn rho_quadrature(spec: &OverlapLawSpec) -> Result<RhoLaw> {
    let r2 = spec.r_star * spec.r_star;
    let k = spec.kappa();
    let atoms: Vec<(f64, f64)> = match spec.d {
        1 => {
            let p = 1.0 / (1.0 + (-2.0 * k).exp());
            let same = p * p + (1.0 - p) * (1.0 - p);
            return Ok(RhoLaw::Quadrature {
                law: EmpiricalLaw1D::weighted(vec![(-r2, 1.0 - same), (r2, same)])?,
                table: None,
            });
        }
        2 => {
            // Δ = θa − θb has density g(Δ) = ∫ f(θ) f(θ − Δ) dθ, f ∝ e^{κ cos θ}
            let m = 2048;
            let h = 2.0 * std::f64::consts::PI / m as f64;
            let f: Vec<f64> = (0..m).map(|i| (k * ((i as f64 * h).cos() - 1.0)).exp()).collect();
            let g: Vec<f64> = (0..m)
                .map(|dl| (0..m).map(|i| f[i] * f[(i + m - dl) % m]).sum::<f64>())
                .collect();
            (0..m).map(|dl| (r2 * (dl as f64 * h).cos(), g[dl])).collect()
        }
        3 => {
            // cos θ has density ∝ e^{κt} on [−1, 1]; ⟨Ωa, Ωb⟩ = ta tb + √(1−ta²)√(1−tb²) cos φ
            let nt = 240;
            let nphi = 240;
            let ht = 2.0 / nt as f64;
            let ts: Vec<f64> = (0..nt).map(|i| -1.0 + (i as f64 + 0.5) * ht).collect();
            let wt: Vec<f64> = ts.iter().map(|t| (k * (t - 1.0)).exp()).collect();
            let cphi: Vec<f64> = (0..nphi).map(|i| ((i as f64 + 0.5) * std::f64::consts::PI / nphi as f64).cos()).collect();
            let mut out = Vec::with_capacity(nt * nt * nphi);
            for (ta, wa) in ts.iter().zip(&wt) {
                for (tb, wb) in ts.iter().zip(&wt) {
                    let sab = ((1.0 - ta * ta) * (1.0 - tb * tb)).sqrt();
                    for c in &cphi {
                        out.push((r2 * (ta * tb + sab * c).clamp(-1.0, 1.0), wa * wb));
                    }
                }
            }
            out
        }
        _ => return Err(Error::InvalidArgument("rho_R quadrature supports d <= 3".into())),
    };
    let total: f64 = atoms.iter().map(|a| a.1).sum();
    let width = 2.0 * r2 / RHO_BINS as f64;
    let mut mass = vec![0.0; RHO_BINS];
    for (q, w) in &atoms {
        let b = (((q + r2) / width) as usize).min(RHO_BINS - 1);
        mass[b] += w / total;
    }
    let table = DensityTable {
        q: (0..RHO_BINS).map(|b| -r2 + (b as f64 + 0.5) * width).collect(),
        density: mass.iter().map(|m| m / width).collect(),
    };
    Ok(RhoLaw::Quadrature { law: EmpiricalLaw1D::weighted(atoms)?, table: Some(table) })
}
