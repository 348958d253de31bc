//! Model parameters, disorder statistics, the Hamiltonian, the exponential
//! tilting functions and their maximizers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs_sampler::SpinConfiguration;
use crate::linalg::{dot, norm, norm_sq, unit};
use crate::stochastic_drivers::FieldDistributionSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldScaling {
    /// Fields enter the Hamiltonian as given.
    Unit,
    /// Every h(i) is multiplied by n^{-1/2} in the Hamiltonian (and nowhere else).
    InverseSqrtVolume,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub d: usize,
    pub beta: f64,
    pub scaling: FieldScaling,
}

impl ModelParams {
    pub fn new(d: usize, beta: f64, scaling: FieldScaling) -> Result<Self> {
        let p = ModelParams { d, beta, scaling };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::InvalidArgument("spin dimension must be >= 1".into()));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidArgument(format!("beta must be positive, got {}", self.beta)));
        }
        Ok(())
    }

    /// Multiplier applied to the fields in the Hamiltonian at volume n.
    pub fn field_factor(&self, n: usize) -> f64 {
        match self.scaling {
            FieldScaling::Unit => 1.0,
            FieldScaling::InverseSqrtVolume => 1.0 / (n as f64).sqrt(),
        }
    }
}

/// One realization of the random field on n sites, stored row-major (site, component).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderSample {
    pub n: usize,
    pub d: usize,
    pub values: Vec<f64>,
    pub spec: Option<FieldDistributionSpec>,
}

impl DisorderSample {
    pub fn new(n: usize, d: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * d {
            return Err(Error::DimensionMismatch(format!(
                "expected {n}x{d} = {} field values, got {}",
                n * d,
                values.len()
            )));
        }
        if d == 0 {
            return Err(Error::InvalidArgument("spin dimension must be >= 1".into()));
        }
        Ok(DisorderSample { n, d, values, spec: None })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::DimensionMismatch("ragged field rows".into()));
        }
        Self::new(rows.len(), d, rows.concat())
    }

    pub fn with_spec(mut self, spec: FieldDistributionSpec) -> Self {
        self.spec = Some(spec);
        self
    }

    pub fn site(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.d + j]
    }

    /// Column j as an n-vector.
    pub fn component(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, j)).collect()
    }

    /// The first `n` sites.
    pub fn prefix(&self, n: usize) -> Result<Self> {
        if n > self.n {
            return Err(Error::InvalidArgument(format!("prefix {n} longer than sample {}", self.n)));
        }
        Ok(DisorderSample {
            n,
            d: self.d,
            values: self.values[..n * self.d].to_vec(),
            spec: self.spec.clone(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    pub n: usize,
    pub mean: Vec<f64>,
    pub stdev: Vec<f64>,
    pub walk_sum: Vec<f64>,
}

impl SampleStats {
    /// Statistics without the degeneracy check.
    pub fn raw(h: &DisorderSample) -> Self {
        let (n, d) = (h.n, h.d);
        let mut walk_sum = vec![0.0; d];
        for i in 0..n {
            for (j, s) in walk_sum.iter_mut().enumerate() {
                *s += h.get(i, j);
            }
        }
        let mean: Vec<f64> = walk_sum.iter().map(|s| s / n as f64).collect();
        // (1/n) Σ h² − m² evaluated in centered form (identical algebraically,
        // free of cancellation).
        let stdev = (0..d)
            .map(|j| {
                let v = (0..n).map(|i| (h.get(i, j) - mean[j]).powi(2)).sum::<f64>() / n as f64;
                v.max(0.0).sqrt()
            })
            .collect();
        SampleStats { n, mean, stdev, walk_sum }
    }

    /// Statistics supplied directly (fixtures, limit substitutes).
    pub fn from_moments(n: usize, mean: Vec<f64>, stdev: Vec<f64>) -> Result<Self> {
        if mean.len() != stdev.len() || mean.is_empty() {
            return Err(Error::DimensionMismatch("mean and stdev must share d >= 1".into()));
        }
        if stdev.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::InvalidArgument("stdev must be nonnegative".into()));
        }
        let walk_sum = mean.iter().map(|m| m * n as f64).collect();
        Ok(SampleStats { n, mean, stdev, walk_sum })
    }

    pub fn d(&self) -> usize {
        self.mean.len()
    }

    pub fn degenerate_component(&self, h: Option<&DisorderSample>) -> Option<usize> {
        self.stdev.iter().enumerate().find_map(|(j, &s)| {
            let scale = h
                .map(|h| (0..h.n).map(|i| h.get(i, j).abs()).fold(0.0, f64::max))
                .unwrap_or(1.0);
            (s <= 64.0 * f64::EPSILON * scale.max(f64::MIN_POSITIVE)).then_some(j)
        })
    }
}

/// Sample means m_n, sample standard deviations s_n and the walk sum S_n.
/// A zero standard deviation in any component is a typed error, because the
/// field-adapted basis is undefined there.
pub fn compute_sample_stats(h: &DisorderSample) -> Result<SampleStats> {
    if h.n == 0 {
        return Err(Error::InvalidArgument("disorder sample has no sites".into()));
    }
    let stats = SampleStats::raw(h);
    match stats.degenerate_component(Some(h)) {
        Some(component) => Err(Error::DegenerateDisorder { component }),
        None => Ok(stats),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    pub hamiltonian: f64,
    pub magnetization: Vec<f64>,
    pub norm_sq: f64,
}

pub fn evaluate_observables(
    phi: &SpinConfiguration,
    h: &DisorderSample,
    p: &ModelParams,
) -> Result<Observables> {
    if phi.n != h.n || phi.d != h.d || phi.d != p.d {
        return Err(Error::DimensionMismatch(format!(
            "configuration {}x{}, field {}x{}, model d={}",
            phi.n, phi.d, h.n, h.d, p.d
        )));
    }
    let d = p.d;
    let mut m = vec![0.0; d];
    let mut field = 0.0;
    let mut nsq = 0.0;
    for i in 0..phi.n {
        let s = phi.site(i);
        for j in 0..d {
            m[j] += s[j];
            nsq += s[j] * s[j];
        }
        field += dot(s, h.site(i));
    }
    let n = phi.n as f64;
    let hamiltonian = if phi.n == 0 {
        0.0
    } else {
        -norm_sq(&m) / (2.0 * n) - p.field_factor(phi.n) * field
    };
    Ok(Observables { hamiltonian, magnetization: m, norm_sq: nsq })
}

/// The (m, s) pair entering the tilting function, already scaled per the model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TiltCoefficients {
    pub m: Vec<f64>,
    pub s: Vec<f64>,
}

impl TiltCoefficients {
    /// Finite volume: (m_n, s_n), divided by √n in the scaled model.
    pub fn finite(stats: &SampleStats, p: &ModelParams, n: usize) -> Self {
        let f = p.field_factor(n);
        TiltCoefficients {
            m: stats.mean.iter().map(|v| v * f).collect(),
            s: stats.stdev.iter().map(|v| v * f).collect(),
        }
    }

    /// Limit: m = 0 and s_j = sqrt(E h_j²); both vanish in the scaled model.
    pub fn limit(second_moments: &[f64], p: &ModelParams) -> Self {
        let d = second_moments.len();
        match p.scaling {
            FieldScaling::Unit => TiltCoefficients {
                m: vec![0.0; d],
                s: second_moments.iter().map(|v| v.max(0.0).sqrt()).collect(),
            },
            FieldScaling::InverseSqrtVolume => TiltCoefficients { m: vec![0.0; d], s: vec![0.0; d] },
        }
    }

    pub fn d(&self) -> usize {
        self.m.len()
    }
}

pub enum TiltMode<'a> {
    FiniteN(usize),
    Limit { second_moments: &'a [f64] },
}

/// ψ(x, y) = (β/2)|x|² + β<m,x> + β<s,y> + (d/2) ln(1 − |x|² − |y|²).
pub fn tilt(x: &[f64], y: &[f64], coef: &TiltCoefficients, beta: f64) -> Result<f64> {
    let d = coef.d();
    if x.len() != d || y.len() != d {
        return Err(Error::DimensionMismatch(format!("x, y must have length {d}")));
    }
    let r2 = norm_sq(x) + norm_sq(y);
    if !(r2 < 1.0) {
        return Err(Error::OutsideBall { norm_sq: r2 });
    }
    Ok(0.5 * beta * norm_sq(x) + beta * dot(&coef.m, x) + beta * dot(&coef.s, y)
        + 0.5 * d as f64 * (1.0 - r2).ln())
}

pub fn tilt_values(
    x: &[f64],
    y: &[f64],
    stats: &SampleStats,
    p: &ModelParams,
    mode: TiltMode<'_>,
) -> Result<f64> {
    let coef = match mode {
        TiltMode::FiniteN(n) => TiltCoefficients::finite(stats, p, n),
        TiltMode::Limit { second_moments } => TiltCoefficients::limit(second_moments, p),
    };
    tilt(x, y, &coef, p.beta)
}

/// Ψ(r, θ, y) = (β/2)r² + βr|m|cosθ + β|s|y + (d/2) ln(1 − r² − y²).
pub fn reduced_tilt(r: f64, theta: f64, y: f64, coef: &TiltCoefficients, beta: f64) -> Result<f64> {
    if !(r >= 0.0) || !(0.0..=std::f64::consts::PI).contains(&theta) {
        return Err(Error::Domain(format!("need r >= 0 and theta in [0, pi], got r={r}, theta={theta}")));
    }
    let r2 = r * r + y * y;
    if !(r2 < 1.0) {
        return Err(Error::OutsideBall { norm_sq: r2 });
    }
    let d = coef.d() as f64;
    Ok(0.5 * beta * r * r + beta * r * norm(&coef.m) * theta.cos() + beta * norm(&coef.s) * y
        + 0.5 * d * (1.0 - r2).ln())
}

pub fn reduced_tilt_value(
    r: f64,
    theta: f64,
    y: f64,
    stats: &SampleStats,
    p: &ModelParams,
) -> Result<f64> {
    reduced_tilt(r, theta, y, &TiltCoefficients::finite(stats, p, stats.n), p.beta)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeClass {
    UniqueMaximizer,
    FerromagneticSphere,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalConstants {
    pub r_star: f64,
    pub y_star: Vec<f64>,
    pub s_norm_sq: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub class: RegimeClass,
    pub constants: CriticalConstants,
}

/// Closed-form classification of the limiting tilting function (m = 0).
///
/// Ferromagnetic: |s| < 1 and β > d/(1 − |s|²); then r* = sqrt(1 − d/β − |s|²)
/// and y* = s. Otherwise the maximizer is the single point x = 0,
/// y = r₂* ŝ with r₂* = sqrt(1 + a²) − a, a = d/(2β|s|); `constants` then
/// carries r* = 0 and that y.
pub fn classify_regime(p: &ModelParams, second_moments: &[f64]) -> Regime {
    let d = p.d as f64;
    let s: Vec<f64> = match p.scaling {
        FieldScaling::Unit => second_moments.iter().map(|v| v.max(0.0).sqrt()).collect(),
        FieldScaling::InverseSqrtVolume => vec![0.0; second_moments.len()],
    };
    let s_norm_sq = norm_sq(&s);
    let r_sq = 1.0 - d / p.beta - s_norm_sq;
    if s_norm_sq < 1.0 && r_sq > 0.0 {
        return Regime {
            class: RegimeClass::FerromagneticSphere,
            constants: CriticalConstants { r_star: r_sq.sqrt(), y_star: s, s_norm_sq },
        };
    }
    let s_norm = s_norm_sq.sqrt();
    let y_star = if s_norm > 0.0 {
        let a = d / (2.0 * p.beta * s_norm);
        let r2 = (1.0 + a * a).sqrt() - a;
        s.iter().map(|v| v / s_norm * r2).collect()
    } else {
        vec![0.0; s.len()]
    };
    Regime {
        class: RegimeClass::UniqueMaximizer,
        constants: CriticalConstants { r_star: 0.0, y_star, s_norm_sq },
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Symmetry {
    Point,
    /// The maximizer is the orbit r*·S^{d−1} × {y*}.
    Orbit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaximizerSet {
    pub r_star: f64,
    pub y_norm: f64,
    /// Representative x (r* m̂, or r* e₁ on an orbit).
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub symmetry: Symmetry,
    pub value: f64,
    pub grad_norm: f64,
}

/// Maximizes ψ over the ball numerically.
///
/// With x = r₁ m̂ and y = r₂ ŝ the problem reduces to two variables. In
/// (u, v) = (r₁², r₂) the reduced function
/// F = (β/2)u + β|m|√u + β|s|v + (d/2) ln(1 − u − v²)
/// is concave, so a projected Newton iteration from a 5×5 grid of starts
/// converges to the global maximizer, including boundary optima u = 0.
pub fn maximizer_set_numeric(coef: &TiltCoefficients, p: &ModelParams) -> Result<MaximizerSet> {
    let d = coef.d();
    let (mn, sn) = (norm(&coef.m), norm(&coef.s));
    let solver = Reduced { beta: p.beta, d: d as f64, m: mn, s: sn };
    let mut best: Option<(f64, f64, f64, f64)> = None;
    for a in 0..5 {
        for b in 0..5 {
            let rho = 0.15 + 0.2 * a as f64;
            let ang = 0.05 + (std::f64::consts::FRAC_PI_2 - 0.1) * b as f64 / 4.0;
            let (r1, r2) = (rho * ang.cos(), rho * ang.sin());
            let (u, v, val, g) = solver.solve(r1 * r1, r2);
            if best.map_or(true, |bst| val > bst.2) {
                best = Some((u, v, val, g));
            }
        }
    }
    let (u, v, value, grad_norm) = best.expect("non-empty start grid");
    if !(grad_norm <= 1e-8) {
        return Err(Error::NoConvergence { grad_norm });
    }
    // at a critical point F is flat to second order in u; residual u is solver noise
    let r_star = if u <= 1e-12 { 0.0 } else { u.sqrt() };
    let m_hat = unit(&coef.m);
    let x = match &m_hat {
        Some(mh) => mh.iter().map(|c| c * r_star).collect(),
        None => {
            let mut e = vec![0.0; d];
            e[0] = r_star;
            e
        }
    };
    let y = match unit(&coef.s) {
        Some(sh) => sh.iter().map(|c| c * v).collect(),
        None => vec![0.0; d],
    };
    let symmetry = if m_hat.is_none() && r_star > 0.0 { Symmetry::Orbit } else { Symmetry::Point };
    Ok(MaximizerSet { r_star, y_norm: v, x, y, symmetry, value, grad_norm })
}

struct Reduced {
    beta: f64,
    d: f64,
    m: f64,
    s: f64,
}

impl Reduced {
    fn value(&self, u: f64, v: f64) -> f64 {
        let dd = 1.0 - u - v * v;
        if u < 0.0 || v < 0.0 || dd <= 0.0 {
            return f64::NEG_INFINITY;
        }
        0.5 * self.beta * u + self.beta * self.m * u.sqrt() + self.beta * self.s * v
            + 0.5 * self.d * dd.ln()
    }

    fn grad_hess(&self, u: f64, v: f64) -> ([f64; 2], [f64; 3]) {
        let dd = 1.0 - u - v * v;
        let (b, d) = (self.beta, self.d);
        let mterm = if self.m > 0.0 { b * self.m / (2.0 * u.sqrt()) } else { 0.0 };
        let gu = 0.5 * b + mterm - 0.5 * d / dd;
        let gv = b * self.s - d * v / dd;
        let huu = -(if self.m > 0.0 { b * self.m / (4.0 * u.powf(1.5)) } else { 0.0 }) - 0.5 * d / (dd * dd);
        let huv = -d * v / (dd * dd);
        let hvv = -d / dd - 2.0 * d * v * v / (dd * dd);
        ([gu, gv], [huu, huv, hvv])
    }

    /// Returns (u, v, F, projected gradient norm).
    fn solve(&self, mut u: f64, mut v: f64) -> (f64, f64, f64, f64) {
        let mut f = self.value(u, v);
        let mut pg = f64::INFINITY;
        for _ in 0..500 {
            let (g, h) = self.grad_hess(u, v);
            let free_u = !(u <= 0.0 && g[0] <= 0.0);
            let free_v = !(v <= 0.0 && g[1] <= 0.0);
            let gp = [if free_u { g[0] } else { 0.0 }, if free_v { g[1] } else { 0.0 }];
            pg = (gp[0] * gp[0] + gp[1] * gp[1]).sqrt();
            let step = match (free_u, free_v) {
                (true, true) => {
                    let det = h[0] * h[2] - h[1] * h[1];
                    [-(h[2] * g[0] - h[1] * g[1]) / det, -(-h[1] * g[0] + h[0] * g[1]) / det]
                }
                (true, false) => [-g[0] / h[0], 0.0],
                (false, true) => [0.0, -g[1] / h[2]],
                (false, false) => [0.0, 0.0],
            };
            if !(step[0].is_finite() && step[1].is_finite()) || (step[0] == 0.0 && step[1] == 0.0) {
                break;
            }
            let mut t = 1.0;
            let mut moved = false;
            for _ in 0..80 {
                let nu = (u + t * step[0]).max(0.0);
                let nv = (v + t * step[1]).max(0.0);
                let nf = self.value(nu, nv);
                // near the optimum F is flat to rounding; full Newton steps are trusted there
                if nf >= f || (t == 1.0 && nf >= f - 1e-13 * (1.0 + f.abs())) {
                    let tiny = (nu - u).abs() + (nv - v).abs();
                    u = nu;
                    v = nv;
                    f = nf;
                    moved = tiny > 0.0;
                    break;
                }
                t *= 0.5;
            }
            if !moved {
                break;
            }
        }
        let (g, _) = self.grad_hess(u, v);
        let gu = if u <= 0.0 && g[0] <= 0.0 { 0.0 } else { g[0] };
        let gv = if v <= 0.0 && g[1] <= 0.0 { 0.0 } else { g[1] };
        let _ = pg;
        (u, v, f, (gu * gu + gv * gv).sqrt())
    }
}
