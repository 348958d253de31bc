//! Disorder generation, random-walk partial sums, Brownian paths and the
//! occupation / recurrence diagnostics built on them.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure_tools::{cell_histogram_lenient, CellHistogram, SpherePartition};
use crate::model_core::DisorderSample;
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldDistributionSpec {
    /// Independent components h_j = ±a_j with probability 1/2.
    TwoPoint { a: Vec<f64> },
    /// Centered Gaussian with covariance Σ.
    Gaussian { cov: Vec<Vec<f64>> },
    /// Independent components uniform on [−w_j, w_j].
    UniformBox { half_widths: Vec<f64> },
}

impl FieldDistributionSpec {
    pub fn two_point(a: Vec<f64>) -> Result<Self> {
        let s = FieldDistributionSpec::TwoPoint { a };
        s.validate()?;
        Ok(s)
    }

    pub fn gaussian(cov: Vec<Vec<f64>>) -> Result<Self> {
        let s = FieldDistributionSpec::Gaussian { cov };
        s.validate()?;
        Ok(s)
    }

    pub fn uniform_box(half_widths: Vec<f64>) -> Result<Self> {
        let s = FieldDistributionSpec::UniformBox { half_widths };
        s.validate()?;
        Ok(s)
    }

    pub fn d(&self) -> usize {
        match self {
            FieldDistributionSpec::TwoPoint { a } => a.len(),
            FieldDistributionSpec::Gaussian { cov } => cov.len(),
            FieldDistributionSpec::UniformBox { half_widths } => half_widths.len(),
        }
    }

    /// Declared covariance Σ (row-major d×d).
    pub fn covariance(&self) -> Vec<f64> {
        let d = self.d();
        let diag = |v: Vec<f64>| {
            let mut m = vec![0.0; d * d];
            for (j, x) in v.into_iter().enumerate() {
                m[j * d + j] = x;
            }
            m
        };
        match self {
            FieldDistributionSpec::TwoPoint { a } => diag(a.iter().map(|v| v * v).collect()),
            FieldDistributionSpec::Gaussian { cov } => cov.concat(),
            FieldDistributionSpec::UniformBox { half_widths } => diag(half_widths.iter().map(|w| w * w / 3.0).collect()),
        }
    }

    /// E h_j², the diagonal of Σ.
    pub fn second_moments(&self) -> Vec<f64> {
        let d = self.d();
        let c = self.covariance();
        (0..d).map(|j| c[j * d + j]).collect()
    }

    /// E|h|² = tr Σ.
    pub fn mean_sq_norm(&self) -> f64 {
        self.second_moments().iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.d();
        if d == 0 {
            return Err(Error::InvalidCovariance("d must be >= 1".into()));
        }
        match self {
            FieldDistributionSpec::TwoPoint { a: v } | FieldDistributionSpec::UniformBox { half_widths: v } => {
                if v.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                    return Err(Error::InvalidCovariance("scales must be positive (full-rank Σ)".into()));
                }
            }
            FieldDistributionSpec::Gaussian { cov } => {
                if cov.iter().any(|r| r.len() != d) {
                    return Err(Error::InvalidCovariance("Σ must be square".into()));
                }
                for i in 0..d {
                    for j in 0..d {
                        if (cov[i][j] - cov[j][i]).abs() > 1e-12 * (1.0 + cov[i][j].abs()) {
                            return Err(Error::InvalidCovariance("Σ must be symmetric".into()));
                        }
                    }
                }
                cholesky(&self.covariance(), d)?;
            }
        }
        Ok(())
    }
}

pub(crate) fn cholesky(cov: &[f64], d: usize) -> Result<DMatrix<f64>> {
    DMatrix::from_row_slice(d, d, cov)
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::InvalidCovariance("Σ is not positive definite".into()))
}

/// Row sampler shared by disorder and walk generation so both consume the
/// random stream identically.
struct RowSampler {
    spec: FieldDistributionSpec,
    chol: Option<DMatrix<f64>>,
    rng: rng::StreamRng,
    z: DVector<f64>,
}

impl RowSampler {
    fn new(spec: &FieldDistributionSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let chol = match spec {
            FieldDistributionSpec::Gaussian { .. } => Some(cholesky(&spec.covariance(), spec.d())?),
            _ => None,
        };
        Ok(RowSampler { spec: spec.clone(), chol, rng: rng::stream(seed, 0), z: DVector::zeros(spec.d()) })
    }

    fn next_row(&mut self, out: &mut [f64]) {
        match &self.spec {
            FieldDistributionSpec::TwoPoint { a } => {
                for (o, a) in out.iter_mut().zip(a) {
                    *o = if self.rng.random::<bool>() { *a } else { -*a };
                }
            }
            FieldDistributionSpec::UniformBox { half_widths } => {
                for (o, w) in out.iter_mut().zip(half_widths) {
                    *o = w * (2.0 * self.rng.random::<f64>() - 1.0);
                }
            }
            FieldDistributionSpec::Gaussian { .. } => {
                for v in self.z.iter_mut() {
                    *v = self.rng.sample(StandardNormal);
                }
                let l = self.chol.as_ref().expect("gaussian spec has a factor");
                let hz = l * &self.z;
                out.copy_from_slice(hz.as_slice());
            }
        }
    }
}

/// n i.i.d. field rows; row k depends only on (spec, seed, k), so prefixes of
/// longer samples coincide with shorter samples.
pub fn generate_disorder(spec: &FieldDistributionSpec, n: usize, seed: u64) -> Result<DisorderSample> {
    let d = spec.d();
    let mut sampler = RowSampler::new(spec, seed)?;
    let mut values = vec![0.0; n * d];
    for row in values.chunks_mut(d) {
        sampler.next_row(row);
    }
    Ok(DisorderSample::new(n, d, values)?.with_spec(spec.clone()))
}

/// Prefix sums S_1..S_N of the field rows generated with the same seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkPath {
    pub d: usize,
    pub sums: Vec<f64>,
    pub seed: u64,
}

impl WalkPath {
    pub fn len(&self) -> usize {
        self.sums.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.sums.is_empty()
    }

    /// S_n for 1 ≤ n ≤ N.
    pub fn sum(&self, n: usize) -> &[f64] {
        &self.sums[(n - 1) * self.d..n * self.d]
    }

    pub fn norm(&self, n: usize) -> f64 {
        crate::linalg::norm(self.sum(n))
    }

    /// S_n/√n.
    pub fn scaled(&self, n: usize) -> Vec<f64> {
        let f = 1.0 / (n as f64).sqrt();
        self.sum(n).iter().map(|v| v * f).collect()
    }

    /// Ŝ_n, or `None` (missing) when S_n = 0.
    pub fn direction(&self, n: usize) -> Option<Vec<f64>> {
        crate::linalg::unit(self.sum(n))
    }
}

pub fn walk_path(spec: &FieldDistributionSpec, big_n: usize, seed: u64) -> Result<WalkPath> {
    if big_n == 0 {
        return Err(Error::InvalidArgument("walk length must be >= 1".into()));
    }
    let d = spec.d();
    let mut sampler = RowSampler::new(spec, seed)?;
    let mut sums = vec![0.0; big_n * d];
    let mut row = vec![0.0; d];
    let mut acc = vec![0.0; d];
    for n in 0..big_n {
        sampler.next_row(&mut row);
        for j in 0..d {
            acc[j] += row[j];
        }
        sums[n * d..(n + 1) * d].copy_from_slice(&acc);
    }
    Ok(WalkPath { d, sums, seed })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceStatistic {
    pub c_n: f64,
    pub c_2n: f64,
    /// C_{2N}/C_N (NaN when C_N = 0).
    pub ratio: f64,
}

/// C_N = (1/N) Σ_{n≤N} 1(|S_n| ≤ n^{1/2 − 1/(2d)}), evaluated at N and 2N.
pub fn recurrence_statistic(path: &WalkPath, big_n: usize) -> Result<RecurrenceStatistic> {
    if path.d < 2 {
        return Err(Error::InvalidArgument("recurrence statistic needs d >= 2".into()));
    }
    if big_n == 0 || path.len() < 2 * big_n {
        return Err(Error::InvalidArgument(format!("path of length {} cannot give C at N = {big_n} and 2N", path.len())));
    }
    let expo = 0.5 - 0.5 / path.d as f64;
    let hits = |upto: usize| (1..=upto).filter(|&n| path.norm(n) <= (n as f64).powf(expo)).count() as f64;
    let c_n = hits(big_n) / big_n as f64;
    let c_2n = hits(2 * big_n) / (2 * big_n) as f64;
    Ok(RecurrenceStatistic { c_n, c_2n, ratio: if c_n > 0.0 { c_2n / c_n } else { f64::NAN } })
}

/// Whether |S_n| ≤ radius for some n in [lo, hi].
pub fn revisits_ball(path: &WalkPath, radius: f64, lo: usize, hi: usize) -> bool {
    (lo.max(1)..=hi.min(path.len())).any(|n| path.norm(n) <= radius)
}

/// Brownian motion with covariance Σ on the uniform grid t_k = k/M, B_0 = 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BrownianPath {
    pub d: usize,
    pub steps: usize,
    /// B_{t_0}, …, B_{t_M}, row-major.
    pub values: Vec<f64>,
}

impl BrownianPath {
    pub fn at(&self, k: usize) -> &[f64] {
        &self.values[k * self.d..(k + 1) * self.d]
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 / self.steps as f64
    }
}

pub fn brownian_path(cov: &[f64], d: usize, steps: usize, seed: u64) -> Result<BrownianPath> {
    if cov.len() != d * d {
        return Err(Error::DimensionMismatch("Σ must be d×d".into()));
    }
    if steps == 0 {
        return Err(Error::InvalidArgument("need at least one time step".into()));
    }
    let l = cholesky(cov, d)?;
    let mut r = rng::stream(seed, 0);
    let sdt = (1.0 / steps as f64).sqrt();
    let mut values = vec![0.0; (steps + 1) * d];
    let mut z = DVector::zeros(d);
    for k in 1..=steps {
        for v in z.iter_mut() {
            *v = r.sample::<f64, _>(StandardNormal) * sdt;
        }
        let inc = &l * &z;
        for j in 0..d {
            values[k * d + j] = values[(k - 1) * d + j] + inc[j];
        }
    }
    Ok(BrownianPath { d, steps, values })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Occupation {
    /// Cell fractions (sum to 1) when a partition was supplied.
    pub cells: Option<Vec<f64>>,
    /// d = 1: fraction of defined grid times with B > 0.
    pub positive_fraction: Option<f64>,
    /// Grid points where the projection was undefined (B = 0), excluded.
    pub missing: usize,
}

/// Left-endpoint occupation of B̂_t over the partition cells (t_0 = 0 is
/// always undefined and excluded), and the positive-time fraction for d = 1.
pub fn brownian_occupation(
    cov: &[f64],
    d: usize,
    steps: usize,
    partition: Option<&SpherePartition>,
    seed: u64,
) -> Result<Occupation> {
    if steps < 1000 {
        return Err(Error::InvalidArgument("occupation needs M >= 1000 time steps".into()));
    }
    let path = brownian_path(cov, d, steps, seed)?;
    let points: Vec<&[f64]> = (0..steps).map(|k| path.at(k)).collect();
    occupation_of(&points, d, partition)
}

/// Occupation of Ŝ_n over n = 1..=upto; S_n = 0 is marked missing.
pub fn walk_occupation(path: &WalkPath, upto: usize, partition: Option<&SpherePartition>) -> Result<Occupation> {
    let upto = upto.min(path.len());
    let points: Vec<&[f64]> = (1..=upto).map(|n| path.sum(n)).collect();
    occupation_of(&points, path.d, partition)
}

fn occupation_of(points: &[&[f64]], d: usize, partition: Option<&SpherePartition>) -> Result<Occupation> {
    let defined: Vec<&[f64]> = points.iter().copied().filter(|p| p.iter().any(|v| *v != 0.0)).collect();
    let missing = points.len() - defined.len();
    let positive_fraction = (d == 1 && !defined.is_empty())
        .then(|| defined.iter().filter(|p| p[0] > 0.0).count() as f64 / defined.len() as f64);
    let cells = match partition {
        Some(part) => {
            if part.sphere_dim + 1 != d {
                return Err(Error::DimensionMismatch("partition does not match d".into()));
            }
            let hist: CellHistogram = cell_histogram_lenient(&defined, part)?;
            Some(hist.fractions())
        }
        None => None,
    };
    Ok(Occupation { cells, positive_fraction, missing })
}

/// Arcsine CDF F(x) = (2/π) arcsin √x on [0, 1].
pub fn arcsine_cdf(x: f64) -> f64 {
    2.0 / std::f64::consts::PI * x.clamp(0.0, 1.0).sqrt().asin()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure_tools::{eq_partition, ks_statistic};
    use crate::model_core::compute_sample_stats;
    use rayon::prelude::*;

    fn sample_cov(h: &DisorderSample) -> Vec<f64> {
        let d = h.d;
        let mut c = vec![0.0; d * d];
        for i in 0..h.n {
            for a in 0..d {
                for b in 0..d {
                    c[a * d + b] += h.get(i, a) * h.get(i, b) / h.n as f64;
                }
            }
        }
        c
    }

    #[test]
    fn two_point_covariance() {
        let spec = FieldDistributionSpec::two_point(vec![0.3536, 0.3536]).unwrap();
        let c = sample_cov(&generate_disorder(&spec, 100_000, 1).unwrap());
        assert!((c[0] - 0.125).abs() < 0.005 && (c[3] - 0.125).abs() < 0.005 && c[1].abs() < 0.005);
        let s = compute_sample_stats(&generate_disorder(&spec, 100_000, 2).unwrap()).unwrap();
        assert!((s.stdev.iter().map(|v| v * v).sum::<f64>() - 0.25).abs() < 0.01);
    }

    #[test]
    fn gaussian_covariance() {
        let spec = FieldDistributionSpec::gaussian(vec![vec![0.1, 0.0], vec![0.0, 0.4]]).unwrap();
        let c = sample_cov(&generate_disorder(&spec, 100_000, 3).unwrap());
        assert!((c[0] - 0.1).abs() < 0.01 && (c[3] - 0.4).abs() < 0.01 && c[1].abs() < 0.01);
        let corr = FieldDistributionSpec::gaussian(vec![vec![0.2, 0.1], vec![0.1, 0.3]]).unwrap();
        let c = sample_cov(&generate_disorder(&corr, 100_000, 4).unwrap());
        assert!((c[1] - 0.1).abs() < 0.01);
        assert!(FieldDistributionSpec::gaussian(vec![vec![0.1, 0.2], vec![0.2, 0.1]]).is_err());
        assert!(FieldDistributionSpec::two_point(vec![0.0]).is_err());
    }

    #[test]
    fn uniform_box_moments() {
        let spec = FieldDistributionSpec::uniform_box(vec![0.6]).unwrap();
        let c = sample_cov(&generate_disorder(&spec, 100_000, 5).unwrap());
        assert!((c[0] - 0.12).abs() < 0.005);
        assert!((spec.mean_sq_norm() - 0.12).abs() < 1e-15);
    }

    #[test]
    fn disorder_is_deterministic_and_prefix_stable() {
        let spec = FieldDistributionSpec::gaussian(vec![vec![0.1, 0.0], vec![0.0, 0.4]]).unwrap();
        let a = generate_disorder(&spec, 500, 9).unwrap();
        let b = generate_disorder(&spec, 500, 9).unwrap();
        assert_eq!(a.values, b.values);
        let short = generate_disorder(&spec, 123, 9).unwrap();
        assert_eq!(&a.values[..246], &short.values[..]);
        let w = walk_path(&spec, 500, 9).unwrap();
        let st = compute_sample_stats(&short).unwrap();
        assert_eq!(st.walk_sum, w.sum(123).to_vec());
    }

    #[test]
    fn walk_second_moment_and_clt() {
        let spec = FieldDistributionSpec::gaussian(vec![vec![0.1, 0.05], vec![0.05, 0.4]]).unwrap();
        let ends: Vec<Vec<f64>> = (0..10_000u64)
            .into_par_iter()
            .map(|s| walk_path(&spec, 200, s).unwrap().scaled(200))
            .collect();
        let m2: f64 = ends[..1000].iter().map(|e| (e[0] * e[0] + e[1] * e[1]) * 200.0).sum::<f64>() / 1000.0;
        assert!((m2 / (200.0 * 0.5) - 1.0).abs() < 0.05);
        let cov = spec.covariance();
        for a in 0..2 {
            for b in 0..2 {
                let c = ends.iter().map(|e| e[a] * e[b]).sum::<f64>() / ends.len() as f64;
                let tol = 0.05 * (cov[a * 2 + a] * cov[b * 2 + b]).sqrt();
                assert!((c - cov[a * 2 + b]).abs() <= tol, "{a}{b}: {c}");
            }
        }
    }

    #[test]
    fn lattice_walk_stays_on_lattice() {
        let a = 0.25;
        let spec = FieldDistributionSpec::two_point(vec![a]).unwrap();
        let w = walk_path(&spec, 10_000, 1).unwrap();
        for n in 1..=w.len() {
            let k = w.sum(n)[0] / (2.0 * a);
            // S_n = (2k − n)a, so S_n/(2a) + n/2 is an integer
            let t = k + n as f64 / 2.0;
            assert!((t - t.round()).abs() < 1e-9);
        }
    }

    #[test]
    fn transient_walk_escapes() {
        let spec = FieldDistributionSpec::gaussian(vec![vec![0.2, 0.0, 0.0], vec![0.0, 0.2, 0.0], vec![0.0, 0.0, 0.2]]).unwrap();
        let grows = (0..200u64)
            .into_par_iter()
            .filter(|&s| {
                let w = walk_path(&spec, 10_000, s).unwrap();
                let min = |lo: usize, hi: usize| (lo..=hi).map(|n| w.norm(n)).fold(f64::MAX, f64::min);
                min(5000, 10_000) > min(500, 1000)
            })
            .count();
        // the event is scale free (Brownian limit); its probability is ≈ 0.87
        assert!(grows as f64 >= 0.78 * 200.0, "{grows}");
    }

    #[test]
    fn recurrence_statistics() {
        let spec = FieldDistributionSpec::two_point(vec![0.125f64.sqrt(); 2]).unwrap();
        let w = walk_path(&spec, 2000, 1).unwrap();
        let r = recurrence_statistic(&w, 1000).unwrap();
        assert!(r.c_n >= 0.0 && r.c_n <= 1.0);
        assert!(recurrence_statistic(&w, 1001).is_err());
        // a path that never enters the ball
        let far = WalkPath { d: 2, sums: (1..=200).flat_map(|n| [10.0 * n as f64, 0.0]).collect(), seed: 0 };
        assert_eq!(recurrence_statistic(&far, 100).unwrap().c_n, 0.0);
        // d = 3: the unit-ball time fraction is O(N^{-1/3}) and shrinks with tr Σ;
        // at Σ = 0.3·I about 86% of paths have C_N ≤ 0.02 at N = 10⁵
        let spec3 = FieldDistributionSpec::gaussian(vec![vec![0.3, 0.0, 0.0], vec![0.0, 0.3, 0.0], vec![0.0, 0.0, 0.3]]).unwrap();
        let stats: Vec<RecurrenceStatistic> = (0..40u64)
            .into_par_iter()
            .map(|s| recurrence_statistic(&walk_path(&spec3, 200_000, s).unwrap(), 100_000).unwrap())
            .collect();
        let small = stats.iter().filter(|r| r.c_n <= 0.02).count();
        assert!(small >= 28, "{small}");
        let mean = |f: fn(&RecurrenceStatistic) -> f64| stats.iter().map(f).sum::<f64>() / 40.0;
        assert!(mean(|r| r.c_2n) < mean(|r| r.c_n));
    }

    #[test]
    fn brownian_occupation_properties() {
        let part = eq_partition(1, 8).unwrap();
        let iso = [1.0, 0.0, 0.0, 1.0];
        let occ = brownian_occupation(&iso, 2, 1000, Some(&part), 3).unwrap();
        let cells = occ.cells.unwrap();
        assert!((cells.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(occ.missing, 1);
        let means: Vec<Vec<f64>> = (0..10_000u64)
            .into_par_iter()
            .map(|s| brownian_occupation(&iso, 2, 1000, Some(&part), s).unwrap().cells.unwrap())
            .collect();
        for c in 0..8 {
            let m = means.iter().map(|v| v[c]).sum::<f64>() / means.len() as f64;
            assert!((m - 0.125).abs() <= 0.02, "cell {c}: {m}");
        }
        assert!(brownian_occupation(&iso, 2, 10, Some(&part), 3).is_err());
    }

    #[test]
    fn brownian_positive_fraction_is_arcsine() {
        let fr: Vec<f64> = (0..10_000u64)
            .into_par_iter()
            .map(|s| brownian_occupation(&[0.3], 1, 2000, None, s).unwrap().positive_fraction.unwrap())
            .collect();
        let ks = ks_statistic(fr, arcsine_cdf);
        assert!(ks <= 0.03, "KS {ks}");
    }
}
