use serde::{Deserialize, Serialize};

use super::fingerprint::WindowFingerprint;
use crate::error::{Error, Result};

/// A (possibly weighted) law on ℝ given by sorted atoms with normalized weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalLaw1D {
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl EmpiricalLaw1D {
    /// Equal-weight law of a sample.
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySample);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("sample contains non-finite values".into()));
        }
        values.sort_by(f64::total_cmp);
        let w = 1.0 / values.len() as f64;
        let weights = vec![w; values.len()];
        Ok(EmpiricalLaw1D { values, weights })
    }

    /// Law of weighted atoms; weights must be nonnegative with positive sum.
    pub fn weighted(mut atoms: Vec<(f64, f64)>) -> Result<Self> {
        atoms.retain(|a| a.1 > 0.0);
        if atoms.is_empty() {
            return Err(Error::EmptySample);
        }
        if atoms.iter().any(|a| !a.0.is_finite() || !a.1.is_finite()) {
            return Err(Error::Domain("atoms must be finite".into()));
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        Ok(EmpiricalLaw1D { values: atoms.iter().map(|a| a.0).collect(), weights: atoms.iter().map(|a| a.1 / total).collect() })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    /// Standard deviation; the unbiased estimator for equal-weight samples.
    pub fn stdev(&self) -> f64 {
        let m = self.mean();
        let var: f64 = self.values.iter().zip(&self.weights).map(|(v, w)| w * (v - m).powi(2)).sum();
        let n = self.len() as f64;
        if n > 1.0 && self.weights.iter().all(|w| *w == self.weights[0]) {
            (var * n / (n - 1.0)).sqrt()
        } else {
            var.sqrt()
        }
    }

    /// Right-continuous CDF.
    pub fn cdf(&self, x: f64) -> f64 {
        let k = self.values.partition_point(|v| *v <= x);
        self.weights[..k].iter().sum::<f64>().min(1.0)
    }

    /// Merge of sorted blocks (e.g. from parallel workers), weighted by block size.
    pub fn merge(parts: &[EmpiricalLaw1D]) -> Result<Self> {
        let total: usize = parts.iter().map(|p| p.len()).sum();
        let atoms = parts
            .iter()
            .flat_map(|p| {
                let f = p.len() as f64 / total as f64;
                p.values.iter().zip(&p.weights).map(move |(v, w)| (*v, w * f))
            })
            .collect();
        EmpiricalLaw1D::weighted(atoms)
    }
}

/// 1-Wasserstein distance ∫|F_a − F_b| dx, capped at 2.
///
/// For laws on an interval of diameter ≤ 2 this is the supremum over
/// 1-Lipschitz test functions, hence an upper bound on the bounded-Lipschitz
/// distance; it is the BL surrogate reported throughout.
pub fn bl_distance_1d(a: &EmpiricalLaw1D, b: &EmpiricalLaw1D) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let (mut i, mut j) = (0, 0);
    let (mut fa, mut fb) = (0.0f64, 0.0f64);
    let mut x = a.values[0].min(b.values[0]);
    let mut total = 0.0;
    while i < a.len() || j < b.len() {
        let next = match (a.values.get(i), b.values.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => unreachable!(),
        };
        total += (fa - fb).abs() * (next - x);
        x = next;
        while i < a.len() && a.values[i] == x {
            fa += a.weights[i];
            i += 1;
        }
        while j < b.len() && b.values[j] == x {
            fb += b.weights[j];
            j += 1;
        }
    }
    Ok(total.min(2.0))
}

/// Kolmogorov–Smirnov statistic of a sample against a continuous CDF.
pub fn ks_statistic(mut sample: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(k, x)| {
            let f = cdf(*x);
            (f - k as f64 / n).abs().max(((k + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// ½ Σ |a_i − b_i|.
pub fn total_variation(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch("mass vectors differ in length".into()));
    }
    Ok(0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>())
}

/// E[min(|a + bZ|, 1)] for standard normal Z (Simpson on [−10, 10]).
fn truncated_gap(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        return a.abs().min(1.0);
    }
    let n = 4000;
    let h = 20.0 / n as f64;
    let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = 0.0;
    for k in 0..=n {
        let z = -10.0 + k as f64 * h;
        let w = if k == 0 || k == n { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * (a + b * z).abs().min(1.0) * norm * (-0.5 * z * z).exp();
    }
    s * h / 3.0
}

/// Coupling upper bound on the BL distance between two product states known
/// through Gaussian fingerprints on a window:
///
///   (1/C) Σ_{i≤k, j≤d} 2^{−(i+j)} E[min(|φ^a_j(i) − φ^b_j(i)|, 1)] + 2^{1−k},
///
/// C = 1 − 2^{−d}, sites indexed i = 1, 2, … in window order, each marginal
/// pair coupled by quantiles. The last term is the exact tail
/// (2/C) Σ_{i>k, j≤d} 2^{−(i+j)}.
pub fn product_bl_upper_bound(a: &WindowFingerprint, b: &WindowFingerprint, k: usize) -> Result<f64> {
    if a.window != b.window || a.d != b.d {
        return Err(Error::DimensionMismatch("fingerprints are on different windows".into()));
    }
    if k > a.window.len() {
        return Err(Error::InvalidArgument(format!("k = {k} exceeds the window of {} sites", a.window.len())));
    }
    let d = a.d;
    let c = 1.0 - 0.5f64.powi(d as i32);
    let mut sum = 0.0;
    for i in 0..k {
        for j in 0..d {
            let idx = i * d + j;
            let cost = truncated_gap(a.mean[idx] - b.mean[idx], a.stdev[idx] - b.stdev[idx]);
            sum += 0.5f64.powi((i + 1 + j + 1) as i32) * cost;
        }
    }
    Ok(sum / c + 2.0 * 0.5f64.powi(k as i32))
}
