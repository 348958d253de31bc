//! The Aizenman–Wehr metastate density on directions,
//! ρ(Ω) ∝ ⟨Ω, Σ⁻¹Ω⟩^{−d/2}, and atomic approximations over partition cells.
//!
//! ρ is the angular central Gaussian law (the law of G/|G| for G ~ N(0, Σ)),
//! so the normalization is analytic: ∫ ⟨Ω, Σ⁻¹Ω⟩^{−d/2} dΩ = |S^{d−1}| √det Σ.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::partition::SpherePartition;
use crate::error::{Error, Result};

/// Surface area of S^{d−1}.
pub fn sphere_area(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => 2.0 * PI / (d as f64 - 2.0) * sphere_area(d - 2),
    }
}

struct AwDensity {
    inv: DMatrix<f64>,
    norm: f64,
    d: usize,
}

impl AwDensity {
    fn new(cov: &[f64], d: usize) -> Result<Self> {
        if cov.len() != d * d {
            return Err(Error::DimensionMismatch("Σ must be d×d".into()));
        }
        let m = DMatrix::from_row_slice(d, d, cov);
        let chol = m.clone().cholesky().ok_or_else(|| Error::InvalidCovariance("Σ is not positive definite".into()))?;
        let det = chol.determinant();
        Ok(AwDensity { inv: chol.inverse(), norm: 1.0 / (sphere_area(d) * det.sqrt()), d })
    }

    fn at(&self, om: &[f64]) -> f64 {
        let mut q = 0.0;
        for i in 0..self.d {
            for j in 0..self.d {
                q += om[i] * self.inv[(i, j)] * om[j];
            }
        }
        self.norm * q.powf(-(self.d as f64) / 2.0)
    }
}

/// Normalized density of ρ at a unit vector.
pub fn aw_density(cov: &[f64], omega: &[f64]) -> Result<f64> {
    Ok(AwDensity::new(cov, omega.len())?.at(omega))
}

fn simpson_weight(k: usize, n: usize) -> f64 {
    if k == 0 || k == n {
        1.0
    } else if k % 2 == 1 {
        4.0
    } else {
        2.0
    }
}

/// ρ-mass of every cell, by Simpson quadrature over each cell's angular box.
pub fn aw_density_cells(cov: &[f64], partition: &SpherePartition) -> Result<Vec<f64>> {
    let d = partition.sphere_dim + 1;
    if !(2..=3).contains(&d) {
        return Err(Error::InvalidArgument("AW cell masses need d in {2, 3}".into()));
    }
    let rho = AwDensity::new(cov, d)?;
    let masses = partition
        .cells
        .iter()
        .map(|c| {
            let (p0, p1) = (c.azimuth[0], c.azimuth[1]);
            if d == 2 {
                let n = 400;
                let h = (p1 - p0) / n as f64;
                (0..=n)
                    .map(|k| {
                        let p = p0 + k as f64 * h;
                        simpson_weight(k, n) * rho.at(&[p.cos(), p.sin()])
                    })
                    .sum::<f64>()
                    * h
                    / 3.0
            } else {
                let (t0, t1) = (c.colatitude[0], c.colatitude[1]);
                let (nt, np) = (160, 160);
                let (ht, hp) = ((t1 - t0) / nt as f64, (p1 - p0) / np as f64);
                let mut s = 0.0;
                for a in 0..=nt {
                    let t = t0 + a as f64 * ht;
                    let (st, ct) = t.sin_cos();
                    let mut row = 0.0;
                    for b in 0..=np {
                        let p = p0 + b as f64 * hp;
                        row += simpson_weight(b, np) * rho.at(&[st * p.cos(), st * p.sin(), ct]);
                    }
                    s += simpson_weight(a, nt) * st * row;
                }
                s * ht * hp / 9.0
            }
        })
        .collect();
    Ok(masses)
}

/// Σ_A η(A) δ_{a(A)} over cell representatives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomicMeasure {
    pub atoms: Vec<(Vec<f64>, f64)>,
}

pub fn approximate_by_atoms(masses: &[f64], partition: &SpherePartition) -> Result<AtomicMeasure> {
    if masses.len() != partition.len() {
        return Err(Error::DimensionMismatch("one mass per cell required".into()));
    }
    let total: f64 = masses.iter().sum();
    if (total - 1.0).abs() > 1e-8 || masses.iter().any(|m| *m < 0.0) {
        return Err(Error::Domain(format!("cell masses must be a probability vector (sum {total})")));
    }
    Ok(AtomicMeasure {
        atoms: partition
            .cells
            .iter()
            .zip(masses)
            .filter(|(_, m)| **m > 0.0)
            .map(|(c, m)| (c.representative.clone(), *m))
            .collect(),
    })
}
