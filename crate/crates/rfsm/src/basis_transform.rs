//! The field-adapted orthonormal basis of (ℝ^d)^n, the frames O and U, and
//! hyperspherical coordinates.

use crate::error::{Error, Result};
use crate::linalg::{self, dot, norm_sq};
use crate::model_core::{compute_sample_stats, DisorderSample};

/// Per component j: the explicit vectors e₁ = 𝟙/√n and
/// e₂ = (h_j − m_j)/(√n s_j), and an implicit completion Q = H₁H₂ with
/// Q e₁ = ±e_{1,j}, Q e₂ = ±e_{2,j}; columns 3..n of Q span the complement.
#[derive(Clone, Debug)]
pub struct OrthonormalBasis {
    pub n: usize,
    pub d: usize,
    e2: Vec<Vec<f64>>,
    /// Householder vectors (v₁, v₂) per component with their squared norms.
    reflections: Vec<(Vec<f64>, f64, Vec<f64>, f64)>,
}

impl OrthonormalBasis {
    pub fn e1_value(&self) -> f64 {
        1.0 / (self.n as f64).sqrt()
    }

    pub fn e1(&self) -> Vec<f64> {
        vec![self.e1_value(); self.n]
    }

    pub fn e2(&self, j: usize) -> &[f64] {
        &self.e2[j]
    }

    pub fn complement_dim(&self) -> usize {
        self.n - 2
    }

    /// Q (0, 0, g)ᵀ for component j; `g` has length n − 2, `out` length n.
    pub fn embed_complement(&self, j: usize, g: &[f64], out: &mut [f64]) {
        debug_assert_eq!(g.len(), self.n - 2);
        out[0] = 0.0;
        out[1] = 0.0;
        out[2..].copy_from_slice(g);
        let (v1, vv1, v2, vv2) = &self.reflections[j];
        reflect(out, v2, *vv2);
        reflect(out, v1, *vv1);
    }

    /// Qᵀ v: coordinates of `v` (an n-vector in component j) in the completed basis.
    /// Entries 0 and 1 are ±⟨v, e₁⟩, ±⟨v, e₂⟩; entries 2.. are the complement coordinates.
    pub fn coordinates(&self, j: usize, v: &[f64]) -> Vec<f64> {
        let mut w = v.to_vec();
        let (v1, vv1, v2, vv2) = &self.reflections[j];
        reflect(&mut w, v1, *vv1);
        reflect(&mut w, v2, *vv2);
        w
    }

    /// Orthogonal projection of `v` onto the complement of span{e₁, e₂} in component j.
    pub fn project_complement(&self, j: usize, v: &[f64]) -> Vec<f64> {
        let c = self.coordinates(j, v);
        let mut out = vec![0.0; self.n];
        self.embed_complement(j, &c[2..], &mut out);
        out
    }
}

fn reflect(w: &mut [f64], v: &[f64], vv: f64) {
    if vv == 0.0 {
        return;
    }
    let c = 2.0 * dot(w, v) / vv;
    for (a, b) in w.iter_mut().zip(v) {
        *a -= c * b;
    }
}

pub fn build_basis(h: &DisorderSample) -> Result<OrthonormalBasis> {
    let n = h.n;
    if n < 2 {
        return Err(Error::InvalidArgument("basis needs n >= 2".into()));
    }
    let stats = compute_sample_stats(h)?;
    let sqrt_n = (n as f64).sqrt();
    let mut e2 = Vec::with_capacity(h.d);
    let mut reflections = Vec::with_capacity(h.d);
    for j in 0..h.d {
        let u2: Vec<f64> =
            (0..n).map(|i| (h.get(i, j) - stats.mean[j]) / (sqrt_n * stats.stdev[j])).collect();
        // H₁ maps u₁ = 𝟙/√n to −e₁ (v₁ = u₁ + e₁, never small).
        let mut v1 = vec![1.0 / sqrt_n; n];
        v1[0] += 1.0;
        let vv1 = norm_sq(&v1);
        let mut w = u2.clone();
        reflect(&mut w, &v1, vv1);
        // H₂ acts on coordinates 2..n only and maps w to ∓|w| e₂.
        let mut v2 = vec![0.0; n];
        v2[1..].copy_from_slice(&w[1..]);
        let wn = norm_sq(&v2).sqrt();
        v2[1] += if v2[1] >= 0.0 { wn } else { -wn };
        let vv2 = norm_sq(&v2);
        e2.push(u2);
        reflections.push((v1, vv1, v2, vv2));
    }
    Ok(OrthonormalBasis { n, d: h.d, e2, reflections })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Frame {
    O,
    U,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FrameDirection {
    Forward,
    Inverse,
}

/// Orthogonal d×d maps with first rows m̂ (O) and ŝ (U); absent when the
/// reference vector is zero.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldFrames {
    pub d: usize,
    pub o: Option<Vec<f64>>,
    pub u: Option<Vec<f64>>,
}

impl FieldFrames {
    pub fn new(m: &[f64], s: &[f64]) -> Self {
        FieldFrames {
            d: m.len(),
            o: linalg::unit(m).map(|u| linalg::frame_with_first_row(&u)),
            u: linalg::unit(s).map(|u| linalg::frame_with_first_row(&u)),
        }
    }

    /// Frames that fall back to the identity for zero references.
    pub fn new_or_identity(m: &[f64], s: &[f64]) -> Self {
        let d = m.len();
        let id: Vec<f64> = (0..d * d).map(|k| if k / d == k % d { 1.0 } else { 0.0 }).collect();
        let f = Self::new(m, s);
        FieldFrames { d, o: f.o.or_else(|| Some(id.clone())), u: f.u.or(Some(id)) }
    }

    pub fn matrix(&self, which: Frame) -> Option<&[f64]> {
        match which {
            Frame::O => self.o.as_deref(),
            Frame::U => self.u.as_deref(),
        }
    }
}

pub fn change_of_frame(
    v: &[f64],
    frames: &FieldFrames,
    which: Frame,
    direction: FrameDirection,
) -> Result<Vec<f64>> {
    if v.len() != frames.d {
        return Err(Error::DimensionMismatch(format!("vector of length {}, frames of dim {}", v.len(), frames.d)));
    }
    let q = frames.matrix(which).ok_or(Error::ZeroVector)?;
    Ok(match direction {
        FrameDirection::Forward => linalg::mat_vec(q, v),
        FrameDirection::Inverse => linalg::mat_t_vec(q, v),
    })
}

/// Ω(θ, φ₂, …, φ_{d−1}):
/// Ω₁ = cos θ, Ω_j = sin θ · sin φ₂ ⋯ sin φ_{j−1} · cos φ_j (2 ≤ j ≤ d−1),
/// Ω_d = sin θ · sin φ₂ ⋯ sin φ_{d−1}.
/// d = 2 uses θ ∈ [0, 2π); d = 1 uses θ ∈ {0, π}.
pub fn hypersphere_encode(angles: &[f64], d: usize) -> Result<Vec<f64>> {
    if d == 0 || angles.len() != d.max(2) - 1 {
        return Err(Error::DimensionMismatch(format!("{} angles for d = {d}", angles.len())));
    }
    Ok(match d {
        1 => vec![angles[0].cos().signum()],
        2 => vec![angles[0].cos(), angles[0].sin()],
        _ => {
            let mut om = vec![0.0; d];
            om[0] = angles[0].cos();
            let mut prod = angles[0].sin();
            for j in 1..d - 1 {
                om[j] = prod * angles[j].cos();
                prod *= angles[j].sin();
            }
            om[d - 1] = prod;
            om
        }
    })
}

/// Inverse of [`hypersphere_encode`]; at coordinate singularities the
/// remaining azimuthal angles decode to 0.
pub fn hypersphere_decode(omega: &[f64]) -> Result<Vec<f64>> {
    let d = omega.len();
    let two_pi = 2.0 * std::f64::consts::PI;
    Ok(match d {
        0 => return Err(Error::DimensionMismatch("empty vector".into())),
        1 => vec![if omega[0] >= 0.0 { 0.0 } else { std::f64::consts::PI }],
        2 => vec![omega[1].atan2(omega[0]).rem_euclid(two_pi)],
        _ => {
            let mut angles = vec![0.0; d - 1];
            for j in 0..d - 2 {
                // atan2 of the suffix norm keeps precision near the poles
                let rest = omega[j + 1..].iter().map(|v| v * v).sum::<f64>().sqrt();
                if rest == 0.0 && omega[j] >= 0.0 {
                    break;
                }
                angles[j] = rest.atan2(omega[j]);
            }
            angles[d - 2] = omega[d - 1].atan2(omega[d - 2]).rem_euclid(two_pi);
            angles
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SphereDirection {
    AnglesToPoint,
    PointToAngles,
}

pub fn hypersphere_roundtrip(input: &[f64], d: usize, direction: SphereDirection) -> Result<Vec<f64>> {
    match direction {
        SphereDirection::AnglesToPoint => hypersphere_encode(input, d),
        SphereDirection::PointToAngles => {
            if input.len() != d {
                return Err(Error::DimensionMismatch(format!("point of length {} for d = {d}", input.len())));
            }
            hypersphere_decode(input)
        }
    }
}
