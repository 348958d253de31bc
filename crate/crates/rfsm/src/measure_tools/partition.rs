//! Recursive zonal equal-area partitions of S¹ and S².
//!
//! S¹: N equal arcs starting at azimuth 0. S²: two polar caps of area 4π/N
//! and a sequence of collars between them, each split into equal azimuthal
//! sectors (no per-collar azimuth offsets). Cells are ordered north cap,
//! collars from north to south, south cap.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::norm;

/// A cell given by closed angular bounds: colatitude [θ₀, θ₁] (S² only) and
/// azimuth [φ₀, φ₁] ⊂ [0, 2π].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub colatitude: [f64; 2],
    pub azimuth: [f64; 2],
    /// 0 for the north cap, 1..=collars for collars, collars + 1 for the south cap (S² only).
    pub zone: usize,
    /// Angular centroid, as a unit vector.
    pub representative: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpherePartition {
    pub sphere_dim: usize,
    pub cells: Vec<Cell>,
    /// S²: colatitudes of the zone boundaries, θ_c … π − θ_c.
    pub zone_bounds: Vec<f64>,
    /// S²: number of cells per zone, caps included.
    pub zone_counts: Vec<usize>,
}

fn on_s2(theta: f64, phi: f64) -> Vec<f64> {
    vec![theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
}

/// Colatitude of the polar cap with area `a`.
fn cap_angle(a: f64) -> f64 {
    2.0 * (a / (4.0 * PI)).sqrt().min(1.0).asin()
}

fn cap_area(theta: f64) -> f64 {
    4.0 * PI * (theta / 2.0).sin().powi(2)
}

pub fn eq_partition(sphere_dim: usize, n: usize) -> Result<SpherePartition> {
    if n < 2 {
        return Err(Error::InvalidArgument("a partition needs N >= 2 cells".into()));
    }
    match sphere_dim {
        1 => {
            let w = 2.0 * PI / n as f64;
            let cells = (0..n)
                .map(|k| {
                    let mid = (k as f64 + 0.5) * w;
                    Cell { colatitude: [0.0, 0.0], azimuth: [k as f64 * w, (k + 1) as f64 * w], zone: 0, representative: vec![mid.cos(), mid.sin()] }
                })
                .collect();
            Ok(SpherePartition { sphere_dim, cells, zone_bounds: Vec::new(), zone_counts: vec![n] })
        }
        2 => Ok(eq_s2(n)),
        _ => Err(Error::InvalidArgument("equal-area partitions are implemented for S^1 and S^2 only".into())),
    }
}

fn eq_s2(n: usize) -> SpherePartition {
    let area = 4.0 * PI / n as f64;
    let theta_c = cap_angle(area);
    let mut counts = vec![1usize];
    if n > 2 {
        let ideal_collar = area.sqrt();
        let collars = (((PI - 2.0 * theta_c) / ideal_collar).round() as usize).max(1);
        let fit = (PI - 2.0 * theta_c) / collars as f64;
        let mut carry = 0.0;
        for i in 1..=collars {
            let lo = theta_c + (i - 1) as f64 * fit;
            let hi = theta_c + i as f64 * fit;
            let ideal = (cap_area(hi) - cap_area(lo)) / area;
            let m = (ideal + carry).round();
            carry += ideal - m;
            counts.push(m as usize);
        }
    }
    counts.push(1);
    debug_assert_eq!(counts.iter().sum::<usize>(), n);
    // zone boundaries from cumulative cell counts
    let mut bounds = Vec::with_capacity(counts.len() - 1);
    let mut cum = 0usize;
    for &c in &counts[..counts.len() - 1] {
        cum += c;
        bounds.push(if cum == n - 1 { PI - theta_c } else { cap_angle(cum as f64 * area) });
    }
    let mut cells = Vec::with_capacity(n);
    let zones = counts.len();
    for (z, &m) in counts.iter().enumerate() {
        let lo = if z == 0 { 0.0 } else { bounds[z - 1] };
        let hi = if z + 1 == zones { PI } else { bounds[z] };
        if z == 0 || z + 1 == zones {
            let pole = if z == 0 { vec![0.0, 0.0, 1.0] } else { vec![0.0, 0.0, -1.0] };
            cells.push(Cell { colatitude: [lo, hi], azimuth: [0.0, 2.0 * PI], zone: z, representative: pole });
            continue;
        }
        let w = 2.0 * PI / m as f64;
        for k in 0..m {
            let (a0, a1) = (k as f64 * w, (k + 1) as f64 * w);
            cells.push(Cell {
                colatitude: [lo, hi],
                azimuth: [a0, a1],
                zone: z,
                representative: on_s2(0.5 * (lo + hi), 0.5 * (a0 + a1)),
            });
        }
    }
    SpherePartition { sphere_dim: 2, cells, zone_bounds: bounds, zone_counts: counts }
}

fn azimuth(x: f64, y: f64) -> f64 {
    let a = y.atan2(x);
    if a < 0.0 {
        a + 2.0 * PI
    } else {
        a
    }
}

/// Index k of the sector [kw, (k+1)w] containing φ, lowest index on ties.
fn sector(phi: f64, m: usize) -> usize {
    let w = 2.0 * PI / m as f64;
    ((phi / w).ceil() as usize).saturating_sub(1).min(m - 1)
}

impl SpherePartition {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Cell area |S^{dim}|/N, from the analytic cell bounds.
    pub fn cell_area(&self, k: usize) -> f64 {
        let c = &self.cells[k];
        match self.sphere_dim {
            1 => c.azimuth[1] - c.azimuth[0],
            _ => (c.colatitude[0].cos() - c.colatitude[1].cos()) * (c.azimuth[1] - c.azimuth[0]),
        }
    }

    /// Cell of a unit vector; shared boundaries go to the lowest index.
    pub fn locate(&self, p: &[f64]) -> Result<usize> {
        if p.len() != self.sphere_dim + 1 {
            return Err(Error::DimensionMismatch(format!("point of length {} on S^{}", p.len(), self.sphere_dim)));
        }
        let r = norm(p);
        if !(r > 0.0) {
            return Err(Error::ZeroVector);
        }
        let phi = azimuth(p[0], p[1]);
        if self.sphere_dim == 1 {
            return Ok(sector(phi, self.cells.len()));
        }
        let theta = (p[2] / r).clamp(-1.0, 1.0).acos();
        let zone = self.zone_bounds.partition_point(|b| *b < theta);
        let first: usize = self.zone_counts[..zone].iter().sum();
        Ok(first + if self.zone_counts[zone] == 1 { 0 } else { sector(phi, self.zone_counts[zone]) })
    }

    /// Neighbouring cells (sharing a boundary arc or point set of positive length).
    pub fn adjacent(&self, k: usize) -> Vec<usize> {
        let n = self.cells.len();
        if self.sphere_dim == 1 {
            let mut v = vec![(k + n - 1) % n, (k + 1) % n];
            v.sort_unstable();
            v.dedup();
            v.retain(|&j| j != k);
            return v;
        }
        let zk = self.cells[k].zone;
        let overlap = |a: &Cell, b: &Cell| a.azimuth[0] < b.azimuth[1] && b.azimuth[0] < a.azimuth[1];
        let mut out = Vec::new();
        for (j, c) in self.cells.iter().enumerate() {
            if j == k {
                continue;
            }
            let same = c.zone == zk && {
                let m = self.zone_counts[zk];
                let (ik, ij) = (k - self.cells.iter().position(|x| x.zone == zk).unwrap(), j - self.cells.iter().position(|x| x.zone == zk).unwrap());
                m > 1 && ((ik + 1) % m == ij || (ij + 1) % m == ik)
            };
            let stacked = (c.zone + 1 == zk || zk + 1 == c.zone) && overlap(c, &self.cells[k]);
            if same || stacked {
                out.push(j);
            }
        }
        out
    }

    /// Whether cells a and b are equal or adjacent.
    pub fn is_near(&self, a: usize, b: usize) -> bool {
        a == b || self.adjacent(a).contains(&b)
    }

    /// Euclidean diameter of a cell, by dense sampling of its boundary.
    pub fn cell_diameter(&self, k: usize) -> f64 {
        let c = &self.cells[k];
        if self.sphere_dim == 1 {
            return 2.0 * (0.5 * (c.azimuth[1] - c.azimuth[0])).min(PI / 2.0).sin();
        }
        if c.azimuth[1] - c.azimuth[0] >= 2.0 * PI - 1e-12 {
            // caps and full bands: widest chord across the zone
            let (t0, t1) = (c.colatitude[0], c.colatitude[1]);
            if t0 == 0.0 || t1 == PI {
                let t = if t0 == 0.0 { t1 } else { PI - t0 };
                return if t >= PI / 2.0 { 2.0 } else { 2.0 * t.sin() };
            }
            return 2.0 * if t0 <= PI / 2.0 && t1 >= PI / 2.0 { 1.0 } else { t0.sin().max(t1.sin()) };
        }
        let m = 64;
        let mut pts = Vec::with_capacity(4 * m);
        for s in 0..m {
            let f = s as f64 / (m - 1) as f64;
            let th = c.colatitude[0] + f * (c.colatitude[1] - c.colatitude[0]);
            let ph = c.azimuth[0] + f * (c.azimuth[1] - c.azimuth[0]);
            pts.push(on_s2(th, c.azimuth[0]));
            pts.push(on_s2(th, c.azimuth[1]));
            pts.push(on_s2(c.colatitude[0], ph));
            pts.push(on_s2(c.colatitude[1], ph));
        }
        let mut best = 0.0f64;
        for a in 0..pts.len() {
            for b in a + 1..pts.len() {
                let d2: f64 = pts[a].iter().zip(&pts[b]).map(|(x, y)| (x - y).powi(2)).sum();
                best = best.max(d2);
            }
        }
        best.sqrt()
    }

    /// Diameter in the intrinsic (great-circle) metric of the sphere.
    pub fn cell_geodesic_diameter(&self, k: usize) -> f64 {
        2.0 * (0.5 * self.cell_diameter(k)).min(1.0).asin()
    }

    pub fn max_diameter(&self) -> f64 {
        (0..self.len()).map(|k| self.cell_diameter(k)).fold(0.0, f64::max)
    }

    pub fn max_geodesic_diameter(&self) -> f64 {
        (0..self.len()).map(|k| self.cell_geodesic_diameter(k)).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellHistogram {
    pub counts: Vec<u64>,
    pub total: u64,
}

impl CellHistogram {
    pub fn fractions(&self) -> Vec<f64> {
        let t = self.total.max(1) as f64;
        self.counts.iter().map(|c| *c as f64 / t).collect()
    }
}

/// Histogram of points on the sphere; points must have norm within 1e−9 of 1.
pub fn cell_histogram<P: AsRef<[f64]>>(points: &[P], partition: &SpherePartition) -> Result<CellHistogram> {
    for p in points {
        let r = norm(p.as_ref());
        if r == 0.0 {
            return Err(Error::ZeroVector);
        }
        if (r - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!("point with norm {r} is not on the sphere")));
        }
    }
    cell_histogram_lenient(points, partition)
}

/// Histogram of the projections p/|p| of nonzero vectors.
pub fn cell_histogram_lenient<P: AsRef<[f64]>>(points: &[P], partition: &SpherePartition) -> Result<CellHistogram> {
    let mut counts = vec![0u64; partition.len()];
    for p in points {
        counts[partition.locate(p.as_ref())?] += 1;
    }
    Ok(CellHistogram { counts, total: points.len() as u64 })
}
