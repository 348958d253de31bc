//! Small dense helpers for d-vectors.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

/// `a / |a|`, or `None` for the zero vector.
pub fn unit(a: &[f64]) -> Option<Vec<f64>> {
    let n = norm(a);
    if n > 0.0 && n.is_finite() {
        Some(a.iter().map(|v| v / n).collect())
    } else {
        None
    }
}

/// Orthogonal d×d matrix (row-major) whose first row is the unit vector `u`,
/// i.e. `Q u = e1`. Built from one Householder reflection, with the sign chosen
/// to avoid cancellation.
pub fn frame_with_first_row(u: &[f64]) -> Vec<f64> {
    let d = u.len();
    let mut v = u.to_vec();
    // u1 > 0: reflect onto -e1 via v = u + e1, then flip the first row.
    let flip = u[0] > 0.0;
    if flip {
        v[0] += 1.0;
    } else {
        v[0] -= 1.0;
    }
    let vv = norm_sq(&v);
    let mut q = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            let id = if i == j { 1.0 } else { 0.0 };
            q[i * d + j] = if vv > 0.0 { id - 2.0 * v[i] * v[j] / vv } else { id };
        }
    }
    if flip {
        for j in 0..d {
            q[j] = -q[j];
        }
    }
    q
}

pub fn mat_vec(q: &[f64], v: &[f64]) -> Vec<f64> {
    let d = v.len();
    (0..d).map(|i| dot(&q[i * d..(i + 1) * d], v)).collect()
}

pub fn mat_t_vec(q: &[f64], v: &[f64]) -> Vec<f64> {
    let d = v.len();
    (0..d).map(|j| (0..d).map(|i| q[i * d + j] * v[i]).sum()).collect()
}
