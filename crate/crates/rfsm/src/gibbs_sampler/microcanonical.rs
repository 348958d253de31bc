use rand::Rng;
use rand_distr::StandardNormal;

use super::{MixtureCoordinate, SpinConfiguration};
use crate::basis_transform::OrthonormalBasis;
use crate::rng::StreamRng;

/// One draw from the shifted microcanonical measure at (x, y):
/// φ = Σ_j (x_j √n e_{1,j} + y_j √n e_{2,j}) + √n sqrt(1 − |x|² − |y|²) G/|G|,
/// with G standard Gaussian on the (n − 2)d-dimensional complement.
pub fn sample_microcanonical_one(c: &MixtureCoordinate, basis: &OrthonormalBasis, rng: &mut StreamRng) -> SpinConfiguration {
    let (n, d) = (basis.n, basis.d);
    let k = basis.complement_dim();
    let sqrt_n = (n as f64).sqrt();
    let mut values = vec![0.0; n * d];
    let slack = c.slack().max(0.0);
    if k > 0 {
        let mut cols = vec![vec![0.0; n]; d];
        let mut g = vec![0.0; k];
        let mut total = 0.0;
        for (j, col) in cols.iter_mut().enumerate() {
            for v in g.iter_mut() {
                *v = rng.sample(StandardNormal);
                total += *v * *v;
            }
            basis.embed_complement(j, &g, col);
        }
        let scale = sqrt_n * slack.sqrt() / total.sqrt();
        for (j, col) in cols.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                values[i * d + j] = scale * v;
            }
        }
    }
    for j in 0..d {
        let e2 = basis.e2(j);
        for i in 0..n {
            values[i * d + j] += c.x[j] + c.y[j] * sqrt_n * e2[i];
        }
    }
    SpinConfiguration { n, d, values }
}

pub fn sample_microcanonical(
    c: &MixtureCoordinate,
    basis: &OrthonormalBasis,
    count: usize,
    rng: &mut StreamRng,
) -> Vec<SpinConfiguration> {
    (0..count).map(|_| sample_microcanonical_one(c, basis, rng)).collect()
}
