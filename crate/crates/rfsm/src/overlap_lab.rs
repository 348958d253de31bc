//! Replica overlaps R_n^{a,b} = (1/n) Σ ⟨φᵃ(i), φᵇ(i)⟩, their predicted
//! limits, and the three-replica ultrametricity statistic.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use crate::measure_tools::EmpiricalLaw1D;

use crate::basis_transform::build_basis;
use crate::error::{Error, Result};
use crate::gibbs_sampler::{sample_gibbs, sample_microcanonical_one, ChainConfig, GibbsDraws, MixtureCoordinate, SamplerDiagnostics, SpinConfiguration};
use crate::limit_states::{rho_r, GammaSampler, OverlapLawSpec, RhoLaw, RhoMode, TiltedSphereLaw};
use crate::linalg::{dot, norm, norm_sq};
use crate::model_core::{classify_regime, compute_sample_stats, DisorderSample, FieldScaling, ModelParams};
use crate::rng;
use crate::stochastic_drivers::{generate_disorder, FieldDistributionSpec};

pub fn overlap_of_pair(a: &SpinConfiguration, b: &SpinConfiguration) -> Result<f64> {
    if a.n != b.n || a.d != b.d {
        return Err(Error::DimensionMismatch(format!("replicas differ: ({}, {}) vs ({}, {})", a.n, a.d, b.n, b.d)));
    }
    Ok(dot(&a.values, &b.values) / a.n as f64)
}

/// Two independent replica families sharing one disorder sample: replica a
/// and replica b come from separately seeded latent chains, so pairs are
/// conditionally independent given h.
pub struct ReplicaBatch {
    pub h: DisorderSample,
    pub a: GibbsDraws,
    pub b: GibbsDraws,
}

impl ReplicaBatch {
    pub fn sample(h: DisorderSample, p: &ModelParams, cfg: &ChainConfig, pairs: usize) -> Result<Self> {
        let a = sample_gibbs(&h, p, &cfg.with_seed(rng::derive_seed(cfg.seed, rng::label("replica_a"))), pairs)?;
        let b = sample_gibbs(&h, p, &cfg.with_seed(rng::derive_seed(cfg.seed, rng::label("replica_b"))), pairs)?;
        Ok(ReplicaBatch { h, a, b })
    }

    pub fn pairs(&self) -> usize {
        self.a.len().min(self.b.len())
    }

    /// R^{a,b} for every pair, in pair order.
    pub fn overlaps(&self) -> Vec<f64> {
        (0..self.pairs())
            .into_par_iter()
            .map(|k| overlap_of_pair(&self.a.configuration(k), &self.b.configuration(k)).expect("replicas share n and d"))
            .collect()
    }

    pub fn max_constraint_deviation(&self, count: usize) -> f64 {
        (0..count.min(self.pairs()))
            .into_par_iter()
            .map(|k| self.a.configuration(k).constraint_deviation().max(self.b.configuration(k).constraint_deviation()))
            .reduce(|| 0.0, f64::max)
    }
}

/// The paper-stated deterministic overlap limit of the unscaled model,
/// max{1 − d/β, |s|²}.
pub fn predicted_overlap_limit(p: &ModelParams, second_moments: &[f64]) -> f64 {
    let s2: f64 = second_moments.iter().sum();
    (1.0 - p.d as f64 / p.beta).max(s2)
}

/// (r*)² + |y*|² at the maximizer of the limiting tilt. Equals 1 − d/β in the
/// ordered phase; in the disordered phase it is (r₂*)² with
/// r₂* = sqrt(1 + a²) − a, a = d/(2β|s|).
pub fn maximizer_overlap_limit(p: &ModelParams, second_moments: &[f64]) -> f64 {
    let c = classify_regime(p, second_moments).constants;
    c.r_star * c.r_star + norm_sq(&c.y_star)
}

#[derive(Clone, Debug)]
pub enum OverlapComparator {
    /// Unscaled model: δ_q.
    PointMass(f64),
    /// Scaled model: ρ^R at the realized R = |S_n|/√n.
    Rho { spec: OverlapLawSpec, law: RhoLaw },
}

#[derive(Clone, Debug)]
pub struct OverlapExperiment {
    pub law: EmpiricalLaw1D,
    pub comparator: OverlapComparator,
    /// |S_n|/√n of the disorder draw.
    pub scaled_walk_norm: f64,
    pub diagnostics: [SamplerDiagnostics; 2],
    pub max_constraint_deviation: f64,
}

impl OverlapExperiment {
    /// 1D BL surrogate distance to the comparator law.
    pub fn distance(&self) -> Result<f64> {
        match &self.comparator {
            OverlapComparator::PointMass(q) => crate::measure_tools::bl_distance_1d(&self.law, &EmpiricalLaw1D::new(vec![*q])?),
            OverlapComparator::Rho { law, .. } => crate::measure_tools::bl_distance_1d(&self.law, law.law()),
        }
    }

    pub fn comparator_mean(&self) -> f64 {
        match &self.comparator {
            OverlapComparator::PointMass(q) => *q,
            OverlapComparator::Rho { law, .. } => law.law().mean(),
        }
    }
}

/// Draws one disorder sample (seed `disorder_seed`), `pairs` replica pairs
/// at (n, p), and the predicted comparator.
pub fn overlap_experiment(
    spec: &FieldDistributionSpec,
    p: &ModelParams,
    n: usize,
    pairs: usize,
    cfg: &ChainConfig,
    disorder_seed: u64,
) -> Result<OverlapExperiment> {
    let h = generate_disorder(spec, n, disorder_seed)?;
    let stats = compute_sample_stats(&h)?;
    let scaled_walk_norm = norm(&stats.walk_sum) / (n as f64).sqrt();
    let batch = ReplicaBatch::sample(h, p, cfg, pairs)?;
    let values = batch.overlaps();
    let comparator = match p.scaling {
        FieldScaling::Unit => OverlapComparator::PointMass(predicted_overlap_limit(p, &spec.second_moments())),
        FieldScaling::InverseSqrtVolume => {
            let r_star = classify_regime(p, &spec.second_moments()).constants.r_star;
            let ls = OverlapLawSpec { r: scaled_walk_norm, d: p.d, beta: p.beta, r_star };
            let law = if p.d <= 3 {
                rho_r(&ls, RhoMode::Quadrature, &mut rng::stream(0, 0))?
            } else {
                rho_r(&ls, RhoMode::Sample(100_000), &mut rng::stream(rng::derive_seed(cfg.seed, rng::label("rho")), 0))?
            };
            OverlapComparator::Rho { spec: ls, law }
        }
    };
    Ok(OverlapExperiment {
        max_constraint_deviation: batch.max_constraint_deviation(values.len()),
        law: EmpiricalLaw1D::new(values)?,
        comparator,
        scaled_walk_norm,
        diagnostics: [batch.a.diagnostics.clone(), batch.b.diagnostics.clone()],
    })
}

/// Mean overlap of independent microcanonical draws at two latent points,
/// with its prediction ⟨xᵃ, xᵇ⟩ + ⟨yᵃ, yᵇ⟩.
pub fn microcanonical_overlap(
    h: &DisorderSample,
    ca: &MixtureCoordinate,
    cb: &MixtureCoordinate,
    count: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let basis = build_basis(h)?;
    let sum: f64 = (0..count)
        .into_par_iter()
        .map(|k| {
            let mut r = rng::stream(seed, k as u64);
            let a = sample_microcanonical_one(ca, &basis, &mut r);
            let b = sample_microcanonical_one(cb, &basis, &mut r);
            overlap_of_pair(&a, &b).expect("same basis")
        })
        .sum();
    Ok((sum / count as f64, dot(&ca.x, &cb.x) + dot(&ca.y, &cb.y)))
}

/// q^{ac} < min{q^{ab}, q^{bc}}.
pub fn violates_ultrametricity(q_ab: f64, q_bc: f64, q_ac: f64) -> bool {
    q_ac < q_ab.min(q_bc)
}

/// Empirical violation probability over i.i.d. triples Ω^a, Ω^b, Ω^c ~ γ^z
/// with q^{xy} = (r*)²⟨Ω^x, Ω^y⟩.
pub fn ultrametricity_rate<R: Rng + ?Sized>(law: &TiltedSphereLaw, r_star: f64, triples: usize, rng: &mut R) -> Result<f64> {
    if triples < 1000 {
        return Err(Error::InvalidArgument("ultrametricity needs >= 1000 triples".into()));
    }
    let g = GammaSampler::new(law);
    let r2 = r_star * r_star;
    let mut bad = 0usize;
    for _ in 0..triples {
        let (a, b, c) = (g.sample(rng), g.sample(rng), g.sample(rng));
        if violates_ultrametricity(r2 * dot(&a, &b), r2 * dot(&b, &c), r2 * dot(&a, &c)) {
            bad += 1;
        }
    }
    Ok(bad as f64 / triples as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapSummary {
    pub mean: f64,
    pub stdev: f64,
    pub comparator_mean: f64,
    pub distance: f64,
    pub scaled_walk_norm: f64,
}

impl OverlapExperiment {
    pub fn summary(&self) -> Result<OverlapSummary> {
        Ok(OverlapSummary {
            mean: self.law.mean(),
            stdev: self.law.stdev(),
            comparator_mean: self.comparator_mean(),
            distance: self.distance()?,
            scaled_walk_norm: self.scaled_walk_norm,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn pair_examples() {
        let a = SpinConfiguration::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let neg = SpinConfiguration::new(2, 2, a.values.iter().map(|v| -v).collect()).unwrap();
        assert_eq!(overlap_of_pair(&a, &a).unwrap(), 1.0);
        assert_eq!(overlap_of_pair(&a, &neg).unwrap(), -1.0);
        let c = SpinConfiguration::new(1, 2, vec![1.0, 0.0]).unwrap();
        assert!(overlap_of_pair(&a, &c).is_err());
    }

    #[test]
    fn predicted_limits() {
        let p = ModelParams::new(2, 8.0, FieldScaling::Unit).unwrap();
        assert!((predicted_overlap_limit(&p, &[0.125, 0.125]) - 0.75).abs() < 1e-15);
        assert!((maximizer_overlap_limit(&p, &[0.125, 0.125]) - 0.75).abs() < 1e-12);
        let hot = ModelParams::new(2, 100.0, FieldScaling::Unit).unwrap();
        assert!((predicted_overlap_limit(&hot, &[0.005, 0.005]) - 0.98).abs() < 1e-15);
        // on the critical curve both branches and the maximizer agree
        let crit = ModelParams::new(2, 8.0 / 3.0, FieldScaling::Unit).unwrap();
        assert!((predicted_overlap_limit(&crit, &[0.125, 0.125]) - 0.25).abs() < 1e-12);
        assert!((maximizer_overlap_limit(&crit, &[0.125, 0.125]) - 0.25).abs() < 1e-12);
        // disordered phase: the maximizer gives (√5 − 2)², not |s|²
        let para = ModelParams::new(2, 1.0, FieldScaling::Unit).unwrap();
        assert!((maximizer_overlap_limit(&para, &[0.125, 0.125]) - (5f64.sqrt() - 2.0).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn ultrametricity() {
        let r = 0.8f64;
        let r2 = r * r;
        let s = 0.5f64.sqrt();
        let (a, b, c) = ([1.0, 0.0], [s, s], [0.0, 1.0]);
        assert!(violates_ultrametricity(r2 * dot(&a, &b), r2 * dot(&b, &c), r2 * dot(&a, &c)));
        for k in [0.0, 0.3, 2.0] {
            let law = TiltedSphereLaw::with_kappa(vec![1.0], k).unwrap();
            assert_eq!(ultrametricity_rate(&law, r, 100_000, &mut stream(20, 0)).unwrap(), 0.0);
        }
        let law = TiltedSphereLaw::with_kappa(vec![1.0, 0.0], 1.0).unwrap();
        assert!(ultrametricity_rate(&law, r, 100_000, &mut stream(21, 0)).unwrap() >= 0.05);
        assert!(ultrametricity_rate(&law, r, 10, &mut stream(21, 0)).is_err());
    }

    #[test]
    fn microcanonical_overlap_prediction() {
        let spec = FieldDistributionSpec::gaussian(vec![vec![0.1, 0.0], vec![0.0, 0.2]]).unwrap();
        let ca = MixtureCoordinate::new(vec![0.5, 0.1], vec![0.2, -0.3]).unwrap();
        let cb = MixtureCoordinate::new(vec![0.4, -0.2], vec![0.25, -0.1]).unwrap();
        for n in [100usize, 1000] {
            let h = generate_disorder(&spec, n, 3).unwrap();
            let (m, pred) = microcanonical_overlap(&h, &ca, &cb, 4000, 5).unwrap();
            assert!((m - pred).abs() <= 5.0 / (n as f64).sqrt(), "n={n}: {m} vs {pred}");
        }
    }

    #[test]
    fn replica_overlaps_are_bounded() {
        let spec = FieldDistributionSpec::two_point(vec![0.125f64.sqrt(); 2]).unwrap();
        let p = ModelParams::new(2, 8.0, FieldScaling::Unit).unwrap();
        let mut cfg = ChainConfig::new(9);
        cfg.burn_in = 500;
        let e = overlap_experiment(&spec, &p, 200, 200, &cfg, 1).unwrap();
        assert!(e.law.values().iter().all(|v| v.abs() <= 1.0 + 1e-12));
        assert!(e.max_constraint_deviation <= 1e-9);
        assert!((e.law.mean() - 0.75).abs() < 0.1);
    }
}
