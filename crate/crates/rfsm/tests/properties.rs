use proptest::prelude::*;

use rfsm::basis_transform::{build_basis, hypersphere_decode, hypersphere_encode};
use rfsm::gibbs_sampler::{sample_microcanonical_one, MixtureCoordinate};
use rfsm::measure_tools::total_variation;
use rfsm::model_core::compute_sample_stats;
use rfsm::overlap_lab::{overlap_of_pair, violates_ultrametricity};
use rfsm::rng::stream;
use rfsm::stochastic_drivers::{generate_disorder, walk_path, FieldDistributionSpec};

fn field(d: usize, kind: u8) -> FieldDistributionSpec {
    match kind % 3 {
        0 => FieldDistributionSpec::two_point(vec![0.4; d]).unwrap(),
        1 => FieldDistributionSpec::uniform_box(vec![1.0; d]).unwrap(),
        _ => FieldDistributionSpec::gaussian((0..d).map(|i| (0..d).map(|j| if i == j { 0.3 } else { 0.0 }).collect()).collect()).unwrap(),
    }
}

/// A latent point strictly inside the unit ball of R^{2d}.
fn latent(d: usize) -> impl Strategy<Value = MixtureCoordinate> {
    (prop::collection::vec(-1.0f64..1.0, 2 * d), 0.0f64..0.999).prop_map(move |(v, radius)| {
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-12);
        let v: Vec<f64> = v.iter().map(|a| a / norm * radius).collect();
        MixtureCoordinate::new(v[..d].to_vec(), v[d..].to_vec()).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn microcanonical_draws_keep_the_constraint(
        (d, c) in (1usize..=3).prop_flat_map(|d| (Just(d), latent(d))),
        n in 3usize..300,
        kind in any::<u8>(),
        seed in any::<u64>(),
    ) {
        let h = generate_disorder(&field(d, kind), n, seed).unwrap();
        prop_assume!(compute_sample_stats(&h).is_ok());
        let basis = build_basis(&h).unwrap();
        let mut rng = stream(seed, 1);
        let a = sample_microcanonical_one(&c, &basis, &mut rng);
        let b = sample_microcanonical_one(&c, &basis, &mut rng);
        prop_assert!(a.constraint_deviation() <= 1e-9);
        // magnetization pins the x coordinate: (1/n) Σ φ(i) = x
        for (m, x) in a.magnetization().iter().zip(&c.x) {
            prop_assert!((m / n as f64 - x).abs() <= 1e-9);
        }
        let q = overlap_of_pair(&a, &b).unwrap();
        prop_assert!(q.abs() <= 1.0 + 1e-12);
        prop_assert!((overlap_of_pair(&a, &a).unwrap() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn field_basis_is_orthonormal(d in 1usize..=3, n in 3usize..200, kind in any::<u8>(), seed in any::<u64>()) {
        let h = generate_disorder(&field(d, kind), n, seed).unwrap();
        prop_assume!(compute_sample_stats(&h).is_ok());
        let basis = build_basis(&h).unwrap();
        let e1 = basis.e1();
        for j in 0..d {
            let e2 = basis.e2(j);
            prop_assert!((e2.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(e1.iter().zip(e2).map(|(a, b)| a * b).sum::<f64>().abs() <= 1e-12);
            // complement vectors are orthogonal to both
            let g: Vec<f64> = (0..n - 2).map(|k| ((k * 7 + j) % 5) as f64 - 2.0).collect();
            let mut col = vec![0.0; n];
            basis.embed_complement(j, &g, &mut col);
            let gn = g.iter().map(|v| v * v).sum::<f64>();
            prop_assert!((col.iter().map(|v| v * v).sum::<f64>() - gn).abs() <= 1e-9 * (1.0 + gn));
            prop_assert!(col.iter().zip(&e1).map(|(a, b)| a * b).sum::<f64>().abs() <= 1e-9 * (1.0 + gn.sqrt()));
            prop_assert!(col.iter().zip(e2).map(|(a, b)| a * b).sum::<f64>().abs() <= 1e-9 * (1.0 + gn.sqrt()));
        }
    }

    #[test]
    fn hyperspherical_round_trip(v in prop::collection::vec(-1.0f64..1.0, 1..6)) {
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        prop_assume!(norm > 1e-6);
        let omega: Vec<f64> = v.iter().map(|a| a / norm).collect();
        let back = hypersphere_encode(&hypersphere_decode(&omega).unwrap(), omega.len()).unwrap();
        for (a, b) in back.iter().zip(&omega) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn one_dimensional_overlaps_are_ultrametric(signs in prop::collection::vec(any::<bool>(), 3), r in 0.01f64..1.0) {
        let s: Vec<f64> = signs.iter().map(|&b| if b { 1.0 } else { -1.0 }).collect();
        let q = |a: usize, b: usize| r * r * s[a] * s[b];
        prop_assert!(!violates_ultrametricity(q(0, 1), q(1, 2), q(0, 2)));
    }

    #[test]
    fn disorder_prefixes_and_walks_agree(d in 1usize..=3, n in 1usize..200, kind in any::<u8>(), seed in any::<u64>()) {
        let spec = field(d, kind);
        let long = generate_disorder(&spec, n + 17, seed).unwrap();
        let short = generate_disorder(&spec, n, seed).unwrap();
        prop_assert_eq!(&long.prefix(n).unwrap().values, &short.values);
        let walk = walk_path(&spec, n, seed).unwrap();
        let sum: Vec<f64> = (0..d).map(|j| short.component(j).iter().sum()).collect();
        for (a, b) in walk.sum(n).iter().zip(&sum) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn total_variation_is_a_metric_on_masses(a in prop::collection::vec(0.0f64..1.0, 2..20), seed in any::<u64>()) {
        let sa: f64 = a.iter().sum();
        prop_assume!(sa > 0.0);
        let p: Vec<f64> = a.iter().map(|v| v / sa).collect();
        let mut q = p.clone();
        q.rotate_left((seed % p.len() as u64) as usize);
        let tv = total_variation(&p, &q).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&tv));
        prop_assert!((tv - total_variation(&q, &p).unwrap()).abs() <= 1e-15);
        prop_assert!(total_variation(&p, &p).unwrap() <= 1e-15);
    }
}
