use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use kgstitch_core::align::{cka, pca_project, AatParams};
use kgstitch_core::cone::{certify_optimality, cone_predict, ConeDecoder, HardDecoder};
use kgstitch_core::diff::Tensor;
use kgstitch_core::kg::{
    check_property, derive_kg, generate_synthetic_tree, split_triples, PropertyKind, PropertySpec,
    RelationSet,
};
use kgstitch_core::prune::{
    judge_node, FlipModel, NoisyOracle, PruneConfig, RelationOracle, ScriptedOracle,
};
use kgstitch_core::train::{train, Representation, TrainConfig};

fn cloud(n: usize, d: usize, seed: u64) -> Tensor {
    Tensor::randn(n, d, 1.0, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn rotation(d: usize, seed: u64) -> Tensor {
    // Gram-Schmidt on a Gaussian matrix.
    let g = cloud(d, d, seed);
    let mut q: Vec<Vec<f64>> = Vec::new();
    for r in 0..d {
        let mut v = g.row(r).to_vec();
        for u in &q {
            let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= dot * b);
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        q.push(v.into_iter().map(|a| a / norm).collect());
    }
    Tensor::from_rows(&q).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn derived_kinship_obeys_its_laws(seed in 0u64..500, gens in 2usize..5) {
        let facts = generate_synthetic_tree(gens, 3, 0.5, seed).unwrap();
        let kg = derive_kg(&facts, RelationSet::Full18);
        prop_assert_eq!(&kg, &derive_kg(&facts, RelationSet::Full18));
        let laws = [
            PropertySpec::transitive("ancestor"),
            PropertySpec::transitive("descendant"),
            PropertySpec::antisymmetric("ancestor"),
            PropertySpec::antisymmetric("descendant"),
            PropertySpec::symmetric("brother|sister"),
            PropertySpec::symmetric("husband|wife"),
            PropertySpec::meta_transitive("father|mother", "father|mother", "grandfather|grandmother"),
            PropertySpec::meta_transitive("brother|sister", "brother|sister", "brother|sister"),
        ];
        for law in &laws {
            let v = check_property(&kg, law).unwrap();
            // Sibling transitivity may close a loop back onto the subject.
            let v: Vec<_> = v.into_iter().filter(|w| !matches!(w,
                kgstitch_core::kg::Violation::Triple(i, _, k) if i == k)).collect();
            prop_assert!(v.is_empty(), "{law}: {v:?}");
        }
        for i in 0..kg.n() {
            for r in 0..kg.m() {
                prop_assert!(!kg.holds(r, i, i));
            }
        }
        let anc = kg.relation_index("ancestor").unwrap();
        let desc = kg.relation_index("descendant").unwrap();
        for &(i, j) in kg.edges(anc) {
            prop_assert!(kg.holds(desc, j, i));
        }
    }

    #[test]
    fn split_partitions_every_triple(seed in 0u64..1000, fraction in 0.05f64..0.95) {
        let facts = generate_synthetic_tree(3, 3, 0.5, seed).unwrap();
        let kg = derive_kg(&facts, RelationSet::DescendantOnly);
        let split = split_triples(&kg, fraction, seed).unwrap();
        let mut all: Vec<_> = split.train.iter().chain(&split.test).copied().collect();
        all.sort();
        let mut expected = kg.all_triples();
        expected.sort();
        prop_assert_eq!(all, expected);
        let total = kg.m() * kg.n() * kg.n();
        prop_assert_eq!(split.train.len(), (fraction * total as f64).round() as usize);
        prop_assert_eq!(split_triples(&kg, fraction, seed).unwrap(), split);
    }

    #[test]
    fn hard_cone_relation_is_a_strict_order(seed in any::<u64>(), n in 2usize..25) {
        let rep = Representation::new(cloud(n, 2, seed)).unwrap();
        let report = certify_optimality(
            &rep,
            &HardDecoder::Cone,
            &[PropertyKind::Antisymmetric, PropertyKind::Transitive],
        )
        .unwrap();
        prop_assert!(report.is_optimal());
    }

    #[test]
    fn hard_cone_on_lattice_ties(points in prop::collection::vec((0i8..4, 0i8..4), 2..20)) {
        let rows: Vec<Vec<f64>> = points.iter().map(|&(a, b)| vec![a as f64, b as f64]).collect();
        let rep = Representation::from_rows(&rows).unwrap();
        let report = certify_optimality(
            &rep,
            &HardDecoder::Cone,
            &[PropertyKind::Antisymmetric, PropertyKind::Transitive],
        )
        .unwrap();
        prop_assert!(report.is_optimal());
    }

    #[test]
    fn soft_cone_agrees_with_hard_cone_away_from_ties(seed in any::<u64>()) {
        let x = cloud(8, 2, seed);
        let soft = ConeDecoder::soft(1e-6).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let (a, b) = (x.row(i), x.row(j));
                let gap = (a[0] - b[0]).abs().min((a[1] - b[1]).abs());
                if gap < 1e-3 {
                    continue;
                }
                let hard = cone_predict(a, b, &ConeDecoder::hard()).unwrap();
                let p = cone_predict(a, b, &soft).unwrap();
                prop_assert_eq!(p > 0.5, hard == 1.0);
            }
        }
    }

    #[test]
    fn heaviside_relation_survives_monotone_remaps(
        values in prop::collection::vec(-100.0f64..100.0, 2..12),
        scale in 0.01f64..50.0,
        shift in -100.0f64..100.0,
    ) {
        let remap = |v: f64| scale * v.atan() * 3.0 + shift + v * scale;
        let induced = |xs: &[f64]| {
            let rows: Vec<Vec<f64>> = xs.iter().map(|&v| vec![v]).collect();
            let rep = Representation::from_rows(&rows).unwrap();
            kgstitch_core::cone::induced_graph(&rep, &HardDecoder::Heaviside).unwrap()
        };
        let mapped: Vec<f64> = values.iter().map(|&v| remap(v)).collect();
        let (a, b) = (induced(&values), induced(&mapped));
        prop_assert_eq!(a.edges(0), b.edges(0));
    }

    #[test]
    fn cka_is_symmetric_and_invariant(seed in any::<u64>(), n in 5usize..40, d in 1usize..6) {
        let x = cloud(n, d, seed);
        let y = cloud(n, d + 1, seed ^ 1);
        let xy = cka(&x, &y).unwrap();
        prop_assert!((xy - cka(&y, &x).unwrap()).abs() < 1e-12);
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&xy));
        prop_assert!((cka(&x, &x).unwrap() - 1.0).abs() < 1e-9);
        let q = rotation(d, seed ^ 2);
        let mut moved = x.matmul(&q).unwrap();
        for (idx, v) in moved.data_mut().iter_mut().enumerate() {
            *v = 2.5 * *v + (idx % d) as f64 * 3.0 - 1.0;
        }
        prop_assert!((cka(&moved, &y).unwrap() - xy).abs() < 1e-9);
    }

    #[test]
    fn zero_epsilon_transform_is_exactly_affine(seed in any::<u64>(), n in 1usize..10, di in 1usize..5, dout in 1usize..5) {
        let x = cloud(n, di, seed);
        let mut p = AatParams::zeros(di, dout, 0.0).unwrap();
        p.linear = cloud(dout, di, seed ^ 3);
        p.bias = cloud(1, dout, seed ^ 4);
        p.quadratic = cloud(dout, di * di, seed ^ 5);
        let out = p.apply(&Representation::new(x.clone()).unwrap()).unwrap();
        for i in 0..n {
            for k in 0..dout {
                let mut v = 0.0;
                for l in 0..di {
                    v += x.get(i, l) * p.linear.get(k, l);
                }
                v += p.bias.get(0, k);
                prop_assert_eq!(out.matrix().get(i, k).to_bits(), v.to_bits());
            }
        }
    }

    #[test]
    fn full_rank_pca_reconstructs(seed in any::<u64>(), n in 3usize..20, d in 1usize..5) {
        let x = cloud(n, d, seed);
        let k = n.min(d);
        let pca = pca_project(&x, k).unwrap();
        prop_assert!(pca.reconstruct().unwrap().max_abs_diff(&x) < 1e-9);
        prop_assert!(pca.explained_ratio.windows(2).all(|w| w[0] >= w[1] - 1e-12));
    }

    #[test]
    fn correcting_answers_never_hurts_a_node(seed in 0u64..200, wrong in prop::collection::vec(any::<bool>(), 64)) {
        let facts = generate_synthetic_tree(3, 3, 0.5, seed).unwrap();
        let kg = derive_kg(&facts, RelationSet::Full18);
        prop_assume!(kg.n() >= 3);
        let node = kg.n() - 1;
        let accepted: Vec<usize> = (0..kg.n() - 1).collect();
        let cfg = PruneConfig::default();
        let mut questions = Vec::new();
        for &u in &accepted {
            for r in 0..kg.m() {
                questions.push((node, r, u));
                questions.push((u, r, node));
            }
        }
        let mut table = BTreeMap::new();
        for (q, &flip) in questions.iter().zip(wrong.iter().cycle()) {
            if flip {
                table.insert(*q, !kg.holds(q.1, q.0, q.2));
            }
        }
        let mut worse = ScriptedOracle::new(table.clone(), Some(&kg));
        let (t_worse, v_worse) = judge_node(&kg, node, &accepted, &mut worse, &cfg);
        // Fix one wrong answer.
        if let Some((&q, _)) = table.iter().next() {
            table.remove(&q);
        }
        let mut better = ScriptedOracle::new(table, Some(&kg));
        let (t_better, v_better) = judge_node(&kg, node, &accepted, &mut better, &cfg);
        prop_assert!(t_better.correct >= t_worse.correct);
        if v_worse.is_none() {
            prop_assert!(v_better.is_none());
        }
    }

    #[test]
    fn noisy_oracle_is_reproducible(seed in any::<u64>(), p in 0.0f64..1.0) {
        let facts = generate_synthetic_tree(3, 2, 0.5, 7).unwrap();
        let kg = derive_kg(&facts, RelationSet::Full18);
        let mut a = NoisyOracle::new(&kg, FlipModel::Global(p), seed).unwrap();
        let mut b = NoisyOracle::new(&kg, FlipModel::Global(p), seed).unwrap();
        for s in 0..kg.n() {
            for o in 0..kg.n() {
                prop_assert_eq!(a.answer(s, 0, o).unwrap(), b.answer(s, 0, o).unwrap());
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn training_is_deterministic(seed in any::<u64>()) {
        let facts = generate_synthetic_tree(3, 2, 0.5, 3).unwrap();
        let kg = derive_kg(&facts, RelationSet::DescendantOnly);
        let cfg = TrainConfig { steps: 40, width: 8, seed, split_seed: seed, ..TrainConfig::default() };
        let split = split_triples(&kg, cfg.train_fraction, cfg.split_seed).unwrap();
        let a = train(&kg, &split, &cfg).unwrap();
        let b = train(&kg, &split, &cfg).unwrap();
        prop_assert_eq!(a, b);
    }
}
