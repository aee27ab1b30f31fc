use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use streamant_core::distill::{
    combined_loss_grad, cross_entropy, distill_loss, gap_mse_loss, mean_similarity, FeatureMap, LossWeights, ToyEncoder,
};

fn map_strategy() -> impl Strategy<Value = (FeatureMap, FeatureMap)> {
    (1usize..6, 1usize..9).prop_flat_map(|(c, l)| {
        let data = prop::collection::vec(-3.0f64..3.0, c * l);
        (data.clone(), data).prop_map(move |(p, f)| {
            (
                FeatureMap::new(c, l, 1, 1, p).unwrap(),
                FeatureMap::new(c, l, 1, 1, f).unwrap(),
            )
        })
    })
}

fn shuffled(n: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    perm
}

proptest! {
    #[test]
    fn permuting_either_map_leaves_the_loss_unchanged((p, f) in map_strategy(), s1 in any::<u64>(), s2 in any::<u64>()) {
        let base = distill_loss(&p, &f).unwrap().value;
        let pp = p.permute_locations(&shuffled(p.locations(), s1)).unwrap();
        let ff = f.permute_locations(&shuffled(f.locations(), s2)).unwrap();
        prop_assert_eq!(distill_loss(&pp, &f).unwrap().value, base);
        prop_assert_eq!(distill_loss(&p, &ff).unwrap().value, base);
        prop_assert_eq!(distill_loss(&pp, &ff).unwrap().value, base);
        prop_assert_eq!(gap_mse_loss(&pp, &ff).unwrap().value, gap_mse_loss(&p, &f).unwrap().value);
    }

    #[test]
    fn power_of_two_rescaling_is_exact((p, f) in map_strategy(), exps in prop::collection::vec(-8i32..8, 8)) {
        let scales: Vec<f64> = (0..p.locations()).map(|i| 2f64.powi(exps[i])).collect();
        let base = distill_loss(&p, &f).unwrap().value;
        prop_assert_eq!(distill_loss(&p.scale_locations(&scales).unwrap(), &f).unwrap().value, base);
        prop_assert_eq!(distill_loss(&p, &f.scale_locations(&scales).unwrap()).unwrap().value, base);
    }

    #[test]
    fn arbitrary_positive_rescaling_is_invariant((p, f) in map_strategy(), raw in prop::collection::vec(0.01f64..100.0, 8)) {
        let scales = &raw[..p.locations()];
        let base = distill_loss(&p, &f).unwrap().value;
        let scaled = distill_loss(&p.scale_locations(scales).unwrap(), &f.scale_locations(scales).unwrap()).unwrap().value;
        prop_assert!((scaled - base).abs() <= 1e-12 * base.abs());
    }

    #[test]
    fn loss_is_at_least_one_when_similarity_is_positive((p, f) in map_strategy()) {
        let m = mean_similarity(&p, &f).unwrap();
        let loss = distill_loss(&p, &f).unwrap().value;
        if m > 1e-4 && m <= 1.0 {
            prop_assert!(loss >= 1.0);
            prop_assert!((loss - 1.0 / m).abs() <= 1e-12 * loss);
        }
    }

    #[test]
    fn combined_value_recomposes_from_parts(
        (p, f) in map_strategy(),
        logits in prop::collection::vec(-4.0f64..4.0, 2..7),
        pick in any::<prop::sample::Index>(),
        ld in 0.0f64..30.0,
        lc in 0.0f64..3.0,
    ) {
        let w = LossWeights::new(ld, lc).unwrap();
        let y = pick.index(logits.len());
        let g = combined_loss_grad(&p, &f, &logits, Some(y), w).unwrap();
        let expected = ld * distill_loss(&p, &f).unwrap().value + lc * cross_entropy(&logits, y).unwrap().0;
        prop_assert!((g.value - expected).abs() <= 1e-12 * expected.abs().max(1.0));
        let unlabeled = combined_loss_grad(&p, &f, &logits, None, w).unwrap();
        prop_assert!(unlabeled.logits.iter().all(|z| *z == 0.0));
        prop_assert_eq!(unlabeled.value, ld * distill_loss(&p, &f).unwrap().value);
    }
}

#[test]
fn unlabeled_pairs_never_move_the_classifier_head() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (input, hidden, channels, classes) = (4, 6, 5, 3);
    let enc = ToyEncoder::random(input, hidden, channels, classes, &mut rng);
    let x = vec![
        vec![0.3, -1.2, 0.8, 0.1],
        vec![1.0, 0.4, -0.5, 0.9],
        vec![-0.2, 0.7, 0.6, -1.1],
    ];
    let target = FeatureMap::from_locations(&[vec![1.0; 5], vec![0.5; 5], vec![2.0, 1.0, 0.0, 1.0, 1.0]]).unwrap();
    let fwd = enc.forward(&x);
    let g = combined_loss_grad(
        &fwd.features().unwrap(),
        &target,
        &fwd.logits,
        None,
        LossWeights::default(),
    )
    .unwrap();
    let grad = enc.backward(&fwd, &g.features, &g.logits);
    let head = classes * channels + classes;
    assert!(grad[grad.len() - head..].iter().all(|v| *v == 0.0));
    assert!(grad[..grad.len() - head].iter().any(|v| *v != 0.0));
}
