use proptest::prelude::*;
use streamant_core::metrics::{mean_topk_recall, topk_accuracy};

fn balanced() -> impl Strategy<Value = Vec<(Vec<f64>, usize)>> {
    (2usize..12, 1usize..9).prop_flat_map(|(classes, per_class)| {
        prop::collection::vec(prop::collection::vec(0u32..50, classes), classes * per_class).prop_map(move |rows| {
            rows.into_iter()
                .enumerate()
                .map(|(i, r)| (r.into_iter().map(f64::from).collect(), i % classes))
                .collect()
        })
    })
}

proptest! {
    #[test]
    fn balanced_sets_have_equal_micro_and_macro(preds in balanced(), k in 1usize..4) {
        let k = k.min(preds[0].0.len());
        prop_assert_eq!(topk_accuracy(&preds, k).unwrap(), mean_topk_recall(&preds, k).unwrap());
    }

    #[test]
    fn monotone_transforms_preserve_both_measures(preds in balanced(), k in 1usize..4) {
        let k = k.min(preds[0].0.len());
        let cubed: Vec<(Vec<f64>, usize)> = preds
            .iter()
            .map(|(s, y)| (s.iter().map(|v| v.powi(3) - 7.0).collect(), *y))
            .collect();
        let exp: Vec<(Vec<f64>, usize)> = preds
            .iter()
            .map(|(s, y)| (s.iter().map(|v| (v / 10.0).exp()).collect(), *y))
            .collect();
        for other in [&cubed, &exp] {
            prop_assert_eq!(topk_accuracy(&preds, k).unwrap(), topk_accuracy(other, k).unwrap());
            prop_assert_eq!(mean_topk_recall(&preds, k).unwrap(), mean_topk_recall(other, k).unwrap());
        }
    }
}
