mod common;

use common::*;
use ndarray::Array2;
use ood_relabel::data::{
    generate_synthetic_corpus, partition_clean_noisy, split_validation, SoftLabel, SyntheticSpec,
};
use ood_relabel::eval::{accuracy, micro_average_precision};
use ood_relabel::nn::{bootstrap_target, mixup, noise_layer_apply, Classifier, NoiseMatrix};
use ood_relabel::relabel::pseudo_label;
use proptest::prelude::*;

fn simplex(k: usize) -> impl Strategy<Value = SoftLabel> {
    prop::collection::vec(0.001f64..1.0, k).prop_map(|w| SoftLabel::normalized(w).unwrap())
}

fn label_pair() -> impl Strategy<Value = (usize, SoftLabel, SoftLabel)> {
    (2usize..7).prop_flat_map(|k| (Just(k), simplex(k), simplex(k)))
}

proptest! {
    #[test]
    fn convex_label_maps_stay_on_simplex((k, a, b) in label_pair(), w in 0.0f64..=1.0, class in 0usize..7) {
        let y = SoftLabel::one_hot(class % k, k).unwrap();
        prop_assert!(pseudo_label(&y, &b, w).unwrap().on_simplex());
        prop_assert!(bootstrap_target(&a, &b, w).unwrap().on_simplex());
    }

    #[test]
    fn noise_layer_stays_on_simplex((k, p, _) in label_pair(), rows in prop::collection::vec(simplex(6), 6)) {
        let entries: Vec<f64> = rows.iter().take(k).flat_map(|r| {
            let head = &r.probs()[..k];
            let s: f64 = head.iter().sum();
            head.iter().map(move |v| v / s).collect::<Vec<_>>()
        }).collect();
        let q = NoiseMatrix::new(k, entries).unwrap();
        prop_assert!(noise_layer_apply(&p, &q).unwrap().on_simplex());
    }

    #[test]
    fn mixup_labels_stay_on_simplex(labels in prop::collection::vec(simplex(4), 2..12), seed in any::<u64>()) {
        let inputs: Vec<Array2<f64>> = labels.iter().enumerate()
            .map(|(i, _)| Array2::from_elem((2, 3), i as f64)).collect();
        let (_, mixed) = mixup(&inputs, &labels, 0.4, seed).unwrap();
        prop_assert!(mixed.iter().all(|l| l.on_simplex()));
    }

    #[test]
    fn clip_predictions_stay_on_simplex(seed in any::<u64>(), blocks in 1usize..5, scale in 0.1f64..50.0) {
        let clf = Classifier::new(conv_arch(4, 5, 3), seed).unwrap();
        let xs: Vec<Array2<f64>> = (0..blocks)
            .map(|b| Array2::from_shape_fn((4, 5), |(i, j)| scale * ((i * 5 + j + b) as f64).sin()))
            .collect();
        prop_assert!(clf.predict_clip(&xs).unwrap().on_simplex());
    }

    #[test]
    fn partition_and_split_are_exact(seed in 0u64..1000, verified in 0.2f64..1.0, per_class in 0usize..5) {
        let spec = SyntheticSpec { seed, verified_fraction: verified, points_per_class: 20, ..SyntheticSpec::default() };
        let corpus = generate_synthetic_corpus(&spec).unwrap();
        let (clean, noisy) = partition_clean_noisy(&corpus).unwrap();
        prop_assert_eq!(clean.len() + noisy.len(), corpus.len());
        prop_assert!(clean.instances().iter().all(|i| i.verified));
        prop_assert!(noisy.instances().iter().all(|i| !i.verified));

        let (train, val) = split_validation(&clean, per_class, seed).unwrap();
        prop_assert_eq!(train.len() + val.len(), clean.len());
        for c in 0..clean.num_classes() {
            prop_assert_eq!(val.instances().iter().filter(|i| i.label.argmax() == c).count(), per_class);
        }
        let mut ids: Vec<&str> = train.ids().into_iter().chain(val.ids()).collect();
        ids.sort_unstable();
        let mut expected = clean.ids();
        expected.sort_unstable();
        prop_assert_eq!(ids, expected);
    }

    /// Scores on a 1/64 grid keep every strictly increasing map below
    /// strictly increasing in floating point.
    #[test]
    fn ap_depends_only_on_ranks(
        grid in prop::collection::vec(prop::collection::vec(0u32..64, 3), 1..7),
        truths in prop::collection::vec(0usize..3, 7),
    ) {
        let scores: Vec<Vec<f64>> = grid.iter().map(|r| r.iter().map(|v| *v as f64 / 64.0).collect()).collect();
        let truths = &truths[..scores.len()];
        let base = micro_average_precision(&scores, truths).unwrap();
        let maps: [fn(f64) -> f64; 3] = [|x| x.exp(), |x| 3.0 * x * x * x + x, |x| (x + 0.5).ln()];
        for f in maps {
            let moved: Vec<Vec<f64>> = scores.iter().map(|r| r.iter().map(|v| f(*v)).collect()).collect();
            prop_assert_eq!(micro_average_precision(&moved, truths).unwrap(), base);
        }
        prop_assert_eq!(base, brute_force_ap(&scores, truths));
    }

    #[test]
    fn one_hot_truths_score_perfectly(truths in prop::collection::vec(0usize..5, 1..20)) {
        let preds: Vec<SoftLabel> = truths.iter().map(|t| SoftLabel::one_hot(*t, 5).unwrap()).collect();
        prop_assert_eq!(accuracy(&preds, &truths).unwrap(), 1.0);
        prop_assert_eq!(micro_average_precision(&preds, &truths).unwrap(), 1.0);
    }
}
