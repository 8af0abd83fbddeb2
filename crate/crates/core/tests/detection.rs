mod common;

use common::*;
use ndarray::Array2;
use ood_relabel::data::{generate_synthetic_corpus, partition_clean_noisy, LabeledCorpus, SyntheticSpec};
use ood_relabel::detect::{
    apply_thresholds, calibrate_threshold, confidence, detect_sets, score_corpus, OdinParams, Score,
    ThresholdSide,
};
use ood_relabel::nn::{train, Classifier, TrainConfig};
use rand::Rng;

fn trained_aux(seed: u64) -> (Classifier, LabeledCorpus, LabeledCorpus) {
    let corpus = generate_synthetic_corpus(&SyntheticSpec {
        seed,
        ..SyntheticSpec::default()
    })
    .unwrap();
    let (clean, noisy) = partition_clean_noisy(&corpus).unwrap();
    let mut clf = Classifier::new(two_layer_arch(2, 16, 4), seed).unwrap();
    let cfg = TrainConfig {
        epochs: 30,
        batch_size: 16,
        learning_rate: 0.01,
        seed,
        ..TrainConfig::default()
    };
    train(&mut clf, &clean, &cfg).unwrap();
    (clf, clean, noisy)
}

/// Mean over blocks of exp(z)/sum(exp(z)), computed without the library.
fn plain_softmax_clip(clf: &Classifier, blocks: &[Array2<f64>]) -> Vec<f64> {
    let k = clf.num_classes();
    let mut mean = vec![0.0; k];
    for b in blocks {
        let z = clf.logits(b).unwrap();
        let m = z.iter().cloned().fold(f64::MIN, f64::max);
        let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
        let s: f64 = e.iter().sum();
        for (acc, v) in mean.iter_mut().zip(e) {
            *acc += v / s / blocks.len() as f64;
        }
    }
    mean
}

#[test]
fn disabled_odin_is_plain_max_softmax() {
    let (clf, _, noisy) = trained_aux(1);
    for inst in noisy.instances() {
        let (c, pred) = confidence(&clf, inst.blocks().unwrap(), &OdinParams::disabled()).unwrap();
        let oracle = plain_softmax_clip(&clf, inst.blocks().unwrap());
        let best = ood_relabel::data::argmax(&oracle);
        assert_eq!(pred, best);
        assert!((c - oracle[best]).abs() < 1e-12);
    }
}

#[test]
fn unit_temperature_without_perturbation_is_exact_max_softmax() {
    let (clf, _, noisy) = trained_aux(2);
    let odin = OdinParams {
        temperature: 1.0,
        perturbation_magnitude: 0.0,
        enabled: true,
    };
    let a = score_corpus(&clf, &noisy, &odin).unwrap();
    let b = score_corpus(&clf, &noisy, &OdinParams::disabled()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn uniform_logits_give_one_over_k() {
    let clf = Classifier::zeros(two_layer_arch(2, 3, 5)).unwrap();
    let x = Array2::from_shape_vec((1, 2), vec![0.3, -0.7]).unwrap();
    for odin in [OdinParams::default(), OdinParams::disabled()] {
        let (c, pred) = confidence(&clf, std::slice::from_ref(&x), &odin).unwrap();
        assert_eq!((c, pred), (0.2, 0));
    }
}

#[test]
fn perturbation_does_not_lower_confidence() {
    for seed in 0..3 {
        let (clf, clean, _) = trained_aux(10 + seed);
        for temperature in [1.0, 1000.0] {
            let with = OdinParams {
                temperature,
                perturbation_magnitude: 0.002,
                enabled: true,
            };
            let without = OdinParams {
                perturbation_magnitude: 0.0,
                ..with
            };
            for inst in clean.instances() {
                let (c1, _) = confidence(&clf, inst.blocks().unwrap(), &with).unwrap();
                let (c0, _) = confidence(&clf, inst.blocks().unwrap(), &without).unwrap();
                assert!(c1 >= c0 - 1e-6, "{}: {c1} < {c0}", inst.id);
            }
        }
    }
}

fn random_scores(n: usize, k: usize, seed: u64) -> Vec<Score> {
    let mut r = rng(seed);
    (0..n)
        .map(|i| Score {
            instance_id: format!("x{i}"),
            confidence: r.gen_range(1.0 / k as f64..1.0),
            predicted: r.gen_range(0..k),
            observed: r.gen_range(0..k),
        })
        .collect()
}

#[test]
fn sets_shrink_monotonically() {
    let scores = random_scores(200, 4, 40);
    let grid: Vec<f64> = (0..=40).map(|i| i as f64 / 40.0).collect();
    let members = |theta: f64, tau: f64| {
        let out = apply_thresholds(&scores, theta, tau).unwrap();
        let theta_set: Vec<bool> = out.iter().map(|o| o.in_s_theta).collect();
        let tau_set: Vec<bool> = out.iter().map(|o| o.in_s_tau).collect();
        for o in &out {
            assert!(!(o.in_s_theta && o.in_s_tau));
        }
        (theta_set, tau_set)
    };
    for w in grid.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let (theta_lo, _) = members(lo, 0.0);
        let (theta_hi, _) = members(hi, 0.0);
        assert!(theta_hi.iter().zip(&theta_lo).all(|(h, l)| !h || *l), "theta {lo} -> {hi}");
        let (_, tau_lo) = members(1.0, lo);
        let (_, tau_hi) = members(1.0, hi);
        assert!(tau_lo.iter().zip(&tau_hi).all(|(l, h)| !l || *h), "tau {hi} -> {lo}");
    }
}

#[test]
fn detection_enriches_for_ood() {
    let odin = OdinParams {
        temperature: 1.0,
        ..OdinParams::default()
    };
    let (mut ood_detected, mut detected, mut ood_total, mut total) = (0, 0, 0, 0);
    for seed in 0..5 {
        let (clf, _, noisy) = trained_aux(100 + seed);
        let out = detect_sets(&clf, &noisy, 0.55, 0.4, &odin).unwrap();
        for (o, inst) in out.iter().zip(noisy.instances()) {
            assert_eq!(o.instance_id, inst.id);
            total += 1;
            ood_total += inst.is_ood() as usize;
            if o.in_s_theta {
                detected += 1;
                ood_detected += inst.is_ood() as usize;
            }
        }
    }
    let enriched = ood_detected as f64 / detected as f64;
    let base = ood_total as f64 / total as f64;
    println!("OOD share: S_theta {enriched:.3} ({detected} detected), noisy set {base:.3}");
    assert!(detected > 0 && enriched > base);
}

#[test]
fn calibrated_threshold_respects_fraction() {
    let (clf, _, _) = trained_aux(7);
    let validation = generate_synthetic_corpus(&SyntheticSpec {
        ood_fraction: 0.0,
        verified_fraction: 1.0,
        points_per_class: 75,
        seed: 77,
        ..SyntheticSpec::default()
    })
    .unwrap();
    let odin = OdinParams::disabled();
    let scores = score_corpus(&clf, &validation, &odin).unwrap();
    for frac in [0.01, 0.05, 0.2] {
        let theta = calibrate_threshold(&clf, &validation, ThresholdSide::Upper, frac, &odin).unwrap();
        let hits = scores.iter().filter(|s| s.mismatch() && s.confidence > theta).count();
        assert!((hits as f64) < frac * scores.len() as f64);
        let tau = calibrate_threshold(&clf, &validation, ThresholdSide::Lower, frac, &odin).unwrap();
        let hits = scores.iter().filter(|s| s.mismatch() && s.confidence < tau).count();
        assert!((hits as f64) < frac * scores.len() as f64);
    }
}

#[test]
fn tau_above_theta_is_an_error() {
    let (clf, _, noisy) = trained_aux(8);
    assert!(detect_sets(&clf, &noisy, 0.4, 0.55, &OdinParams::disabled()).is_err());
}
