//! Test-only oracles, independent of the library code paths they check.
#![allow(dead_code)]

use ndarray::Array2;
use ood_relabel::data::SoftLabel;
use ood_relabel::nn::{Activation, Architecture, Classifier, ConvSpec, LossKind, NoiseMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;
pub const FD_REL_TOL: f64 = 1e-4;
/// Below this magnitude gradients are compared on an absolute scale.
pub const FD_FLOOR: f64 = 1e-5;

pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FD_FLOOR)
}

pub fn two_layer_arch(inputs: usize, hidden: usize, k: usize) -> Architecture {
    Architecture {
        input_rows: 1,
        input_cols: inputs,
        conv: None,
        hidden: vec![hidden],
        activation: Activation::Tanh,
        num_classes: k,
    }
}

pub fn conv_arch(rows: usize, cols: usize, k: usize) -> Architecture {
    Architecture {
        input_rows: rows,
        input_cols: cols,
        conv: Some(ConvSpec {
            filters: 3,
            kernel_rows: 2,
            kernel_cols: 3,
        }),
        hidden: vec![4],
        activation: Activation::Tanh,
        num_classes: k,
    }
}

pub fn random_batch(
    rows: usize,
    cols: usize,
    k: usize,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<Array2<f64>>, Vec<SoftLabel>) {
    let xs = (0..n)
        .map(|_| Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-1.5..1.5)))
        .collect();
    let ys = (0..n)
        .map(|_| {
            let w: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
            SoftLabel::normalized(w).unwrap()
        })
        .collect();
    (xs, ys)
}

/// Largest relative error between analytic gradients and central finite
/// differences of `Classifier::loss` over every parameter, noise-matrix
/// entry and input cell.
pub fn max_gradient_error(
    clf: &Classifier,
    xs: &[Array2<f64>],
    ys: &[SoftLabel],
    loss: &LossKind,
) -> f64 {
    let (_, grads) = clf.loss_and_gradients(xs, ys, loss).unwrap();
    let eval = |c: &Classifier, xs: &[Array2<f64>]| c.loss(xs, ys, loss).unwrap();
    let mut worst: f64 = 0.0;

    for (g, group) in clf.params().iter().enumerate() {
        for i in 0..group.len() {
            let mut plus = clf.clone();
            plus.params_mut()[g][i] += FD_STEP;
            let mut minus = clf.clone();
            minus.params_mut()[g][i] -= FD_STEP;
            let numeric = (eval(&plus, xs) - eval(&minus, xs)) / (2.0 * FD_STEP);
            worst = worst.max(rel_error(grads.params[g][i], numeric));
        }
    }

    if let Some(q) = clf.noise() {
        let k = q.num_classes();
        let analytic = grads.noise.as_ref().expect("noise gradient");
        for idx in 0..k * k {
            let shifted = |delta: f64| {
                let mut entries = q.as_slice().to_vec();
                entries[idx] += delta;
                let mut c = clf.clone();
                // Bypass the stochastic-row check: the loss is a function of
                // the raw entries.
                c.set_noise(Some(raw_noise(k, entries)));
                eval(&c, xs)
            };
            let numeric = (shifted(FD_STEP) - shifted(-FD_STEP)) / (2.0 * FD_STEP);
            worst = worst.max(rel_error(analytic[idx], numeric));
        }
    }

    for (n, x) in xs.iter().enumerate() {
        for idx in 0..x.len() {
            let (r, c) = (idx / x.ncols(), idx % x.ncols());
            let mut plus = xs.to_vec();
            plus[n][[r, c]] += FD_STEP;
            let mut minus = xs.to_vec();
            minus[n][[r, c]] -= FD_STEP;
            let numeric = (eval(clf, &plus) - eval(clf, &minus)) / (2.0 * FD_STEP);
            worst = worst.max(rel_error(grads.inputs[n][[r, c]], numeric));
        }
    }
    worst
}

fn raw_noise(k: usize, entries: Vec<f64>) -> NoiseMatrix {
    // Round-trip through serde to build a matrix without validation.
    let json = serde_json::json!({ "k": k, "entries": entries });
    serde_json::from_value(json).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Plain DFT magnitude of one Hann-windowed frame.
pub fn dft_magnitudes(frame: &[f64]) -> Vec<f64> {
    let n = frame.len();
    let window: Vec<f64> = (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect();
    (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, (x, w)) in frame.iter().zip(&window).enumerate() {
                let angle = -2.0 * std::f64::consts::PI * (k * t) as f64 / n as f64;
                re += x * w * angle.cos();
                im += x * w * angle.sin();
            }
            (re * re + im * im).sqrt()
        })
        .collect()
}

/// Micro-averaged AP by explicit enumeration of the ranked pair list: the
/// precision at every relevant rank, averaged.
pub fn brute_force_ap(scores: &[Vec<f64>], truths: &[usize]) -> f64 {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, row) in scores.iter().enumerate() {
        for (c, s) in row.iter().enumerate() {
            pairs.push((*s, i, c));
        }
    }
    // Selection sort by (score desc, instance asc, class asc).
    let mut ranked = Vec::new();
    while !pairs.is_empty() {
        let mut best = 0;
        for j in 1..pairs.len() {
            let (a, b) = (pairs[j], pairs[best]);
            if a.0 > b.0 || (a.0 == b.0 && (a.1, a.2) < (b.1, b.2)) {
                best = j;
            }
        }
        ranked.push(pairs.remove(best));
    }
    let mut hits = 0.0;
    let mut precisions = Vec::new();
    for (rank, (_, i, c)) in ranked.iter().enumerate() {
        if truths[*i] == *c {
            hits += 1.0;
            precisions.push(hits / (rank + 1) as f64);
        }
    }
    precisions.iter().sum::<f64>() / precisions.len() as f64
}
