//! Mixup and time/frequency masking.

use ndarray::{s, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::data::SoftLabel;
use crate::error::{Error, Result};

/// `(alpha * x1 + (1 - alpha) * x2, alpha * y1 + (1 - alpha) * y2)`.
pub fn mix_pair(
    x1: &Array2<f64>,
    y1: &SoftLabel,
    x2: &Array2<f64>,
    y2: &SoftLabel,
    alpha: f64,
) -> Result<(Array2<f64>, SoftLabel)> {
    if x1.dim() != x2.dim() {
        return Err(Error::shape(format!("{:?}", x1.dim()), format!("{:?}", x2.dim())));
    }
    let x = x1 * alpha + x2 * (1.0 - alpha);
    Ok((x, y1.mix(y2, alpha)?))
}

/// Mixes every instance with a partner chosen by a seeded permutation, with
/// a fresh `Beta(alpha_param, alpha_param)` weight per pair. Batches of
/// fewer than two instances come back unchanged.
pub fn mixup(
    inputs: &[Array2<f64>],
    labels: &[SoftLabel],
    alpha_param: f64,
    seed: u64,
) -> Result<(Vec<Array2<f64>>, Vec<SoftLabel>)> {
    if inputs.len() != labels.len() {
        return Err(Error::shape(inputs.len(), labels.len()));
    }
    if inputs.len() < 2 {
        return Ok((inputs.to_vec(), labels.to_vec()));
    }
    let beta = Beta::new(alpha_param, alpha_param)
        .map_err(|e| Error::param("mixup_alpha", e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut partner: Vec<usize> = (0..inputs.len()).collect();
    partner.shuffle(&mut rng);

    let mut xs = Vec::with_capacity(inputs.len());
    let mut ys = Vec::with_capacity(inputs.len());
    for (i, &j) in partner.iter().enumerate() {
        let alpha: f64 = beta.sample(&mut rng);
        let (x, y) = mix_pair(&inputs[i], &labels[i], &inputs[j], &labels[j], alpha)?;
        xs.push(x);
        ys.push(y);
    }
    Ok((xs, ys))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaskParams {
    pub max_time_width: usize,
    pub max_freq_width: usize,
    pub num_masks: usize,
}

impl Default for MaskParams {
    fn default() -> Self {
        MaskParams {
            max_time_width: 16,
            max_freq_width: 8,
            num_masks: 2,
        }
    }
}

/// Zeroes `num_masks` random frame ranges and `num_masks` random band
/// ranges. Widths are uniform in `0..=max` (capped at the matrix size).
pub fn mask_augment(
    features: &Array2<f64>,
    max_time_width: usize,
    max_freq_width: usize,
    num_masks: usize,
    seed: u64,
) -> Array2<f64> {
    let mut out = features.clone();
    let (frames, bands) = features.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..num_masks {
        let width = rng.gen_range(0..=max_time_width.min(frames));
        let start = rng.gen_range(0..=frames - width);
        out.slice_mut(s![start..start + width, ..]).fill(0.0);

        let width = rng.gen_range(0..=max_freq_width.min(bands));
        let start = rng.gen_range(0..=bands - width);
        out.slice_mut(s![.., start..start + width]).fill(0.0);
    }
    out
}
