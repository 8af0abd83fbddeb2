use serde::{Deserialize, Serialize};

use crate::data::{SoftLabel, SIMPLEX_TOLERANCE};
use crate::error::{Error, Result};

/// Row-stochastic `K x K` matrix mapping clean class probabilities into the
/// observed (noisy) label space: `noisy = Q^T clean`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseMatrix {
    k: usize,
    /// Row-major.
    entries: Vec<f64>,
}

impl NoiseMatrix {
    pub fn new(k: usize, entries: Vec<f64>) -> Result<Self> {
        if k == 0 || entries.len() != k * k {
            return Err(Error::shape(format!("{k}x{k} entries"), entries.len()));
        }
        let m = NoiseMatrix { k, entries };
        for i in 0..k {
            let row = m.row(i);
            if row.iter().any(|v| *v < 0.0 || !v.is_finite())
                || (row.iter().sum::<f64>() - 1.0).abs() > SIMPLEX_TOLERANCE
            {
                return Err(Error::param("noise matrix", format!("row {i} is not stochastic")));
            }
        }
        Ok(m)
    }

    pub fn identity(k: usize) -> Self {
        Self::smoothed_identity(k, 0.0)
    }

    /// `(1 - s) I + (s / K) 1`.
    pub fn smoothed_identity(k: usize, s: f64) -> Self {
        let off = s / k as f64;
        let entries = (0..k * k)
            .map(|idx| if idx / k == idx % k { 1.0 - s + off } else { off })
            .collect();
        NoiseMatrix { k, entries }
    }

    pub fn num_classes(&self) -> usize {
        self.k
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.k..(i + 1) * self.k]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub(crate) fn entries_mut(&mut self) -> &mut Vec<f64> {
        &mut self.entries
    }

    pub(crate) fn apply_slice(&self, probs: &[f64]) -> Vec<f64> {
        let k = self.k;
        (0..k)
            .map(|j| (0..k).map(|i| self.entries[i * k + j] * probs[i]).sum())
            .collect()
    }

    /// Clamps negative entries to zero and rescales each row to sum to one.
    /// A row with no mass left becomes uniform.
    pub fn renormalize(&mut self) {
        let k = self.k;
        for row in self.entries.chunks_mut(k) {
            for v in row.iter_mut() {
                *v = v.max(0.0);
            }
            let sum: f64 = row.iter().sum();
            if sum > 0.0 {
                row.iter_mut().for_each(|v| *v /= sum);
            } else {
                row.iter_mut().for_each(|v| *v = 1.0 / k as f64);
            }
        }
    }
}

/// Maps clean class probabilities into the noisy label space.
pub fn noise_layer_apply(probs: &SoftLabel, noise: &NoiseMatrix) -> Result<SoftLabel> {
    if probs.num_classes() != noise.k {
        return Err(Error::shape(
            format!("{} classes", noise.k),
            format!("{} classes", probs.num_classes()),
        ));
    }
    Ok(SoftLabel::from_simplex(noise.apply_slice(probs.probs())))
}
