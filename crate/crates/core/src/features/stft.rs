use std::f64::consts::PI;

use ndarray::Array2;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Periodic Hann window of length `n`.
pub fn hann_window(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Number of frames produced for `len` samples; clips shorter than one
/// window are zero-padded to a single window.
pub fn frame_count(len: usize, window_length: usize, hop_length: usize) -> usize {
    1 + len.max(window_length).saturating_sub(window_length) / hop_length
}

/// Hann-windowed STFT magnitudes, shape `frames x (window_length / 2 + 1)`.
pub fn stft_magnitude(
    samples: &[f64],
    window_length: usize,
    hop_length: usize,
) -> Result<Array2<f64>> {
    if samples.is_empty() {
        return Err(Error::param("clip", "no samples"));
    }
    if window_length == 0 || hop_length == 0 {
        return Err(Error::param("window", "window and hop lengths must be positive"));
    }
    if hop_length > window_length {
        return Err(Error::param(
            "hop_length",
            format!("{hop_length} exceeds window length {window_length}"),
        ));
    }

    let frames = frame_count(samples.len(), window_length, hop_length);
    let bins = window_length / 2 + 1;
    let window = hann_window(window_length);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(window_length);
    let mut buffer = vec![Complex::new(0.0, 0.0); window_length];
    let mut out = Array2::zeros((frames, bins));

    for frame in 0..frames {
        let start = frame * hop_length;
        for (i, slot) in buffer.iter_mut().enumerate() {
            let s = samples.get(start + i).copied().unwrap_or(0.0);
            *slot = Complex::new(s * window[i], 0.0);
        }
        fft.process(&mut buffer);
        for (bin, value) in buffer.iter().take(bins).enumerate() {
            out[[frame, bin]] = value.norm();
        }
    }
    Ok(out)
}
