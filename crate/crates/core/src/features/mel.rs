use ndarray::Array2;

use crate::error::{Error, Result};

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular mel filters, shape `mel_bands x (fft_size / 2 + 1)`.
///
/// Centres are equally spaced on the mel scale between 0 Hz and Nyquist and
/// each filter peaks at 1. Fails if any filter falls between FFT bins.
pub fn mel_filterbank(mel_bands: usize, fft_size: usize, sample_rate: u32) -> Result<Array2<f64>> {
    if mel_bands == 0 {
        return Err(Error::param("mel_bands", "must be at least 1"));
    }
    if fft_size < 2 || sample_rate == 0 {
        return Err(Error::param("fft_size", "fft size and sample rate must be positive"));
    }
    let bins = fft_size / 2 + 1;
    let nyquist = sample_rate as f64 / 2.0;
    let max_mel = hz_to_mel(nyquist);
    let edges: Vec<f64> = (0..mel_bands + 2)
        .map(|i| mel_to_hz(max_mel * i as f64 / (mel_bands + 1) as f64))
        .collect();
    let bin_hz: Vec<f64> = (0..bins)
        .map(|k| k as f64 * sample_rate as f64 / fft_size as f64)
        .collect();

    let mut bank = Array2::zeros((mel_bands, bins));
    for band in 0..mel_bands {
        let (lo, centre, hi) = (edges[band], edges[band + 1], edges[band + 2]);
        for (k, f) in bin_hz.iter().enumerate() {
            let rising = (f - lo) / (centre - lo);
            let falling = (hi - f) / (hi - centre);
            bank[[band, k]] = rising.min(falling).max(0.0);
        }
        if bank.row(band).iter().all(|w| *w <= 0.0) {
            return Err(Error::param(
                "mel_bands",
                format!(
                    "{mel_bands} bands cannot be resolved with a {fft_size}-point FFT at {sample_rate} Hz \
                     (band {band} covers no FFT bin)"
                ),
            ));
        }
    }
    Ok(bank)
}
