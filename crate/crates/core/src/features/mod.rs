//! Log-mel feature extraction and block partitioning.

mod blocks;
pub mod cache;
mod mel;
mod stft;
pub mod wav;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

pub use blocks::partition_blocks;
pub use mel::{hz_to_mel, mel_filterbank, mel_to_hz};
pub use stft::{frame_count, hann_window, stft_magnitude};

use crate::data::{LabeledCorpus, Payload};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawClip")]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
}

#[derive(Deserialize)]
struct RawClip {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl TryFrom<RawClip> for AudioClip {
    type Error = Error;

    fn try_from(raw: RawClip) -> Result<Self> {
        AudioClip::new(raw.samples, raw.sample_rate)
    }
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::param("clip", "no samples"));
        }
        if sample_rate == 0 {
            return Err(Error::param("sample_rate", "must be positive"));
        }
        if samples.iter().any(|s| !(s.abs() <= 1.0)) {
            return Err(Error::param("clip", "samples must lie in [-1, 1]"));
        }
        Ok(AudioClip {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureParams {
    pub window_length: usize,
    pub hop_length: usize,
    pub mel_bands: usize,
    pub block_length: usize,
    pub log_offset: f64,
}

impl Default for FeatureParams {
    fn default() -> Self {
        FeatureParams {
            window_length: 1024,
            hop_length: 512,
            mel_bands: 64,
            block_length: 128,
            log_offset: 1e-10,
        }
    }
}

impl FeatureParams {
    pub fn validate(&self) -> Result<()> {
        if self.hop_length == 0 || self.hop_length > self.window_length {
            return Err(Error::param(
                "hop_length",
                format!("must be in 1..={}", self.window_length),
            ));
        }
        if self.mel_bands == 0 {
            return Err(Error::param("mel_bands", "must be at least 1"));
        }
        if self.block_length == 0 {
            return Err(Error::param("block_length", "must be at least 1"));
        }
        if !(self.log_offset > 0.0) {
            return Err(Error::param("log_offset", "must be positive"));
        }
        Ok(())
    }
}

/// Natural-log mel energies, shape `frames x mel_bands`.
pub fn log_mel(clip: &AudioClip, params: &FeatureParams) -> Result<Array2<f64>> {
    params.validate()?;
    let spectrum = stft_magnitude(clip.samples(), params.window_length, params.hop_length)?;
    let bank = mel_filterbank(params.mel_bands, params.window_length, clip.sample_rate())?;
    let energies = spectrum.dot(&bank.t());
    Ok(energies.mapv(|e| (e + params.log_offset).ln()))
}

/// Log-mel blocks for one clip.
pub fn extract_blocks(clip: &AudioClip, params: &FeatureParams) -> Result<Vec<Array2<f64>>> {
    Ok(partition_blocks(&log_mel(clip, params)?, params.block_length))
}

/// Replaces every audio payload in a corpus by its log-mel blocks. Payloads
/// that already hold blocks are left alone.
pub fn extract_corpus(corpus: LabeledCorpus, params: &FeatureParams) -> Result<LabeledCorpus> {
    corpus.map_payloads(|inst| match &inst.payload {
        Payload::Audio(clip) => Ok(Payload::Blocks(extract_blocks(clip, params)?)),
        blocks @ Payload::Blocks(_) => Ok(blocks.clone()),
    })
}
