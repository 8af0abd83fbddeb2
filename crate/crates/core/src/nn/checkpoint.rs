//! JSON model checkpoints. Floats are written in shortest round-trip form
//! and parsed exactly, so a save/load cycle is bit-exact.

use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::model::{Architecture, Classifier};
use crate::nn::noise::NoiseMatrix;

pub const FORMAT_VERSION: u32 = 1;

/// Position of a ChaCha8 stream, restorable exactly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: String,
    pub stream: u64,
    /// `u128` word position, as a decimal string.
    pub word_pos: String,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        RngState {
            seed: hex::encode(rng.get_seed()),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos().to_string(),
        }
    }

    pub fn restore(&self) -> Result<ChaCha8Rng> {
        use rand::SeedableRng;
        let bad = |m: String| Error::Format(format!("rng state: {m}"));
        let seed: [u8; 32] = hex::decode(&self.seed)
            .map_err(|e| bad(e.to_string()))?
            .try_into()
            .map_err(|_| bad("seed must be 32 bytes".into()))?;
        let word_pos: u128 = self.word_pos.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?;
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(word_pos);
        Ok(rng)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub architecture: Architecture,
    pub params: Vec<Vec<f64>>,
    pub noise: Option<NoiseMatrix>,
    pub rng: Option<RngState>,
}

impl Checkpoint {
    pub fn new(classifier: &Classifier, rng: Option<RngState>) -> Self {
        Checkpoint {
            format_version: FORMAT_VERSION,
            architecture: classifier.architecture().clone(),
            params: classifier.params().to_vec(),
            noise: classifier.noise().cloned(),
            rng,
        }
    }

    pub fn classifier(&self) -> Result<Classifier> {
        Classifier::from_parts(self.architecture.clone(), self.params.clone(), self.noise.clone())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        Ok(serde_json::to_vec(self)?)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_slice(bytes)?;
        if ckpt.format_version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "checkpoint format version {} is not supported (expected {FORMAT_VERSION})",
                ckpt.format_version
            )));
        }
        ckpt.classifier()?;
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
