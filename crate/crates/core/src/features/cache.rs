//! On-disk log-mel cache keyed by the SHA-256 of the WAV bytes and the
//! feature parameters.
//!
//! File layout (little-endian): `b"LMEL"`, `u32` format version, `u64`
//! frames, `u64` bands, then `frames * bands` `f64` values in row-major order.

use std::path::{Path, PathBuf};

use ndarray::Array2;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::{log_mel, wav, FeatureParams};

const MAGIC: &[u8; 4] = b"LMEL";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 8;

pub fn cache_key(wav_bytes: &[u8], params: &FeatureParams) -> String {
    let mut hasher = Sha256::new();
    hasher.update(wav_bytes);
    hasher.update(serde_json::to_vec(params).expect("params serialize"));
    hex::encode(hasher.finalize())
}

pub fn encode(features: &Array2<f64>) -> Vec<u8> {
    let (frames, bands) = features.dim();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * frames * bands);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(frames as u64).to_le_bytes());
    out.extend_from_slice(&(bands as u64).to_le_bytes());
    for v in features.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<Array2<f64>> {
    let bad = |msg: &str| Error::Format(format!("feature cache: {msg}"));
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(bad("missing LMEL header"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let frames = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let bands = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    let body = &bytes[HEADER_LEN..];
    if body.len() != frames * bands * 8 {
        return Err(bad("truncated body"));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Array2::from_shape_vec((frames, bands), values).map_err(|e| bad(&e.to_string()))
}

pub fn cache_path(cache_dir: &Path, key: &str) -> PathBuf {
    cache_dir.join(format!("{key}.lmel"))
}

/// Log-mels for a WAV file, read from `cache_dir` when present and written
/// there otherwise. Returns the features and whether the cache was hit.
pub fn cached_log_mel(
    wav_path: &Path,
    params: &FeatureParams,
    cache_dir: &Path,
) -> Result<(Array2<f64>, bool)> {
    let bytes = std::fs::read(wav_path).map_err(|e| Error::io(wav_path, e))?;
    let path = cache_path(cache_dir, &cache_key(&bytes, params));
    if path.is_file() {
        let cached = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        return Ok((decode(&cached)?, true));
    }
    let features = log_mel(&wav::read_wav(wav_path)?, params)?;
    std::fs::create_dir_all(cache_dir).map_err(|e| Error::io(cache_dir, e))?;
    std::fs::write(&path, encode(&features)).map_err(|e| Error::io(&path, e))?;
    Ok((features, false))
}
