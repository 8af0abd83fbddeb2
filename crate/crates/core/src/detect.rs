//! Confidence scoring and detection of high- and low-confidence mismatches.
//!
//! An instance is flagged for relabelling when the auxiliary classifier
//! disagrees with its observed label *and* is confident (`c(x) > theta`).
//! Disagreement at low confidence (`c(x) < tau`) marks a candidate for
//! discarding.

use std::path::Path;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{LabeledCorpus, SoftLabel};
use crate::error::{Error, Result};
use crate::nn::{mean_labels, softmax, Classifier};

/// Temperature scaling plus one signed-gradient input step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OdinParams {
    pub temperature: f64,
    pub perturbation_magnitude: f64,
    pub enabled: bool,
}

impl Default for OdinParams {
    fn default() -> Self {
        OdinParams {
            temperature: 1000.0,
            perturbation_magnitude: 0.002,
            enabled: true,
        }
    }
}

impl OdinParams {
    pub fn disabled() -> Self {
        OdinParams {
            enabled: false,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::param("odin.temperature", "must be positive"));
        }
        if !(self.perturbation_magnitude >= 0.0 && self.perturbation_magnitude.is_finite()) {
            return Err(Error::param("odin.perturbation_magnitude", "must be non-negative"));
        }
        Ok(())
    }
}

/// Probabilities of one block after optional ODIN pre-processing.
fn block_probs(classifier: &Classifier, x: &Array2<f64>, odin: &OdinParams) -> Result<SoftLabel> {
    if !odin.enabled {
        return softmax(&classifier.logits(x)?, 1.0);
    }
    let t = odin.temperature;
    let scaled = softmax(&classifier.logits(x)?, t)?;
    let top = scaled.argmax();
    // d/dz of -log softmax(z / T)[top]
    let dlogits: Vec<f64> = scaled
        .probs()
        .iter()
        .enumerate()
        .map(|(i, p)| (p - if i == top { 1.0 } else { 0.0 }) / t)
        .collect();
    let (_, dx) = classifier.backward_from_logits(x, &dlogits)?;
    let eps = odin.perturbation_magnitude;
    let perturbed = x - &dx.mapv(|g| eps * sign(g));
    softmax(&classifier.logits(&perturbed)?, t)
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Clip-level probabilities used for scoring: the mean of the per-block
/// (optionally ODIN-processed) softmax outputs.
pub fn scored_probs(
    classifier: &Classifier,
    blocks: &[Array2<f64>],
    odin: &OdinParams,
) -> Result<SoftLabel> {
    odin.validate()?;
    let per_block = blocks
        .iter()
        .map(|b| block_probs(classifier, b, odin))
        .collect::<Result<Vec<_>>>()?;
    mean_labels(&per_block)
}

/// `(c(x), f_A(x))`: top probability and its class, read from the same
/// (possibly perturbed and temperature-scaled) output.
pub fn confidence(
    classifier: &Classifier,
    blocks: &[Array2<f64>],
    odin: &OdinParams,
) -> Result<(f64, usize)> {
    let probs = scored_probs(classifier, blocks, odin)?;
    Ok((probs.max(), probs.argmax()))
}

/// Confidence and prediction for one instance, before thresholds apply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub instance_id: String,
    pub confidence: f64,
    pub predicted: usize,
    pub observed: usize,
}

impl Score {
    pub fn mismatch(&self) -> bool {
        self.predicted != self.observed
    }
}

/// Scores every instance; output order follows the corpus.
pub fn score_corpus(
    classifier: &Classifier,
    corpus: &LabeledCorpus,
    odin: &OdinParams,
) -> Result<Vec<Score>> {
    corpus
        .instances()
        .par_iter()
        .map(|inst| {
            let (confidence, predicted) = confidence(classifier, inst.blocks()?, odin)?;
            Ok(Score {
                instance_id: inst.id.clone(),
                confidence,
                predicted,
                observed: inst.label.argmax(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionOutcome {
    pub instance_id: String,
    pub confidence: f64,
    pub predicted_class: usize,
    pub observed_class: usize,
    pub mismatch: bool,
    pub in_s_theta: bool,
    pub in_s_tau: bool,
}

fn check_thresholds(theta: f64, tau: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&theta) || !(0.0..=1.0).contains(&tau) {
        return Err(Error::param("thresholds", format!("theta={theta}, tau={tau} must lie in [0, 1]")));
    }
    if tau > theta {
        return Err(Error::param("thresholds", format!("tau={tau} exceeds theta={theta}")));
    }
    Ok(())
}

/// Applies both detection rules to precomputed scores.
pub fn apply_thresholds(scores: &[Score], theta: f64, tau: f64) -> Result<Vec<DetectionOutcome>> {
    check_thresholds(theta, tau)?;
    Ok(scores
        .iter()
        .map(|s| {
            let mismatch = s.mismatch();
            DetectionOutcome {
                instance_id: s.instance_id.clone(),
                confidence: s.confidence,
                predicted_class: s.predicted,
                observed_class: s.observed,
                mismatch,
                in_s_theta: mismatch && s.confidence > theta,
                in_s_tau: mismatch && s.confidence < tau,
            }
        })
        .collect())
}

pub fn detect_sets(
    classifier: &Classifier,
    noisy: &LabeledCorpus,
    theta: f64,
    tau: f64,
    odin: &OdinParams,
) -> Result<Vec<DetectionOutcome>> {
    check_thresholds(theta, tau)?;
    apply_thresholds(&score_corpus(classifier, noisy, odin)?, theta, tau)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdSide {
    /// `theta`: detections are `c(x) > theta`.
    Upper,
    /// `tau`: detections are `c(x) < tau`.
    Lower,
}

/// Candidate thresholds: every distinct confidence and every midpoint
/// between consecutive distinct confidences, ascending.
pub fn threshold_candidates(confidences: &[f64]) -> Vec<f64> {
    let mut sorted = confidences.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut out = Vec::with_capacity(sorted.len() * 2);
    for (i, c) in sorted.iter().enumerate() {
        if i > 0 {
            out.push((sorted[i - 1] + c) / 2.0);
        }
        out.push(*c);
    }
    out
}

/// Threshold sweep on scores of an all-in-distribution validation set.
///
/// For `Upper`, the smallest candidate whose mismatch detections
/// (`c > theta`) make up less than `max_detect_fraction` of the set; for
/// `Lower`, the largest candidate with the same property for `c < tau`.
pub fn calibrate_from_scores(
    scores: &[Score],
    side: ThresholdSide,
    max_detect_fraction: f64,
) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::param("validation", "empty validation set"));
    }
    if !(max_detect_fraction > 0.0 && max_detect_fraction <= 1.0) {
        return Err(Error::param(
            "max_detect_fraction",
            format!("{max_detect_fraction} not in (0, 1]"),
        ));
    }
    let n = scores.len() as f64;
    let confidences: Vec<f64> = scores.iter().map(|s| s.confidence).collect();
    let candidates = threshold_candidates(&confidences);
    let fraction = |threshold: f64| {
        scores
            .iter()
            .filter(|s| {
                s.mismatch()
                    && match side {
                        ThresholdSide::Upper => s.confidence > threshold,
                        ThresholdSide::Lower => s.confidence < threshold,
                    }
            })
            .count() as f64
            / n
    };
    let found = match side {
        ThresholdSide::Upper => candidates.iter().copied().find(|t| fraction(*t) < max_detect_fraction),
        ThresholdSide::Lower => candidates
            .iter()
            .rev()
            .copied()
            .find(|t| fraction(*t) < max_detect_fraction),
    };
    // The extreme candidates always detect nothing, so a threshold exists.
    Ok(found.expect("extreme candidate satisfies the bound"))
}

pub fn calibrate_threshold(
    classifier: &Classifier,
    validation: &LabeledCorpus,
    side: ThresholdSide,
    max_detect_fraction: f64,
    odin: &OdinParams,
) -> Result<f64> {
    if validation.is_empty() {
        return Err(Error::param("validation", "empty validation set"));
    }
    calibrate_from_scores(&score_corpus(classifier, validation, odin)?, side, max_detect_fraction)
}

/// Fraction of `scores` detected on `side` of `threshold` with a mismatch.
pub fn detected_fraction(scores: &[Score], side: ThresholdSide, threshold: f64) -> f64 {
    let hits = scores
        .iter()
        .filter(|s| {
            s.mismatch()
                && match side {
                    ThresholdSide::Upper => s.confidence > threshold,
                    ThresholdSide::Lower => s.confidence < threshold,
                }
        })
        .count();
    hits as f64 / scores.len().max(1) as f64
}

#[derive(Debug, Serialize, Deserialize)]
struct ReportRow {
    instance_id: String,
    confidence: f64,
    predicted: usize,
    observed: usize,
    mismatch: u8,
    #[serde(rename = "in_S_theta")]
    in_s_theta: u8,
    #[serde(rename = "in_S_tau")]
    in_s_tau: u8,
}

fn flag(v: u8) -> Result<bool> {
    match v {
        0 => Ok(false),
        1 => Ok(true),
        other => Err(Error::Format(format!("detection report flag must be 0 or 1, got {other}"))),
    }
}

/// CSV `instance_id,confidence,predicted,observed,mismatch,in_S_theta,in_S_tau`.
pub fn write_detection_report(path: &Path, outcomes: &[DetectionOutcome]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for o in outcomes {
        writer.serialize(ReportRow {
            instance_id: o.instance_id.clone(),
            confidence: o.confidence,
            predicted: o.predicted_class,
            observed: o.observed_class,
            mismatch: o.mismatch as u8,
            in_s_theta: o.in_s_theta as u8,
            in_s_tau: o.in_s_tau as u8,
        })?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

pub fn read_detection_report(path: &Path) -> Result<Vec<DetectionOutcome>> {
    let mut reader = csv::Reader::from_path(path)?;
    reader
        .deserialize::<ReportRow>()
        .map(|row| {
            let row = row?;
            Ok(DetectionOutcome {
                instance_id: row.instance_id,
                confidence: row.confidence,
                predicted_class: row.predicted,
                observed_class: row.observed,
                mismatch: flag(row.mismatch)?,
                in_s_theta: flag(row.in_s_theta)?,
                in_s_tau: flag(row.in_s_tau)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn score(id: &str, c: f64, predicted: usize, observed: usize) -> Score {
        Score {
            instance_id: id.into(),
            confidence: c,
            predicted,
            observed,
        }
    }

    #[test]
    fn confident_mismatch_is_relabel_candidate() {
        let out = apply_thresholds(&[score("a", 0.9, 1, 0)], 0.55, 0.4).unwrap();
        assert!(out[0].in_s_theta && !out[0].in_s_tau);
    }

    #[test]
    fn agreement_is_never_detected() {
        let out = apply_thresholds(&[score("a", 0.9, 1, 1), score("b", 0.1, 0, 0)], 0.55, 0.4)
            .unwrap();
        assert!(out.iter().all(|o| !o.in_s_theta && !o.in_s_tau));
    }

    #[test]
    fn band_between_thresholds_is_neither() {
        let out = apply_thresholds(
            &[score("a", 0.4, 1, 0), score("b", 0.5, 1, 0), score("c", 0.55, 1, 0), score("d", 0.39, 1, 0)],
            0.55,
            0.4,
        )
        .unwrap();
        let flags: Vec<_> = out.iter().map(|o| (o.in_s_theta, o.in_s_tau)).collect();
        assert_eq!(flags, [(false, false), (false, false), (false, false), (false, true)]);
    }

    #[test]
    fn tau_above_theta_rejected() {
        assert!(apply_thresholds(&[], 0.4, 0.55).is_err());
    }

    fn twenty_with_mismatches_at(conf: &[f64]) -> Vec<Score> {
        let mut scores: Vec<Score> = conf
            .iter()
            .enumerate()
            .map(|(i, c)| score(&format!("m{i}"), *c, 1, 0))
            .collect();
        for i in scores.len()..20 {
            scores.push(score(&format!("ok{i}"), 0.2 + 0.04 * i as f64, 0, 0));
        }
        scores
    }

    /// Every threshold in a fine grid, checked by direct counting.
    fn sweep_oracle(scores: &[Score], frac: f64) -> f64 {
        let mut best = f64::INFINITY;
        let mut grid: Vec<f64> = scores.iter().map(|s| s.confidence).collect();
        for a in scores {
            for b in scores {
                grid.push((a.confidence + b.confidence) / 2.0);
            }
        }
        for t in grid {
            let n = scores.iter().filter(|s| s.predicted != s.observed && s.confidence > t).count();
            if (n as f64) < frac * scores.len() as f64 && t < best {
                best = t;
            }
        }
        best
    }

    #[test]
    fn calibration_on_twenty_points() {
        let scores = twenty_with_mismatches_at(&[0.3, 0.6]);
        let theta = calibrate_from_scores(&scores, ThresholdSide::Upper, 0.05).unwrap();
        assert_eq!(theta, 0.6);
        assert_eq!(theta, sweep_oracle(&scores, 0.05));
        assert!(detected_fraction(&scores, ThresholdSide::Upper, theta) < 0.05);
    }

    #[test]
    fn no_mismatches_allows_minimum() {
        let scores = twenty_with_mismatches_at(&[]);
        let theta = calibrate_from_scores(&scores, ThresholdSide::Upper, 0.05).unwrap();
        let min = scores.iter().map(|s| s.confidence).fold(f64::MAX, f64::min);
        assert_eq!(theta, min);
    }

    #[test]
    fn fraction_one_gives_minimum_candidate() {
        let scores = twenty_with_mismatches_at(&[0.3, 0.6, 0.95]);
        let theta = calibrate_from_scores(&scores, ThresholdSide::Upper, 1.0).unwrap();
        let min = scores.iter().map(|s| s.confidence).fold(f64::MAX, f64::min);
        assert_eq!(theta, min);
        let tau = calibrate_from_scores(&scores, ThresholdSide::Lower, 1.0).unwrap();
        let max = scores.iter().map(|s| s.confidence).fold(f64::MIN, f64::max);
        assert_eq!(tau, max);
    }

    #[test]
    fn lower_side_calibration() {
        let scores = twenty_with_mismatches_at(&[0.1, 0.15, 0.9]);
        let tau = calibrate_from_scores(&scores, ThresholdSide::Lower, 0.1).unwrap();
        // 0.15 would detect only 0.1 (1/20 < 0.1); anything higher catches both.
        assert!(detected_fraction(&scores, ThresholdSide::Lower, tau) < 0.1);
        let next = threshold_candidates(&scores.iter().map(|s| s.confidence).collect::<Vec<_>>())
            .into_iter()
            .find(|c| *c > tau)
            .unwrap();
        assert!(detected_fraction(&scores, ThresholdSide::Lower, next) >= 0.1);
    }

    #[test]
    fn empty_validation_rejected() {
        assert!(calibrate_from_scores(&[], ThresholdSide::Upper, 0.05).is_err());
    }

    #[test]
    fn report_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("det.csv");
        let outcomes = apply_thresholds(
            &[score("a", 0.123456789012345, 2, 0), score("b", 0.9, 1, 1), score("c", 0.01, 0, 1)],
            0.55,
            0.4,
        )
        .unwrap();
        write_detection_report(&path, &outcomes).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("instance_id,confidence,predicted,observed,mismatch,in_S_theta,in_S_tau\n"));
        assert_eq!(read_detection_report(&path).unwrap(), outcomes);
    }
}
