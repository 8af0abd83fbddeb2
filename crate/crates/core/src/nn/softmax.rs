use ndarray::Array2;

use crate::data::SoftLabel;
use crate::error::{Error, Result};

pub(crate) fn softmax_vec(logits: &[f64], temperature: f64) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits
        .iter()
        .map(|z| ((z - max) / temperature).exp())
        .collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn check_temperature(temperature: f64) -> Result<()> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::param(
            "temperature",
            format!("{temperature} is not a positive real"),
        ));
    }
    Ok(())
}

/// Temperature-scaled softmax of one logit vector.
pub fn softmax(logits: &[f64], temperature: f64) -> Result<SoftLabel> {
    check_temperature(temperature)?;
    if logits.is_empty() {
        return Err(Error::param("logits", "must not be empty"));
    }
    Ok(SoftLabel::from_simplex(softmax_vec(logits, temperature)))
}

/// Row-wise temperature-scaled softmax of a `batch x K` logit matrix.
pub fn softmax_rows(logits: &Array2<f64>, temperature: f64) -> Result<Vec<SoftLabel>> {
    logits
        .rows()
        .into_iter()
        .map(|row| softmax(&row.to_vec(), temperature))
        .collect()
}

/// Entry-wise mean of labels over the same classes.
pub fn mean_labels(labels: &[SoftLabel]) -> Result<SoftLabel> {
    let first = labels
        .first()
        .ok_or_else(|| Error::param("labels", "need at least one label"))?;
    let k = first.num_classes();
    let mut acc = vec![0.0; k];
    for label in labels {
        if label.num_classes() != k {
            return Err(Error::shape(k, label.num_classes()));
        }
        for (a, p) in acc.iter_mut().zip(label.probs()) {
            *a += p;
        }
    }
    let n = labels.len() as f64;
    Ok(SoftLabel::from_simplex(acc.into_iter().map(|a| a / n).collect()))
}
