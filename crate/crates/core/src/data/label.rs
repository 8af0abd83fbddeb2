use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on the sum of a label's entries.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// A point on the probability simplex over `K` classes.
///
/// Hard labels are the one-hot special case. Observed labels, classifier
/// predictions and pseudo-labels all share this type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SoftLabel(Vec<f64>);

impl SoftLabel {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidLabel("label has no classes".into()));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidLabel(format!("entry {p} is not a probability")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::InvalidLabel(format!("entries sum to {sum}, not 1")));
        }
        Ok(SoftLabel(probs))
    }

    /// Rescales non-negative weights onto the simplex.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) || weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(Error::InvalidLabel(
                "weights must be finite, non-negative and not all zero".into(),
            ));
        }
        Ok(SoftLabel(weights.into_iter().map(|w| w / sum).collect()))
    }

    pub fn one_hot(class: usize, num_classes: usize) -> Result<Self> {
        if class >= num_classes {
            return Err(Error::InvalidLabel(format!(
                "class index {class} out of range for {num_classes} classes"
            )));
        }
        let mut probs = vec![0.0; num_classes];
        probs[class] = 1.0;
        Ok(SoftLabel(probs))
    }

    pub fn uniform(num_classes: usize) -> Self {
        assert!(num_classes > 0, "uniform label needs at least one class");
        SoftLabel(vec![1.0 / num_classes as f64; num_classes])
    }

    /// Wraps values already known to lie on the simplex (e.g. a softmax row).
    pub(crate) fn from_simplex(probs: Vec<f64>) -> Self {
        debug_assert!(
            (probs.iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOLERANCE,
            "not on the simplex: {probs:?}"
        );
        SoftLabel(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn num_classes(&self) -> usize {
        self.0.len()
    }

    /// Index of the largest entry; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }

    pub fn max(&self) -> f64 {
        self.0[self.argmax()]
    }

    /// The class index if this label is exactly one-hot.
    pub fn hard_class(&self) -> Option<usize> {
        let class = self.argmax();
        let is_one_hot = self
            .0
            .iter()
            .enumerate()
            .all(|(i, &p)| if i == class { p == 1.0 } else { p == 0.0 });
        is_one_hot.then_some(class)
    }

    pub fn on_simplex(&self) -> bool {
        self.0.iter().all(|p| *p >= 0.0)
            && (self.0.iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOLERANCE
    }

    /// `weight * self + (1 - weight) * other`.
    pub fn mix(&self, other: &SoftLabel, weight: f64) -> Result<SoftLabel> {
        if self.num_classes() != other.num_classes() {
            return Err(Error::shape(
                format!("{} classes", self.num_classes()),
                format!("{} classes", other.num_classes()),
            ));
        }
        if !(0.0..=1.0).contains(&weight) {
            return Err(Error::param("mixing weight", format!("{weight} not in [0, 1]")));
        }
        let probs = self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| weight * a + (1.0 - weight) * b)
            .collect();
        Ok(SoftLabel(probs))
    }
}

impl AsRef<[f64]> for SoftLabel {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for SoftLabel {
    type Error = Error;

    fn try_from(probs: Vec<f64>) -> Result<Self> {
        SoftLabel::new(probs)
    }
}

impl From<SoftLabel> for Vec<f64> {
    fn from(label: SoftLabel) -> Self {
        label.0
    }
}

/// Lowest index of the maximum value.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_off_simplex() {
        assert!(SoftLabel::new(vec![0.5, 0.6]).is_err());
        assert!(SoftLabel::new(vec![1.5, -0.5]).is_err());
        assert!(SoftLabel::new(vec![]).is_err());
        assert!(SoftLabel::new(vec![0.25; 4]).is_ok());
    }

    #[test]
    fn one_hot_and_hard_class() {
        let y = SoftLabel::one_hot(2, 4).unwrap();
        assert_eq!(y.hard_class(), Some(2));
        assert_eq!(SoftLabel::uniform(4).hard_class(), None);
        assert!(SoftLabel::one_hot(4, 4).is_err());
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[0.25, 0.25, 0.25, 0.25]), 0);
        assert_eq!(argmax(&[0.1, 0.45, 0.45]), 1);
    }

    #[test]
    fn mix_is_convex() {
        let a = SoftLabel::one_hot(0, 2).unwrap();
        let b = SoftLabel::new(vec![0.5, 0.5]).unwrap();
        let m = a.mix(&b, 0.8).unwrap();
        assert!((m.probs()[0] - 0.9).abs() < 1e-15);
        assert!((m.probs()[1] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn serde_validates() {
        let parsed: std::result::Result<SoftLabel, _> = serde_json::from_str("[0.2, 0.2]");
        assert!(parsed.is_err());
        let ok: SoftLabel = serde_json::from_str("[0.25, 0.75]").unwrap();
        assert_eq!(ok.argmax(), 1);
    }
}
