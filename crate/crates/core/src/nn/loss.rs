//! Soft-target losses evaluated on a predicted class distribution.

use serde::{Deserialize, Serialize};

use crate::data::SoftLabel;
use crate::error::{Error, Result};

/// Added inside every logarithm.
pub const EPS_LOG: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossKind {
    CrossEntropy,
    /// `(1 - p_y^q) / q` on the target's top class.
    Lq { q: f64 },
    /// Cross-entropy against `beta * target + (1 - beta) * prediction`,
    /// differentiated through the prediction.
    Bootstrap { beta: f64 },
}

impl LossKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LossKind::CrossEntropy => Ok(()),
            LossKind::Lq { q } => check_q(q),
            LossKind::Bootstrap { beta } => check_unit("bootstrap_beta", beta),
        }
    }

    /// Loss value and its gradient with respect to `dist`.
    pub(crate) fn value_and_grad(&self, dist: &[f64], target: &SoftLabel) -> (f64, Vec<f64>) {
        let t = target.probs();
        match *self {
            LossKind::CrossEntropy => {
                let value = -t
                    .iter()
                    .zip(dist)
                    .map(|(ti, pi)| ti * (pi + EPS_LOG).ln())
                    .sum::<f64>();
                let grad = t.iter().zip(dist).map(|(ti, pi)| -ti / (pi + EPS_LOG)).collect();
                (value, grad)
            }
            LossKind::Lq { q } => {
                let y = target.argmax();
                let py = dist[y];
                let mut grad = vec![0.0; dist.len()];
                grad[y] = -py.powf(q - 1.0);
                ((1.0 - py.powf(q)) / q, grad)
            }
            LossKind::Bootstrap { beta } => {
                let mut value = 0.0;
                let grad = t
                    .iter()
                    .zip(dist)
                    .map(|(ti, pi)| {
                        let mixed = beta * ti + (1.0 - beta) * pi;
                        let log = (pi + EPS_LOG).ln();
                        value -= mixed * log;
                        -mixed / (pi + EPS_LOG) - (1.0 - beta) * log
                    })
                    .collect();
                (value, grad)
            }
        }
    }
}

fn check_q(q: f64) -> Result<()> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::param("q", format!("{q} not in (0, 1]")));
    }
    Ok(())
}

fn check_unit(name: &'static str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::param(name, format!("{v} not in [0, 1]")));
    }
    Ok(())
}

fn check_dims(a: &SoftLabel, b: &SoftLabel) -> Result<()> {
    if a.num_classes() != b.num_classes() {
        return Err(Error::shape(
            format!("{} classes", a.num_classes()),
            format!("{} classes", b.num_classes()),
        ));
    }
    Ok(())
}

/// `-sum_i target_i * ln(probs_i + EPS_LOG)`.
pub fn cross_entropy_soft(probs: &SoftLabel, target: &SoftLabel) -> Result<f64> {
    check_dims(probs, target)?;
    Ok(LossKind::CrossEntropy.value_and_grad(probs.probs(), target).0)
}

/// `(1 - probs[class]^q) / q`.
pub fn lq_loss(probs: &SoftLabel, class: usize, q: f64) -> Result<f64> {
    check_q(q)?;
    let py = *probs.probs().get(class).ok_or_else(|| {
        Error::shape(
            format!("class index < {}", probs.num_classes()),
            class,
        )
    })?;
    Ok((1.0 - py.powf(q)) / q)
}

/// Soft bootstrapping target `beta * observed + (1 - beta) * prediction`.
pub fn bootstrap_target(observed: &SoftLabel, prediction: &SoftLabel, beta: f64) -> Result<SoftLabel> {
    check_unit("bootstrap_beta", beta)?;
    observed.mix(prediction, beta)
}
