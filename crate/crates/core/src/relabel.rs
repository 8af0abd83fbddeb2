//! Pseudo-labelling and assembly of the primary training set.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Instance, LabeledCorpus, SoftLabel};
use crate::detect::DetectionOutcome;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    CleanOnly,
    Baseline,
    OodR,
    OodRd,
    AllR,
}

impl PolicyKind {
    /// Whether the policy consumes detection outcomes.
    pub fn needs_detection(self) -> bool {
        matches!(self, PolicyKind::OodR | PolicyKind::OodRd)
    }

    /// Whether the policy consumes auxiliary predictions.
    pub fn needs_predictions(self) -> bool {
        matches!(self, PolicyKind::OodR | PolicyKind::OodRd | PolicyKind::AllR)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelabelPolicy {
    pub kind: PolicyKind,
    pub lambda: f64,
    pub theta: f64,
    pub tau: f64,
}

impl RelabelPolicy {
    pub fn new(kind: PolicyKind) -> Self {
        RelabelPolicy {
            kind,
            lambda: 0.5,
            theta: 0.55,
            tau: 0.4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_lambda(self.lambda)?;
        if !(0.0..=1.0).contains(&self.theta) || !(0.0..=1.0).contains(&self.tau) || self.tau > self.theta {
            return Err(Error::param(
                "thresholds",
                format!("need 0 <= tau <= theta <= 1, got tau={} theta={}", self.tau, self.theta),
            ));
        }
        Ok(())
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::param("lambda", format!("{lambda} not in [0, 1]")));
    }
    Ok(())
}

/// `lambda * observed + (1 - lambda) * prediction`.
pub fn pseudo_label(observed: &SoftLabel, prediction: &SoftLabel, lambda: f64) -> Result<SoftLabel> {
    check_lambda(lambda)?;
    observed.mix(prediction, lambda)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Keep,
    Relabel,
    Discard,
}

/// What happened to one instance, and the label it trains with.
#[derive(Debug, Clone, PartialEq)]
pub struct RelabelEntry {
    pub instance_id: String,
    pub verified: bool,
    pub action: Action,
    pub label: SoftLabel,
}

/// Chooses lambda per relabelled instance from its observed label and the
/// auxiliary prediction.
pub type LambdaFn<'a> = dyn Fn(&Instance, &SoftLabel) -> f64 + 'a;

/// Per-instance decisions for the clean then noisy instances, in order.
pub fn plan_relabel(
    policy: &RelabelPolicy,
    clean: &LabeledCorpus,
    noisy: &LabeledCorpus,
    detections: &[DetectionOutcome],
    aux_predictions: &HashMap<String, SoftLabel>,
    lambda_fn: &LambdaFn,
) -> Result<Vec<RelabelEntry>> {
    policy.validate()?;
    let by_id: HashMap<&str, &DetectionOutcome> =
        detections.iter().map(|d| (d.instance_id.as_str(), d)).collect();

    let mut entries: Vec<RelabelEntry> = clean
        .instances()
        .iter()
        .map(|inst| RelabelEntry {
            instance_id: inst.id.clone(),
            verified: inst.verified,
            action: Action::Keep,
            label: inst.label.clone(),
        })
        .collect();

    for inst in noisy.instances() {
        let detection = if policy.kind.needs_detection() {
            Some(*by_id.get(inst.id.as_str()).ok_or_else(|| Error::MissingForInstance {
                what: "detection outcome",
                id: inst.id.clone(),
            })?)
        } else {
            None
        };
        let prediction = if policy.kind.needs_predictions() {
            Some(aux_predictions.get(&inst.id).ok_or_else(|| Error::MissingForInstance {
                what: "auxiliary prediction",
                id: inst.id.clone(),
            })?)
        } else {
            None
        };
        let in_theta = detection.is_some_and(|d| d.in_s_theta);
        let in_tau = detection.is_some_and(|d| d.in_s_tau);
        // A verified instance in the noisy half would be a caller bug, but
        // it must still never be relabelled.
        let action = match policy.kind {
            _ if inst.verified => Action::Keep,
            PolicyKind::CleanOnly => Action::Discard,
            PolicyKind::Baseline => Action::Keep,
            PolicyKind::OodR if in_theta => Action::Relabel,
            PolicyKind::OodR => Action::Keep,
            PolicyKind::OodRd if in_tau => Action::Discard,
            PolicyKind::OodRd if in_theta => Action::Relabel,
            PolicyKind::OodRd => Action::Keep,
            PolicyKind::AllR => Action::Relabel,
        };
        let label = match (action, prediction) {
            (Action::Relabel, Some(pred)) => {
                let lambda = lambda_fn(inst, pred);
                pseudo_label(&inst.label, pred, lambda)?
            }
            _ => inst.label.clone(),
        };
        entries.push(RelabelEntry {
            instance_id: inst.id.clone(),
            verified: inst.verified,
            action,
            label,
        });
    }
    Ok(entries)
}

/// Applies a plan: drops discarded instances and installs new labels.
pub fn apply_plan(
    clean: &LabeledCorpus,
    noisy: &LabeledCorpus,
    entries: &[RelabelEntry],
) -> Result<LabeledCorpus> {
    let all = clean.instances().iter().chain(noisy.instances());
    if entries.len() != clean.len() + noisy.len() {
        return Err(Error::shape(
            format!("{} relabel entries", clean.len() + noisy.len()),
            entries.len(),
        ));
    }
    let mut out = Vec::with_capacity(entries.len());
    for (inst, entry) in all.zip(entries) {
        if inst.id != entry.instance_id {
            return Err(Error::Format(format!(
                "relabel entry {:?} does not match instance {:?}",
                entry.instance_id, inst.id
            )));
        }
        if entry.action == Action::Discard {
            continue;
        }
        let mut kept = inst.clone();
        kept.label = entry.label.clone();
        out.push(kept);
    }
    clean.with_instances(out)
}

pub fn build_training_set(
    policy: &RelabelPolicy,
    clean: &LabeledCorpus,
    noisy: &LabeledCorpus,
    detections: &[DetectionOutcome],
    aux_predictions: &HashMap<String, SoftLabel>,
) -> Result<LabeledCorpus> {
    build_training_set_with(policy, clean, noisy, detections, aux_predictions, &|_, _| policy.lambda)
}

/// As `build_training_set`, with a caller-supplied lambda per instance.
pub fn build_training_set_with(
    policy: &RelabelPolicy,
    clean: &LabeledCorpus,
    noisy: &LabeledCorpus,
    detections: &[DetectionOutcome],
    aux_predictions: &HashMap<String, SoftLabel>,
    lambda_fn: &LambdaFn,
) -> Result<LabeledCorpus> {
    let plan = plan_relabel(policy, clean, noisy, detections, aux_predictions, lambda_fn)?;
    apply_plan(clean, noisy, &plan)
}

fn join_probs(label: &SoftLabel) -> String {
    label.probs().iter().map(|p| p.to_string()).collect::<Vec<_>>().join(";")
}

fn split_probs(text: &str) -> Result<SoftLabel> {
    let probs = text
        .split(';')
        .map(|p| p.trim().parse::<f64>().map_err(|e| Error::Format(format!("probability {p:?}: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    SoftLabel::new(probs)
}

#[derive(Serialize, Deserialize)]
struct ManifestRow {
    instance_id: String,
    verified: u8,
    action: Action,
    label_probs: String,
}

/// CSV `instance_id,verified,action,label_probs`; probabilities are
/// `;`-separated in shortest round-trip form.
pub fn write_relabel_manifest(path: &Path, entries: &[RelabelEntry]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for e in entries {
        writer.serialize(ManifestRow {
            instance_id: e.instance_id.clone(),
            verified: e.verified as u8,
            action: e.action,
            label_probs: join_probs(&e.label),
        })?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

pub fn read_relabel_manifest(path: &Path) -> Result<Vec<RelabelEntry>> {
    let mut reader = csv::Reader::from_path(path)?;
    reader
        .deserialize::<ManifestRow>()
        .map(|row| {
            let row = row?;
            Ok(RelabelEntry {
                instance_id: row.instance_id,
                verified: row.verified != 0,
                action: row.action,
                label: split_probs(&row.label_probs)?,
            })
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct PredictionRow {
    instance_id: String,
    probs: String,
}

/// Clip-level auxiliary predictions, CSV `instance_id,probs`.
pub fn write_predictions(path: &Path, predictions: &[(String, SoftLabel)]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for (id, label) in predictions {
        writer.serialize(PredictionRow {
            instance_id: id.clone(),
            probs: join_probs(label),
        })?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

pub fn read_predictions(path: &Path) -> Result<Vec<(String, SoftLabel)>> {
    let mut reader = csv::Reader::from_path(path)?;
    reader
        .deserialize::<PredictionRow>()
        .map(|row| {
            let row = row?;
            Ok((row.instance_id, split_probs(&row.probs)?))
        })
        .collect()
}
