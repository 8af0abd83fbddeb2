use std::collections::HashSet;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::SoftLabel;
use crate::error::{Error, Result};
use crate::features::AudioClip;

/// What a classifier consumes for one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Payload {
    /// Raw audio, before feature extraction.
    Audio(AudioClip),
    /// Fixed-shape input blocks (log-mel blocks, or a single raw vector
    /// stored as a `1 x d` matrix).
    Blocks(Vec<Array2<f64>>),
}

impl Payload {
    pub fn blocks(&self) -> Option<&[Array2<f64>]> {
        match self {
            Payload::Blocks(blocks) => Some(blocks),
            Payload::Audio(_) => None,
        }
    }
}

/// Ground-truth origin of a synthetic instance. Never shown to a classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    InDistribution(usize),
    OutOfDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub id: String,
    pub payload: Payload,
    pub label: SoftLabel,
    pub verified: bool,
    #[serde(default)]
    pub provenance: Option<Provenance>,
}

impl Instance {
    /// True source class for in-distribution synthetic instances.
    pub fn source_class_index(&self) -> Option<usize> {
        match self.provenance {
            Some(Provenance::InDistribution(class)) => Some(class),
            _ => None,
        }
    }

    pub fn is_ood(&self) -> bool {
        matches!(self.provenance, Some(Provenance::OutOfDistribution))
    }

    pub fn blocks(&self) -> Result<&[Array2<f64>]> {
        self.payload.blocks().ok_or_else(|| {
            Error::Format(format!(
                "instance {:?} has no extracted features",
                self.id
            ))
        })
    }
}

/// An ordered collection of labelled instances over a fixed class set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledCorpus {
    instances: Vec<Instance>,
    class_names: Vec<String>,
}

impl LabeledCorpus {
    pub fn new(instances: Vec<Instance>, class_names: Vec<String>) -> Result<Self> {
        if class_names.is_empty() {
            return Err(Error::param("class_names", "at least one class is required"));
        }
        let k = class_names.len();
        let mut seen = HashSet::with_capacity(instances.len());
        for inst in &instances {
            if !seen.insert(inst.id.as_str()) {
                return Err(Error::DuplicateId(inst.id.clone()));
            }
            if inst.label.num_classes() != k {
                return Err(Error::shape(
                    format!("{k}-class label"),
                    format!("{}-class label on {:?}", inst.label.num_classes(), inst.id),
                ));
            }
        }
        Ok(LabeledCorpus {
            instances,
            class_names,
        })
    }

    /// A corpus sharing this one's classes.
    pub fn with_instances(&self, instances: Vec<Instance>) -> Result<Self> {
        LabeledCorpus::new(instances, self.class_names.clone())
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn into_instances(self) -> Vec<Instance> {
        self.instances
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.instances.iter().map(|i| i.id.as_str()).collect()
    }

    pub fn get(&self, id: &str) -> Option<&Instance> {
        self.instances.iter().find(|i| i.id == id)
    }

    /// Concatenates two corpora over the same class set.
    pub fn union(&self, other: &LabeledCorpus) -> Result<LabeledCorpus> {
        if self.class_names != other.class_names {
            return Err(Error::shape(
                format!("classes {:?}", self.class_names),
                format!("classes {:?}", other.class_names),
            ));
        }
        let mut instances = self.instances.clone();
        instances.extend(other.instances.iter().cloned());
        LabeledCorpus::new(instances, self.class_names.clone())
    }

    /// Applies a transformation to every payload (e.g. feature extraction).
    pub fn map_payloads<F>(self, mut f: F) -> Result<LabeledCorpus>
    where
        F: FnMut(&Instance) -> Result<Payload>,
    {
        let class_names = self.class_names;
        let instances = self
            .instances
            .into_iter()
            .map(|mut inst| {
                inst.payload = f(&inst)?;
                Ok(inst)
            })
            .collect::<Result<Vec<_>>>()?;
        LabeledCorpus::new(instances, class_names)
    }
}

/// Splits a corpus into its verified (clean) and unverified (noisy) parts.
pub fn partition_clean_noisy(corpus: &LabeledCorpus) -> Result<(LabeledCorpus, LabeledCorpus)> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let (clean, noisy): (Vec<_>, Vec<_>) =
        corpus.instances.iter().cloned().partition(|i| i.verified);
    if clean.is_empty() {
        return Err(Error::NoVerifiedInstances);
    }
    Ok((corpus.with_instances(clean)?, corpus.with_instances(noisy)?))
}
