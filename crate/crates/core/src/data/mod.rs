//! Corpora, labels, and the ways they are produced and split.

mod corpus;
mod label;
pub mod manifest;
mod split;
pub mod synthetic;

pub use corpus::{partition_clean_noisy, Instance, LabeledCorpus, Payload, Provenance};
pub use label::{argmax, SoftLabel, SIMPLEX_TOLERANCE};
pub use manifest::load_manifest;
pub use split::split_validation;
pub use synthetic::{generate_synthetic_corpus, generate_test_corpus, SyntheticSpec};
