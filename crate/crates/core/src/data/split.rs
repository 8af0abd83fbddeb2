use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::LabeledCorpus;
use crate::error::{Error, Result};

/// Holds out `per_class` verified instances of every class as a validation
/// set. Both halves keep the input order.
pub fn split_validation(
    corpus: &LabeledCorpus,
    per_class: usize,
    seed: u64,
) -> Result<(LabeledCorpus, LabeledCorpus)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut held_out = vec![false; corpus.len()];

    for (class, name) in corpus.class_names().iter().enumerate() {
        let candidates: Vec<usize> = corpus
            .instances()
            .iter()
            .enumerate()
            .filter(|(_, inst)| inst.verified && inst.label.argmax() == class)
            .map(|(i, _)| i)
            .collect();
        if candidates.len() < per_class {
            return Err(Error::InsufficientVerified {
                class: name.clone(),
                available: candidates.len(),
                required: per_class,
            });
        }
        for pick in index::sample(&mut rng, candidates.len(), per_class) {
            held_out[candidates[pick]] = true;
        }
    }

    let (validation, train): (Vec<_>, Vec<_>) = corpus
        .instances()
        .iter()
        .zip(&held_out)
        .map(|(inst, held)| (inst.clone(), *held))
        .partition(|(_, held)| *held);
    let strip = |v: Vec<(crate::data::Instance, bool)>| v.into_iter().map(|(i, _)| i).collect();
    Ok((
        corpus.with_instances(strip(train))?,
        corpus.with_instances(strip(validation))?,
    ))
}
