use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{LabeledCorpus, SoftLabel};
use crate::error::{Error, Result};
use crate::nn::adam::{adam_step, AdamHyper, AdamState};
use crate::nn::augment::{mask_augment, mixup, MaskParams};
use crate::nn::checkpoint::RngState;
use crate::nn::loss::LossKind;
use crate::nn::model::Classifier;
use crate::nn::noise::NoiseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossChoice {
    CrossEntropy,
    Lq,
    Bootstrap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Augmentation {
    None,
    Mixup,
    Masking,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Multiplier applied to the learning rate every `lr_decay_every` epochs.
    pub lr_decay_factor: f64,
    pub lr_decay_every: usize,
    pub loss_kind: LossChoice,
    pub q: f64,
    pub bootstrap_beta: f64,
    pub use_noise_layer: bool,
    /// Initial noise matrix is `(1 - s) I + (s / K) 1`.
    pub noise_init_smoothing: f64,
    pub augmentation: Augmentation,
    pub mixup_alpha: f64,
    pub masking: MaskParams,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 40,
            batch_size: 128,
            learning_rate: 0.0005,
            lr_decay_factor: 0.9,
            lr_decay_every: 2,
            loss_kind: LossChoice::CrossEntropy,
            q: 0.7,
            bootstrap_beta: 0.8,
            use_noise_layer: false,
            noise_init_smoothing: 0.1,
            augmentation: Augmentation::None,
            mixup_alpha: 0.2,
            masking: MaskParams::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn loss(&self) -> LossKind {
        match self.loss_kind {
            LossChoice::CrossEntropy => LossKind::CrossEntropy,
            LossChoice::Lq => LossKind::Lq { q: self.q },
            LossChoice::Bootstrap => LossKind::Bootstrap {
                beta: self.bootstrap_beta,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::param("epochs", "must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::param("batch_size", "must be at least 1"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::param("learning_rate", "must be positive"));
        }
        if !(self.lr_decay_factor > 0.0) || self.lr_decay_every == 0 {
            return Err(Error::param("lr_decay", "factor must be positive, period at least 1"));
        }
        if !(self.q > 0.0 && self.q <= 1.0) {
            return Err(Error::param("q", format!("{} not in (0, 1]", self.q)));
        }
        if !(0.0..=1.0).contains(&self.bootstrap_beta) {
            return Err(Error::param("bootstrap_beta", format!("{} not in [0, 1]", self.bootstrap_beta)));
        }
        if !(0.0..=1.0).contains(&self.noise_init_smoothing) {
            return Err(Error::param("noise_init_smoothing", "must be in [0, 1]"));
        }
        if self.augmentation == Augmentation::Mixup && !(self.mixup_alpha > 0.0) {
            return Err(Error::param("mixup_alpha", "must be positive"));
        }
        self.loss().validate()
    }

    /// Learning rate used during `epoch` (1-based).
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        let decays = epoch.saturating_sub(1) / self.lr_decay_every;
        self.learning_rate * self.lr_decay_factor.powi(decays as i32)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training loss of each epoch, weighted by batch size.
    pub epoch_losses: Vec<f64>,
    pub learning_rates: Vec<f64>,
    pub rng: RngState,
}

/// Mini-batch Adam training over every block of every instance. Clip labels
/// are shared by all of the clip's blocks.
pub fn train(
    classifier: &mut Classifier,
    corpus: &LabeledCorpus,
    config: &TrainConfig,
) -> Result<TrainReport> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if corpus.num_classes() != classifier.num_classes() {
        return Err(Error::shape(
            format!("{} classes", classifier.num_classes()),
            format!("{} classes", corpus.num_classes()),
        ));
    }

    let mut samples: Vec<(&Array2<f64>, &SoftLabel)> = Vec::new();
    for inst in corpus.instances() {
        for block in inst.blocks()? {
            samples.push((block, &inst.label));
        }
    }

    let k = classifier.num_classes();
    if config.use_noise_layer && classifier.noise().is_none() {
        classifier.set_noise(Some(NoiseMatrix::smoothed_identity(
            k,
            config.noise_init_smoothing,
        )));
    }
    let loss = config.loss();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = AdamState::for_params(classifier.params());
    let mut noise_adam = classifier
        .noise()
        .map(|q| AdamState::for_params(&[q.as_slice().to_vec()]));

    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut learning_rates = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        let hyper = AdamHyper::with_learning_rate(config.learning_rate_at(epoch));
        order.shuffle(&mut rng);
        let mut weighted = 0.0;

        for chunk in order.chunks(config.batch_size) {
            let mut inputs: Vec<Array2<f64>> = chunk.iter().map(|&i| samples[i].0.clone()).collect();
            let mut targets: Vec<SoftLabel> = chunk.iter().map(|&i| samples[i].1.clone()).collect();
            match config.augmentation {
                Augmentation::None => {}
                Augmentation::Masking => {
                    let m = config.masking;
                    for x in inputs.iter_mut() {
                        *x = mask_augment(x, m.max_time_width, m.max_freq_width, m.num_masks, rng.gen());
                    }
                }
                Augmentation::Mixup => {
                    (inputs, targets) = mixup(&inputs, &targets, config.mixup_alpha, rng.gen())?;
                }
            }

            let (batch_loss, grads) = classifier.loss_and_gradients(&inputs, &targets, &loss)?;
            weighted += batch_loss * chunk.len() as f64;
            adam_step(classifier.params_mut(), &grads.params, &mut adam, &hyper);
            if let (Some(state), Some(grad), Some(q)) =
                (noise_adam.as_mut(), grads.noise, classifier.noise_mut())
            {
                let mut entries = vec![std::mem::take(q.entries_mut())];
                adam_step(&mut entries, &[grad], state, &hyper);
                *q.entries_mut() = entries.pop().expect("one group");
                q.renormalize();
            }
        }
        epoch_losses.push(weighted / samples.len() as f64);
        learning_rates.push(hyper.learning_rate);
    }

    Ok(TrainReport {
        epoch_losses,
        learning_rates,
        rng: RngState::capture(&rng),
    })
}

/// Fraction of instances whose clip prediction matches the label's top class.
pub fn training_accuracy(classifier: &Classifier, corpus: &LabeledCorpus) -> Result<f64> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut correct = 0usize;
    for inst in corpus.instances() {
        if classifier.predict_clip(inst.blocks()?)?.argmax() == inst.label.argmax() {
            correct += 1;
        }
    }
    Ok(correct as f64 / corpus.len() as f64)
}
