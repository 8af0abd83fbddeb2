//! From-scratch classifier, losses, optimiser and augmentation.

pub mod adam;
pub mod augment;
pub mod checkpoint;
pub mod loss;
pub mod model;
pub mod noise;
mod softmax;
pub mod train;

use ndarray::Array2;

pub use adam::{adam_step, AdamHyper, AdamState};
pub use augment::{mask_augment, mix_pair, mixup, MaskParams};
pub use checkpoint::{Checkpoint, RngState};
pub use loss::{bootstrap_target, cross_entropy_soft, lq_loss, LossKind, EPS_LOG};
pub use model::{Activation, Architecture, Classifier, ConvSpec, Gradients};
pub use noise::{noise_layer_apply, NoiseMatrix};
pub use softmax::{mean_labels, softmax, softmax_rows};
pub use train::{train, training_accuracy, Augmentation, LossChoice, TrainConfig, TrainReport};

use crate::data::SoftLabel;
use crate::error::Result;

/// Mean of the per-block softmax outputs of a clip.
pub fn predict_clip(classifier: &Classifier, blocks: &[Array2<f64>]) -> Result<SoftLabel> {
    classifier.predict_clip(blocks)
}
