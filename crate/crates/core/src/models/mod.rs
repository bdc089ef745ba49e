//! Attribute-specific VAEs, attribute classifiers and their trainers.

mod classifier;
mod grid;
mod persist;
mod train;
mod vae;

pub use classifier::{AttributeKind, ClassifierModel};
pub use grid::{grid_search, vae_seed, GridEntry, GridSearchResult};
pub use persist::{ModelKind, ModelMetadata};
pub use train::{train_classifier, train_vae, ClassifierConfig, TrainedClassifier, TrainedVae, VaeConfig};
pub use vae::{
    augmented_loss, augmented_loss_gradients, kl_gaussian, reconstruction_loss, record_augmented_loss, sample_latent,
    LatentDistribution, LossBreakdown, LossGraph, VaeArch, VaeModel, VaeNodes,
};
