//! The anonymization pipeline: classify, encode, modify, shift, decode.

mod anonymizer;
mod registry;
mod stream;

pub use anonymizer::{AnonymizationRecord, Anonymizer, LatentNoise, NoObserver, Stage, StageObserver};
pub use registry::{
    build_mean_table, load_models, save_models, vae_file_name, validate_registry, Defect, ModelRegistry,
    PRIVATE_CLASSIFIER_FILE, PUBLIC_CLASSIFIER_FILE,
};
pub use stream::{parse_sample_line, StreamAnonymizer};
