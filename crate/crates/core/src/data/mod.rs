//! Sensor series, embeddings, labels, splits and dataset I/O.

pub mod archive;
pub mod csv;
mod labels;
mod normalize;
mod series;
mod split;
mod synth;
mod window;

pub use archive::{ArchiveHeader, EmbeddingArchive};
pub use labels::bin_weight;
pub use normalize::{denormalize, normalize, NormStats};
pub use series::{by_public_class, DatasetSplit, Embedding, LabelSpace, SensorSeries};
pub use split::{subject_split, trial_split};
pub use synth::{synth_generate, SynthConfig, SynthOracle};
pub use window::{window_count, window_embeddings};
