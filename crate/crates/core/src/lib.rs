//! Privacy-preserving obfuscation of windowed sensor data.
//!
//! Each public attribute class (for instance an activity) gets its own
//! variational autoencoder, trained with an extra latent-space classification
//! term for the private attribute. At inference time an embedding is encoded,
//! its latent point is shifted by the difference between two per-class mean
//! latents, and the result is decoded. The crate also ships the harnesses used
//! to measure the outcome: a re-identification attack and a per-stage latency
//! benchmark.
//!
//! Module map:
//!
//! - [`nn`]: dense layers, a reverse-mode tape, optimizers, a finite-difference
//!   gradient checker, and the `LANN1` tensor container.
//! - [`models`]: the VAE with its classification head, MLP attribute
//!   classifiers, trainers and the α/β grid search.
//! - [`data`]: sensor series, windowing, label derivation, splits, CSV
//!   ingestion, the synthetic generator and the embedding archive.
//! - [`transform`]: mean latent tables, transfer vectors and `Modify`.
//! - [`pipeline`]: the end-to-end anonymizer over single embeddings, batches
//!   and streams.
//! - [`attack`]: re-identification attack and utility/privacy evaluation.
//! - [`bench`]: per-stage timing and real-time budget checks.

pub mod attack;
pub mod bench;
pub mod data;
mod error;
pub mod models;
pub mod nn;
pub mod pipeline;
pub mod transform;

pub use error::{Error, Result};
