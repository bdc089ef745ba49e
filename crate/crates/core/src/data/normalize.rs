use log::warn;
use serde::{Deserialize, Serialize};

use super::series::Embedding;
use crate::{Error, Result};

/// Per-channel mean and standard deviation fitted on training embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    /// Fits statistics over every sample of every embedding; `channels` gives
    /// the time-major stride.
    pub fn fit(train: &[Embedding], channels: usize) -> Result<Self> {
        if channels == 0 {
            return Err(Error::invalid("zero channels"));
        }
        if train.is_empty() {
            return Err(Error::invalid("cannot fit normalization on an empty split"));
        }
        let mut sum = vec![0.0; channels];
        let mut count = 0usize;
        for e in train {
            if e.x.len() % channels != 0 {
                return Err(Error::shape(format!(
                    "embedding of length {} is not a multiple of {channels} channels",
                    e.x.len()
                )));
            }
            for sample in e.x.chunks_exact(channels) {
                for (s, v) in sum.iter_mut().zip(sample) {
                    *s += v;
                }
            }
            count += e.x.len() / channels;
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
        let mut sq = vec![0.0; channels];
        for e in train {
            for sample in e.x.chunks_exact(channels) {
                for ((s, v), m) in sq.iter_mut().zip(sample).zip(&mean) {
                    *s += (v - m) * (v - m);
                }
            }
        }
        let std: Vec<f64> = sq.iter().map(|s| (s / count as f64).sqrt()).collect();
        for (c, s) in std.iter().enumerate() {
            if *s == 0.0 {
                warn!("channel {c} has zero variance; it will normalize to 0");
            }
        }
        Ok(Self { mean, std })
    }

    pub fn channels(&self) -> usize {
        self.mean.len()
    }

    /// Z-scores `x` in place. Zero-variance channels map to 0.
    pub fn apply(&self, x: &mut [f64]) {
        let c = self.channels();
        for sample in x.chunks_exact_mut(c) {
            for ((v, m), s) in sample.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = if *s == 0.0 { 0.0 } else { (*v - m) / s };
            }
        }
    }

    pub fn invert(&self, x: &mut [f64]) {
        let c = self.channels();
        for sample in x.chunks_exact_mut(c) {
            for ((v, m), s) in sample.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = *v * s + m;
            }
        }
    }
}

/// Returns normalized copies of `embeddings` using `stats`.
pub fn normalize(embeddings: &[Embedding], stats: &NormStats) -> Vec<Embedding> {
    embeddings
        .iter()
        .map(|e| {
            let mut e = e.clone();
            stats.apply(&mut e.x);
            e
        })
        .collect()
}

pub fn denormalize(embeddings: &[Embedding], stats: &NormStats) -> Vec<Embedding> {
    embeddings
        .iter()
        .map(|e| {
            let mut e = e.clone();
            stats.invert(&mut e.x);
            e
        })
        .collect()
}
