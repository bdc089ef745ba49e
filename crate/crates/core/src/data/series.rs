use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::nn::Matrix;
use crate::{Error, Result};

/// One recording: `T × C` samples from a single subject and trial.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorSeries {
    pub subject_id: u32,
    pub trial: u32,
    /// `T × C`, one row per timestep.
    pub samples: Matrix,
    pub sampling_rate_hz: f64,
    pub public: usize,
    pub private: usize,
    /// Raw attribute values as read from the source (activity code, gender,
    /// weight, …).
    pub attributes: BTreeMap<String, String>,
}

impl SensorSeries {
    pub fn len(&self) -> usize {
        self.samples.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.rows() == 0
    }

    pub fn channels(&self) -> usize {
        self.samples.cols()
    }
}

/// A flattened window of `W` samples with its labels.
///
/// `x` is time-major: all channels of sample 0, then all channels of
/// sample 1, and so on.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub x: Vec<f64>,
    pub public: usize,
    pub private: usize,
    pub subject_id: u32,
    pub trial: u32,
    /// Row index of the first sample of the window within its series.
    pub origin: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSpace {
    pub public: Vec<String>,
    pub private: Vec<String>,
}

impl LabelSpace {
    pub fn new(public: Vec<String>, private: Vec<String>) -> Result<Self> {
        if public.is_empty() {
            return Err(Error::invalid("label space needs at least one public class"));
        }
        if private.len() < 2 {
            return Err(Error::invalid("label space needs at least two private classes"));
        }
        Ok(Self { public, private })
    }

    /// Numbered class names `prefix0, prefix1, …`.
    pub fn numbered(public: usize, private: usize) -> Result<Self> {
        Self::new(
            (0..public).map(|u| format!("u{u}")).collect(),
            (0..private).map(|i| format!("i{i}")).collect(),
        )
    }

    pub fn public_count(&self) -> usize {
        self.public.len()
    }

    pub fn private_count(&self) -> usize {
        self.private.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<Embedding>,
    pub test: Vec<Embedding>,
    pub train_subjects: Vec<u32>,
    pub test_subjects: Vec<u32>,
}

/// Groups embeddings by their true public class (`U` buckets).
pub fn by_public_class(embeddings: &[Embedding], public_classes: usize) -> Vec<Vec<Embedding>> {
    let mut out = vec![Vec::new(); public_classes];
    for e in embeddings {
        if e.public < public_classes {
            out[e.public].push(e.clone());
        }
    }
    out
}
