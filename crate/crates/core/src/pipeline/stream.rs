use std::collections::VecDeque;

use super::anonymizer::{AnonymizationRecord, Anonymizer};
use crate::data::NormStats;
use crate::{Error, Result};

/// Sliding-window anonymization over a sample stream.
///
/// Holds the last `window` samples; emits once the buffer first fills and
/// then every `stride` samples.
pub struct StreamAnonymizer<'a> {
    anonymizer: Anonymizer<'a>,
    window: usize,
    stride: usize,
    channels: usize,
    norm: Option<NormStats>,
    buffer: VecDeque<f64>,
    seen: usize,
}

impl<'a> StreamAnonymizer<'a> {
    /// With `norm`, windows are normalized before anonymization and outputs
    /// mapped back to sensor units.
    pub fn new(
        anonymizer: Anonymizer<'a>,
        window: usize,
        stride: usize,
        channels: usize,
        norm: Option<NormStats>,
    ) -> Result<Self> {
        if window == 0 || stride == 0 || channels == 0 {
            return Err(Error::invalid("window, stride and channels must be at least 1"));
        }
        if window * channels != anonymizer.input_dim() {
            return Err(Error::shape(format!(
                "{window} samples of {channels} channels do not fill an input of {}",
                anonymizer.input_dim()
            )));
        }
        if let Some(n) = &norm {
            if n.channels() != channels {
                return Err(Error::shape("normalization statistics have the wrong channel count"));
            }
        }
        Ok(Self {
            anonymizer,
            window,
            stride,
            channels,
            norm,
            buffer: VecDeque::with_capacity(window * channels),
            seen: 0,
        })
    }

    pub fn push(&mut self, sample: &[f64]) -> Result<Option<(Vec<f64>, AnonymizationRecord)>> {
        if sample.len() != self.channels {
            return Err(Error::shape(format!(
                "sample {} has {} channels, stream has {}",
                self.seen,
                sample.len(),
                self.channels
            )));
        }
        if self.buffer.len() == self.window * self.channels {
            self.buffer.drain(..self.channels);
        }
        self.buffer.extend(sample);
        self.seen += 1;
        if self.seen < self.window || (self.seen - self.window) % self.stride != 0 {
            return Ok(None);
        }
        let mut x: Vec<f64> = self.buffer.iter().copied().collect();
        if let Some(n) = &self.norm {
            n.apply(&mut x);
        }
        let (mut y, rec) = self.anonymizer.anonymize(&x)?;
        if let Some(n) = &self.norm {
            n.invert(&mut y);
        }
        Ok(Some((y, rec)))
    }

    pub fn samples_seen(&self) -> usize {
        self.seen
    }
}

/// Parses one line of comma- or whitespace-separated numbers. Blank lines
/// and lines starting with `#` yield `None`.
pub fn parse_sample_line(line: &str) -> Result<Option<Vec<f64>>> {
    let t = line.trim();
    if t.is_empty() || t.starts_with('#') {
        return Ok(None);
    }
    t.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| Error::invalid(format!("not a number: {s:?}")))
        })
        .collect::<Result<Vec<_>>>()
        .map(Some)
}
