//! Synthetic sensor data with a known class structure.
//!
//! Channel `c` of a trial with public class `u` and private class `i` is
//!
//! ```text
//! a_i · sin(2π f_u t / rate + φ_i + ψ + 2π c / C) + b_u + noise
//! ```
//!
//! with `f_u = base_freq · (u + 1)`, `b_u = 2 · separation · u`,
//! `a_i = 1 + separation · i`, `φ_i = separation · i` and a per-trial phase
//! jitter `ψ ∈ [0, phase_jitter)`. Subject `s` carries private class
//! `s mod M`; trial `t` carries public class `t mod U`. When
//! `base_freq · stride / rate` is an integer every window of a trial starts
//! at the same phase, so each `(u, i)` cell forms one tight cluster and the
//! nearest-template rule in [`SynthOracle`] is close to Bayes-optimal.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::series::{LabelSpace, SensorSeries};
use crate::nn::Matrix;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub public_classes: usize,
    pub private_classes: usize,
    pub subjects: usize,
    /// Trials per subject; trial `t` uses public class `t mod U`.
    pub trials: usize,
    /// Samples per trial.
    pub samples: usize,
    pub channels: usize,
    pub rate_hz: f64,
    pub separation: f64,
    pub noise_std: f64,
    pub phase_jitter: f64,
    pub base_freq_hz: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            public_classes: 4,
            private_classes: 2,
            subjects: 20,
            trials: 4,
            samples: 322,
            channels: 3,
            rate_hz: 50.0,
            separation: 1.0,
            noise_std: 0.05,
            phase_jitter: 0.5,
            base_freq_hz: 5.0,
            seed: 7,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.public_classes == 0 || self.private_classes == 0 {
            return Err(Error::invalid("synthetic config needs at least one class of each kind"));
        }
        if self.subjects == 0 || self.trials == 0 || self.channels == 0 {
            return Err(Error::invalid("synthetic config needs subjects, trials and channels"));
        }
        if !(self.separation > 0.0) {
            return Err(Error::invalid("separation must be positive"));
        }
        if !(self.rate_hz > 0.0) || !(self.noise_std >= 0.0) || !(self.phase_jitter >= 0.0) {
            return Err(Error::invalid("rate must be positive; noise and jitter non-negative"));
        }
        Ok(())
    }

    pub fn label_space(&self) -> Result<LabelSpace> {
        LabelSpace::numbered(self.public_classes, self.private_classes)
    }

    /// Noise-free value of channel `c` at sample `t`.
    pub fn clean_value(&self, u: usize, i: usize, jitter: f64, t: usize, c: usize) -> f64 {
        let freq = self.base_freq_hz * (u + 1) as f64;
        let amplitude = 1.0 + self.separation * i as f64;
        let phase = self.separation * i as f64 + jitter + TAU * c as f64 / self.channels as f64;
        let offset = 2.0 * self.separation * u as f64;
        amplitude * (TAU * freq * t as f64 / self.rate_hz + phase).sin() + offset
    }
}

pub fn synth_generate(config: &SynthConfig) -> Result<Vec<SensorSeries>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let noise = Normal::new(0.0, config.noise_std).map_err(|e| Error::invalid(e.to_string()))?;
    let mut out = Vec::with_capacity(config.subjects * config.trials);
    for subject in 0..config.subjects {
        let i = subject % config.private_classes;
        for trial in 0..config.trials {
            let u = trial % config.public_classes;
            let jitter = if config.phase_jitter > 0.0 {
                rng.random_range(0.0..config.phase_jitter)
            } else {
                0.0
            };
            let mut data = Vec::with_capacity(config.samples * config.channels);
            for t in 0..config.samples {
                for c in 0..config.channels {
                    data.push(config.clean_value(u, i, jitter, t, c) + noise.sample(&mut rng));
                }
            }
            let mut attributes = BTreeMap::new();
            attributes.insert("jitter".to_owned(), format!("{jitter}"));
            out.push(SensorSeries {
                subject_id: subject as u32,
                trial: trial as u32,
                samples: Matrix::from_vec(config.samples, config.channels, data)?,
                sampling_rate_hz: config.rate_hz,
                public: u,
                private: i,
                attributes,
            });
        }
    }
    Ok(out)
}

/// Nearest-template classifier built from the generator's own rule.
///
/// Templates use the centre of the jitter range; it works on raw
/// (unnormalized) windows and needs the window's origin within its trial.
#[derive(Debug, Clone)]
pub struct SynthOracle {
    config: SynthConfig,
    window: usize,
}

impl SynthOracle {
    pub fn new(config: SynthConfig, window: usize) -> Self {
        Self { config, window }
    }

    pub fn template(&self, u: usize, i: usize, origin: usize) -> Vec<f64> {
        let jitter = self.config.phase_jitter / 2.0;
        let mut out = Vec::with_capacity(self.window * self.config.channels);
        for t in origin..origin + self.window {
            for c in 0..self.config.channels {
                out.push(self.config.clean_value(u, i, jitter, t, c));
            }
        }
        out
    }

    /// Returns `(public, private)` of the nearest template.
    pub fn classify(&self, x: &[f64], origin: usize) -> (usize, usize) {
        let mut best = (0, 0);
        let mut best_dist = f64::INFINITY;
        for u in 0..self.config.public_classes {
            for i in 0..self.config.private_classes {
                let d: f64 = self
                    .template(u, i, origin)
                    .iter()
                    .zip(x)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                if d < best_dist {
                    best_dist = d;
                    best = (u, i);
                }
            }
        }
        best
    }
}
