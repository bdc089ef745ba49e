use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::registry::{validate_registry, ModelRegistry};
use crate::models::sample_latent;
use crate::nn::argmax;
use crate::transform::{apply_transfer, RandomSource, SecureSource};
use crate::{Error, Result};

/// How the latent point is taken from the encoder's posterior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LatentNoise {
    /// `z = μ + σ ⊙ ε` with fresh standard-normal `ε`.
    Sampled,
    /// `z = μ`.
    MeanOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    PublicClassify,
    PrivateClassify,
    Encode,
    Transform,
    Decode,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::PublicClassify,
        Stage::PrivateClassify,
        Stage::Encode,
        Stage::Transform,
        Stage::Decode,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::PublicClassify => "public classify",
            Stage::PrivateClassify => "private classify",
            Stage::Encode => "encode",
            Stage::Transform => "transform",
            Stage::Decode => "decode",
        }
    }
}

/// Receives the duration of each pipeline stage as it completes.
pub trait StageObserver {
    fn stage(&mut self, stage: Stage, elapsed: Duration);
}

/// Discards timings.
pub struct NoObserver;

impl StageObserver for NoObserver {
    fn stage(&mut self, _: Stage, _: Duration) {}
}

/// What happened to one embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnonymizationRecord {
    /// Position in this anonymizer's input sequence.
    pub id: u64,
    pub public: usize,
    pub private: usize,
    pub target: usize,
    pub applied: bool,
    /// CRC32 of the little-endian bytes of `ẑ`.
    pub latent_checksum: u32,
}

/// One instance per stream: owns the latent noise generator and the coin
/// source; the registry is shared read-only.
pub struct Anonymizer<'a> {
    registry: &'a ModelRegistry,
    noise: LatentNoise,
    rng: ChaCha8Rng,
    coins: Box<dyn RandomSource + 'a>,
    next_id: u64,
}

fn latent_checksum(z: &[f64]) -> u32 {
    let mut h = crc32fast::Hasher::new();
    for v in z {
        h.update(&v.to_le_bytes());
    }
    h.finalize()
}

impl<'a> Anonymizer<'a> {
    /// Coins come from a [`SecureSource`]; `seed` drives latent noise only.
    pub fn new(registry: &'a ModelRegistry, noise: LatentNoise, seed: u64) -> Result<Self> {
        Self::with_coins(registry, noise, seed, Box::new(SecureSource::new()?))
    }

    pub fn with_coins(
        registry: &'a ModelRegistry,
        noise: LatentNoise,
        seed: u64,
        coins: Box<dyn RandomSource + 'a>,
    ) -> Result<Self> {
        let defects = validate_registry(registry);
        if !defects.is_empty() {
            let list: Vec<String> = defects.iter().map(ToString::to_string).collect();
            return Err(Error::invalid(format!("registry is incoherent: {}", list.join("; "))));
        }
        Ok(Self {
            registry,
            noise,
            rng: ChaCha8Rng::seed_from_u64(seed),
            coins,
            next_id: 0,
        })
    }

    pub fn registry(&self) -> &ModelRegistry {
        self.registry
    }

    pub fn input_dim(&self) -> usize {
        self.registry.public_classifier.input_dim()
    }

    /// Runs the six steps on `x`.
    pub fn anonymize(&mut self, x: &[f64]) -> Result<(Vec<f64>, AnonymizationRecord)> {
        self.run(x, None, &mut NoObserver)
    }

    /// As [`Self::anonymize`] with caller-supplied standard-normal noise.
    pub fn anonymize_with_noise(&mut self, x: &[f64], noise: &[f64]) -> Result<(Vec<f64>, AnonymizationRecord)> {
        self.run(x, Some(noise), &mut NoObserver)
    }

    pub fn anonymize_observed(
        &mut self,
        x: &[f64],
        obs: &mut dyn StageObserver,
    ) -> Result<(Vec<f64>, AnonymizationRecord)> {
        self.run(x, None, obs)
    }

    /// Anonymizes each row in order; errors carry the row index.
    pub fn anonymize_batch<X: AsRef<[f64]>>(&mut self, xs: &[X]) -> Result<(Vec<Vec<f64>>, Vec<AnonymizationRecord>)> {
        let mut out = Vec::with_capacity(xs.len());
        let mut records = Vec::with_capacity(xs.len());
        for (k, x) in xs.iter().enumerate() {
            let (y, r) = self.anonymize(x.as_ref()).map_err(|e| Error::at(k, e))?;
            out.push(y);
            records.push(r);
        }
        Ok((out, records))
    }

    fn run(
        &mut self,
        x: &[f64],
        noise: Option<&[f64]>,
        obs: &mut dyn StageObserver,
    ) -> Result<(Vec<f64>, AnonymizationRecord)> {
        let reg = self.registry;
        if x.len() != self.input_dim() {
            return Err(Error::shape(format!(
                "embedding of length {} for models of input dimension {}",
                x.len(),
                self.input_dim()
            )));
        }
        // 1. u, i from x.
        let t = Instant::now();
        let u = argmax(&reg.public_classifier.predict_proba(x)?);
        obs.stage(Stage::PublicClassify, t.elapsed());
        let t = Instant::now();
        let i = argmax(&reg.private_classifier.predict_proba(x)?);
        obs.stage(Stage::PrivateClassify, t.elapsed());

        // 2. z from Enc_u.
        let t = Instant::now();
        let vae = reg.vaes.get(&u).ok_or(Error::MissingVae(u))?;
        let dist = vae.encode(x)?;
        let z = match (noise, self.noise) {
            (Some(e), _) => sample_latent(&dist, e)?,
            (None, LatentNoise::MeanOnly) => dist.mu,
            (None, LatentNoise::Sampled) => {
                let e: Vec<f64> = (0..dist.dim()).map(|_| self.rng.sample(StandardNormal)).collect();
                sample_latent(&dist, &e)?
            }
        };
        obs.stage(Stage::Encode, t.elapsed());

        // 3.–5. i' and ẑ.
        let t = Instant::now();
        let m = reg.policy.modify(i, self.coins.as_mut())?;
        let z_hat = apply_transfer(&z, &reg.table, u, i, m.target)?;
        obs.stage(Stage::Transform, t.elapsed());

        // 6. x̂ from Dec_u.
        let t = Instant::now();
        let x_hat = vae.decode(&z_hat)?;
        obs.stage(Stage::Decode, t.elapsed());

        let record = AnonymizationRecord {
            id: self.next_id,
            public: u,
            private: i,
            target: m.target,
            applied: m.applied,
            latent_checksum: latent_checksum(&z_hat),
        };
        self.next_id += 1;
        Ok((x_hat, record))
    }
}
