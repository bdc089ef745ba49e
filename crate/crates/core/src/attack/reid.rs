use std::io::Write;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::obfuscator::Obfuscator;
use crate::data::Embedding;
use crate::models::{train_classifier, AttributeKind, ClassifierConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackConfig {
    /// Share of the training split the attacker obtains.
    pub sample_fraction: f64,
    pub runs: usize,
    pub attacker: ClassifierConfig,
    /// Run `r` uses seed `seed + r`.
    pub seed: u64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            sample_fraction: 0.2,
            runs: 20,
            attacker: ClassifierConfig::default(),
            seed: 0,
        }
    }
}

impl AttackConfig {
    pub fn run_seeds(&self) -> Vec<u64> {
        (0..self.runs as u64).map(|r| self.seed.wrapping_add(r)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackRun {
    pub run: usize,
    pub seed: u64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub mode: String,
    pub runs: Vec<AttackRun>,
    pub mean: f64,
    /// Sample standard deviation (zero for a single run).
    pub std: f64,
    pub config: AttackConfig,
}

impl AttackReport {
    pub fn accuracies(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.accuracy).collect()
    }

    /// `run,seed,accuracy` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["run", "seed", "accuracy"])
            .map_err(|e| Error::invalid(e.to_string()))?;
        for r in &self.runs {
            out.write_record([r.run.to_string(), r.seed.to_string(), r.accuracy.to_string()])
                .map_err(|e| Error::invalid(e.to_string()))?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn mean_and_sample_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn obfuscate_all(ob: &mut (dyn Obfuscator + '_), data: &[&Embedding]) -> Result<Vec<Embedding>> {
    data.iter()
        .enumerate()
        .map(|(k, e)| {
            Ok(Embedding {
                x: ob.obfuscate(&e.x).map_err(|err| Error::at(k, err))?,
                // The attacker only ever sees the private label.
                public: 0,
                ..(*e).clone()
            })
        })
        .collect()
}

/// Re-identification attack.
///
/// Each run draws `sample_fraction` of `train` uniformly without replacement,
/// obfuscates it with a fresh obfuscator from `make`, trains an attacker on
/// the obfuscated data with the true private labels, and scores it on the
/// obfuscated `test` split. Runs execute in parallel.
pub fn run_reid_attack<'a, F>(
    make: F,
    train: &[Embedding],
    test: &[Embedding],
    private_classes: usize,
    mode: &str,
    config: &AttackConfig,
) -> Result<AttackReport>
where
    F: Fn(u64) -> Result<Box<dyn Obfuscator + 'a>> + Sync,
{
    if !(config.sample_fraction > 0.0 && config.sample_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "sample fraction {} outside (0, 1)",
            config.sample_fraction
        )));
    }
    if config.runs == 0 {
        return Err(Error::invalid("at least one attack run is required"));
    }
    if test.is_empty() {
        return Err(Error::invalid("attack test split is empty"));
    }
    let k = (config.sample_fraction * train.len() as f64).round() as usize;
    if k < 2 * private_classes {
        return Err(Error::invalid(format!(
            "fraction {} of {} embeddings gives {k}, fewer than 2·M = {}",
            config.sample_fraction,
            train.len(),
            2 * private_classes
        )));
    }
    let runs = config
        .run_seeds()
        .into_par_iter()
        .enumerate()
        .map(|(run, seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut idx = sample(&mut rng, train.len(), k).into_vec();
            idx.sort_unstable();
            let picked: Vec<&Embedding> = idx.iter().map(|&i| &train[i]).collect();
            let mut ob = make(seed)?;
            let seen = obfuscate_all(ob.as_mut(), &picked)?;
            let cfg = ClassifierConfig {
                seed,
                ..config.attacker.clone()
            };
            let attacker = train_classifier(&seen, AttributeKind::Private, private_classes, &cfg, None)?;
            let test_refs: Vec<&Embedding> = test.iter().collect();
            let target = obfuscate_all(ob.as_mut(), &test_refs)?;
            Ok(AttackRun {
                run,
                seed,
                accuracy: attacker.model.accuracy(&target)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let acc: Vec<f64> = runs.iter().map(|r| r.accuracy).collect();
    let (mean, std) = mean_and_sample_std(&acc);
    Ok(AttackReport {
        mode: mode.to_owned(),
        runs,
        mean,
        std,
        config: config.clone(),
    })
}
