use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::train::{train_vae, TrainedVae, VaeConfig};
use crate::data::Embedding;
use crate::{Error, Result};

/// Seed used for the VAE of public class `u` given a base seed.
pub fn vae_seed(base: u64, u: usize) -> u64 {
    base.wrapping_add(u as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    pub alpha: f64,
    pub beta: f64,
    /// Final-epoch per-item loss of each public class's VAE.
    pub per_class_loss: Vec<f64>,
    pub mean_loss: f64,
}

#[derive(Debug, Clone)]
pub struct GridSearchResult {
    pub entries: Vec<GridEntry>,
    pub best_alpha: f64,
    pub best_beta: f64,
    /// The attribute-specific VAEs trained with the best pair, by public class.
    pub best_models: Vec<TrainedVae>,
}

impl GridSearchResult {
    pub fn best(&self) -> &GridEntry {
        self.entries
            .iter()
            .find(|e| e.alpha == self.best_alpha && e.beta == self.best_beta)
            .expect("best pair is one of the entries")
    }
}

/// Trains one VAE per public class for every `(α, β)` candidate and keeps the
/// pair with the lowest mean final loss. Ties go to the smaller β, then the
/// smaller α.
pub fn grid_search(
    per_class: &[Vec<Embedding>],
    private_classes: usize,
    alphas: &[f64],
    betas: &[f64],
    base: &VaeConfig,
) -> Result<GridSearchResult> {
    if alphas.is_empty() || betas.is_empty() {
        return Err(Error::invalid("grid search needs at least one α and one β"));
    }
    if per_class.is_empty() {
        return Err(Error::invalid("grid search needs at least one public class"));
    }
    if base.epochs == 0 {
        return Err(Error::invalid("grid search needs at least one training epoch"));
    }
    let pairs: Vec<(f64, f64)> = alphas
        .iter()
        .flat_map(|&a| betas.iter().map(move |&b| (a, b)))
        .collect();
    let jobs: Vec<(usize, usize)> = (0..pairs.len())
        .flat_map(|p| (0..per_class.len()).map(move |u| (p, u)))
        .collect();

    let trained: Vec<TrainedVae> = jobs
        .par_iter()
        .map(|&(p, u)| {
            let (alpha, beta) = pairs[p];
            let cfg = VaeConfig {
                alpha,
                beta,
                seed: vae_seed(base.seed, u),
                ..base.clone()
            };
            train_vae(&per_class[u], private_classes, &cfg)
        })
        .collect::<Result<_>>()?;

    let n = per_class.len();
    let entries: Vec<GridEntry> = pairs
        .iter()
        .enumerate()
        .map(|(p, &(alpha, beta))| {
            let per_class_loss: Vec<f64> = trained[p * n..(p + 1) * n]
                .iter()
                .map(|t| t.history.last().expect("epochs >= 1").total)
                .collect();
            let mean_loss = per_class_loss.iter().sum::<f64>() / n as f64;
            GridEntry {
                alpha,
                beta,
                per_class_loss,
                mean_loss,
            }
        })
        .collect();

    let best = (0..entries.len())
        .min_by(|&a, &b| {
            let (ea, eb) = (&entries[a], &entries[b]);
            ea.mean_loss
                .total_cmp(&eb.mean_loss)
                .then(ea.beta.total_cmp(&eb.beta))
                .then(ea.alpha.total_cmp(&eb.alpha))
        })
        .expect("at least one pair");
    let best_models = trained[best * n..(best + 1) * n].to_vec();
    Ok(GridSearchResult {
        best_alpha: entries[best].alpha,
        best_beta: entries[best].beta,
        entries,
        best_models,
    })
}
