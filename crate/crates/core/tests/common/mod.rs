#![allow(dead_code)]

use latent_anon::data::{
    normalize, subject_split, synth_generate, window_embeddings, Embedding, NormStats, SynthConfig,
};

pub const WINDOW: usize = 32;
pub const STRIDE: usize = 10;

pub struct SynthSet {
    pub config: SynthConfig,
    pub train: Vec<Embedding>,
    pub test: Vec<Embedding>,
    pub raw_test: Vec<Embedding>,
    pub stats: NormStats,
}

pub fn synth_set(config: SynthConfig, split_seed: u64) -> SynthSet {
    let series = synth_generate(&config).unwrap();
    let mut all = Vec::new();
    for s in &series {
        all.extend(window_embeddings(s, WINDOW, STRIDE).unwrap());
    }
    let split = subject_split(&all, 0.8, split_seed).unwrap();
    let stats = NormStats::fit(&split.train, config.channels).unwrap();
    SynthSet {
        train: normalize(&split.train, &stats),
        test: normalize(&split.test, &stats),
        raw_test: split.test,
        stats,
        config,
    }
}

/// Plain triple-loop `y = W x + b`.
pub fn affine(w: &[Vec<f64>], b: &[f64], x: &[f64]) -> Vec<f64> {
    w.iter()
        .zip(b)
        .map(|(row, bias)| {
            let mut acc = *bias;
            for k in 0..x.len() {
                acc += row[k] * x[k];
            }
            acc
        })
        .collect()
}

pub fn relu(v: Vec<f64>) -> Vec<f64> {
    v.into_iter().map(|a| if a > 0.0 { a } else { 0.0 }).collect()
}

use latent_anon::data::by_public_class;
use latent_anon::models::{
    train_classifier, train_vae, vae_seed, AttributeKind, ClassifierConfig, ClassifierModel, VaeConfig, VaeModel,
};
use latent_anon::pipeline::{build_mean_table, ModelRegistry};
use latent_anon::transform::{ModifyMode, ModifyPolicy};
use rayon::prelude::*;
use std::collections::BTreeMap;

/// Split seed for which both private classes land in the test subjects.
pub const SPLIT_SEED: u64 = 3;

pub struct Trained {
    pub set: SynthSet,
    pub vaes: BTreeMap<usize, VaeModel>,
    pub public: ClassifierModel,
    pub private: ClassifierModel,
    pub registry: ModelRegistry,
}

impl Trained {
    pub fn registry_with(&self, mode: ModifyMode) -> ModelRegistry {
        ModelRegistry {
            policy: ModifyPolicy::new(mode, self.set.config.private_classes),
            ..self.registry.clone()
        }
    }
}

/// Default training on the default synthetic configuration.
pub fn train_default() -> Trained {
    let config = SynthConfig::default();
    let set = synth_set(config.clone(), SPLIT_SEED);
    let (u, m) = (config.public_classes, config.private_classes);
    let per_class = by_public_class(&set.train, u);
    let vcfg = VaeConfig::default();
    let vaes: BTreeMap<usize, VaeModel> = per_class
        .par_iter()
        .enumerate()
        .map(|(k, data)| {
            let cfg = VaeConfig {
                seed: vae_seed(vcfg.seed, k),
                ..vcfg.clone()
            };
            (k, train_vae(data, m, &cfg).unwrap().model)
        })
        .collect();
    let ccfg = ClassifierConfig::default();
    let (public, private) = rayon::join(
        || {
            train_classifier(&set.train, AttributeKind::Public, u, &ccfg, None)
                .unwrap()
                .model
        },
        || {
            let cfg = ClassifierConfig {
                seed: 1,
                ..ccfg.clone()
            };
            train_classifier(&set.train, AttributeKind::Private, m, &cfg, None)
                .unwrap()
                .model
        },
    );
    let table = build_mean_table(&vaes, &set.train, u, m).unwrap();
    let registry = ModelRegistry {
        vaes: vaes.clone(),
        public_classifier: public.clone(),
        private_classifier: private.clone(),
        table,
        policy: ModifyPolicy::new(ModifyMode::Deterministic, m),
    };
    Trained {
        set,
        vaes,
        public,
        private,
        registry,
    }
}

use latent_anon::models::VaeArch;
use latent_anon::nn::{DenseLayer, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rows(layer: &DenseLayer) -> Vec<Vec<f64>> {
    (0..layer.weights.rows())
        .map(|r| layer.weights.row(r).to_vec())
        .collect()
}

pub fn random_model(seed: u64, d: usize, hidden: &[usize], j: usize, m: usize) -> VaeModel {
    let arch = VaeArch {
        input_dim: d,
        hidden: hidden.to_vec(),
        latent_dim: j,
        private_classes: m,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = VaeModel::new(&arch, 0, &mut rng).unwrap();
    // Non-zero biases so the bias paths are exercised too.
    let head_len = model.head.bias.len();
    let last = model.param_count() - 1;
    for (k, p) in model.params_mut().into_iter().enumerate() {
        if k == last && p.len() == head_len {
            continue;
        }
        for v in p.iter_mut() {
            *v += rng.random_range(-0.3..0.3);
        }
    }
    model
}

pub fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
    Matrix::from_vec(r, c, (0..r * c).map(|_| rng.sample(StandardNormal)).collect()).unwrap()
}

/// Independent forward pass of the whole model for one item.
pub fn oracle_item(model: &VaeModel, x: &[f64], noise: &[f64], y: usize) -> (f64, f64, f64) {
    let mut h = x.to_vec();
    for l in &model.encoder.layers {
        h = relu(affine(&rows(l), &l.bias, &h));
    }
    let mu = affine(&rows(&model.mu_head), &model.mu_head.bias, &h);
    let lv = affine(&rows(&model.logvar_head), &model.logvar_head.bias, &h);
    let z: Vec<f64> = (0..mu.len()).map(|k| mu[k] + (lv[k] / 2.0).exp() * noise[k]).collect();
    let mut r = z.clone();
    let n = model.decoder.layers.len();
    for (k, l) in model.decoder.layers.iter().enumerate() {
        r = affine(&rows(l), &l.bias, &r);
        if k + 1 < n {
            r = relu(r);
        }
    }
    let recon: f64 = x.iter().zip(&r).map(|(a, b)| 0.5 * (a - b).powi(2)).sum();
    let mut kl = 0.0;
    for k in 0..mu.len() {
        kl += -0.5 * (1.0 + lv[k] - lv[k].exp() - mu[k] * mu[k]);
    }
    let logits = affine(&rows(&model.head), &vec![0.0; model.head.bias.len()], &z);
    let mx = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = mx + logits.iter().map(|l| (l - mx).exp()).sum::<f64>().ln();
    let ce = lse - logits[y];
    (recon, kl, ce)
}
