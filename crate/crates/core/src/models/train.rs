use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::classifier::{AttributeKind, ClassifierModel};
use super::vae::{record_augmented_loss, LossBreakdown, VaeArch, VaeModel};
use crate::data::Embedding;
use crate::nn::{Matrix, OptimizerKind, OptimizerState, Tape};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VaeConfig {
    pub alpha: f64,
    pub beta: f64,
    pub latent_dim: usize,
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for VaeConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            latent_dim: 8,
            hidden: vec![64, 32],
            epochs: 200,
            batch_size: 64,
            lr: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 32],
            epochs: 200,
            batch_size: 64,
            lr: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainedVae {
    pub model: VaeModel,
    /// Per-item average loss for each epoch.
    pub history: Vec<LossBreakdown>,
}

#[derive(Debug, Clone)]
pub struct TrainedClassifier {
    pub model: ClassifierModel,
    /// Per-item average cross-entropy for each epoch.
    pub history: Vec<f64>,
    pub train_accuracy: f64,
    pub held_out_accuracy: Option<f64>,
}

fn check_batch_config(batch_size: usize, lr: f64) -> Result<()> {
    if batch_size == 0 {
        return Err(Error::invalid("batch size must be at least 1"));
    }
    if !(lr > 0.0) {
        return Err(Error::invalid("learning rate must be positive"));
    }
    Ok(())
}

fn check_widths(data: &[Embedding]) -> Result<usize> {
    let d = data
        .first()
        .map(|e| e.x.len())
        .ok_or_else(|| Error::invalid("empty dataset"))?;
    if let Some(k) = data.iter().position(|e| e.x.len() != d) {
        return Err(Error::shape(format!(
            "embedding {k} has a different length than embedding 0"
        )));
    }
    Ok(d)
}

fn batch_matrix(data: &[Embedding], idx: &[usize]) -> Result<Matrix> {
    let rows: Vec<&[f64]> = idx.iter().map(|&k| data[k].x.as_slice()).collect();
    Matrix::from_rows(&rows)
}

/// Trains one attribute-specific VAE with the augmented loss.
///
/// All items must share a public class. The classification head is trained
/// jointly with the encoder from the first step.
pub fn train_vae(data: &[Embedding], private_classes: usize, config: &VaeConfig) -> Result<TrainedVae> {
    let d = check_widths(data)?;
    check_batch_config(config.batch_size, config.lr)?;
    let u = data[0].public;
    if let Some(e) = data.iter().find(|e| e.public != u) {
        return Err(Error::invalid(format!(
            "VAE training set mixes public classes {u} and {}",
            e.public
        )));
    }
    if let Some(e) = data.iter().find(|e| e.private >= private_classes) {
        return Err(Error::invalid(format!(
            "private label {} out of range for {private_classes} classes",
            e.private
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let arch = VaeArch {
        input_dim: d,
        hidden: config.hidden.clone(),
        latent_dim: config.latent_dim,
        private_classes,
    };
    let mut model = VaeModel::new(&arch, u, &mut rng)?;
    model.alpha = config.alpha;
    model.beta = config.beta;
    model.seed = config.seed;

    let mut opt = OptimizerState::new(OptimizerKind::adam(config.lr));
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut sum = LossBreakdown {
            reconstruction: 0.0,
            kl: 0.0,
            classification: 0.0,
            total: 0.0,
            alpha: config.alpha,
            beta: config.beta,
        };
        for idx in order.chunks(config.batch_size) {
            let x = batch_matrix(data, idx)?;
            let labels: Vec<usize> = idx.iter().map(|&k| data[k].private).collect();
            let noise: Vec<f64> = (0..idx.len() * config.latent_dim)
                .map(|_| rng.sample(StandardNormal))
                .collect();
            let noise = Matrix::from_vec(idx.len(), config.latent_dim, noise)?;
            let mut graph = record_augmented_loss(&model, &x, &labels, &noise, config.alpha, config.beta)?;
            let b = &graph.breakdown;
            if !b.total.is_finite() {
                return Err(Error::NonFinite("augmented loss diverged".into()));
            }
            sum.reconstruction += b.reconstruction;
            sum.kl += b.kl;
            sum.classification += b.classification;
            sum.total += b.total;
            let mean = graph.tape.scale(graph.total, 1.0 / idx.len() as f64);
            let grads = graph.tape.backward(mean)?;
            opt.step(&mut model.params_mut(), &grads.slices())?;
        }
        history.push(sum.scaled(data.len() as f64));
    }
    Ok(TrainedVae { model, history })
}

/// Trains an MLP to predict the `kind` label of each embedding.
pub fn train_classifier(
    data: &[Embedding],
    kind: AttributeKind,
    classes: usize,
    config: &ClassifierConfig,
    held_out: Option<&[Embedding]>,
) -> Result<TrainedClassifier> {
    let d = check_widths(data)?;
    check_batch_config(config.batch_size, config.lr)?;
    if let Some(e) = data.iter().find(|e| kind.label(e) >= classes) {
        return Err(Error::invalid(format!(
            "label {} out of range for {classes} classes",
            kind.label(e)
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = ClassifierModel::new(d, &config.hidden, classes, kind, &mut rng)?;
    model.seed = config.seed;

    let mut opt = OptimizerState::new(OptimizerKind::adam(config.lr));
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for idx in order.chunks(config.batch_size) {
            let x = batch_matrix(data, idx)?;
            let labels: Vec<usize> = idx.iter().map(|&k| kind.label(&data[k])).collect();
            let mut tape = Tape::new();
            let xv = tape.constant(x);
            let probs = model.record(&mut tape, xv)?;
            let ce = tape.cross_entropy(probs, &labels)?;
            total += tape.scalar(ce);
            let mean = tape.scale(ce, 1.0 / idx.len() as f64);
            let grads = tape.backward(mean)?;
            let mut params: Vec<&mut [f64]> = model.mlp.params_mut().collect();
            opt.step(&mut params, &grads.slices())?;
        }
        history.push(total / data.len() as f64);
    }
    let train_accuracy = model.accuracy(data)?;
    let held_out_accuracy = match held_out {
        Some(h) if !h.is_empty() => Some(model.accuracy(h)?),
        _ => None,
    };
    Ok(TrainedClassifier {
        model,
        history,
        train_accuracy,
        held_out_accuracy,
    })
}
