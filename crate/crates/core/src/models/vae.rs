use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::nn::{Activation, DenseLayer, Gradients, Matrix, Mlp, ParamId, Tape, Var};
use crate::{Error, Result};

/// Sizes of an attribute-specific VAE.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VaeArch {
    pub input_dim: usize,
    /// Encoder hidden widths; the decoder mirrors them.
    pub hidden: Vec<usize>,
    pub latent_dim: usize,
    pub private_classes: usize,
}

impl VaeArch {
    pub fn desk(input_dim: usize, private_classes: usize) -> Self {
        Self {
            input_dim,
            hidden: vec![64, 32],
            latent_dim: 8,
            private_classes,
        }
    }
}

/// Diagonal Gaussian posterior `q(z | x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentDistribution {
    pub mu: Vec<f64>,
    /// Natural log of the variance.
    pub logvar: Vec<f64>,
}

impl LatentDistribution {
    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn std(&self) -> Vec<f64> {
        self.logvar.iter().map(|lv| (0.5 * lv).exp()).collect()
    }
}

/// Encoder, decoder and latent classification head for one public class.
#[derive(Debug, Clone, PartialEq)]
pub struct VaeModel {
    pub public_class: usize,
    pub encoder: Mlp,
    pub mu_head: DenseLayer,
    pub logvar_head: DenseLayer,
    pub decoder: Mlp,
    /// `J → M` softmax layer without a bias: logit `m` is `z · η_m`.
    pub head: DenseLayer,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
}

/// Graph handles from one recorded forward pass.
#[derive(Debug, Clone, Copy)]
pub struct VaeNodes {
    pub mu: Var,
    pub logvar: Var,
    pub z: Var,
    pub reconstruction: Var,
    pub class_probs: Var,
}

impl VaeModel {
    pub fn new<R: Rng + ?Sized>(arch: &VaeArch, public_class: usize, rng: &mut R) -> Result<Self> {
        if arch.input_dim == 0 || arch.latent_dim == 0 || arch.hidden.contains(&0) {
            return Err(Error::invalid(format!("degenerate VAE sizes {arch:?}")));
        }
        if arch.private_classes < 2 {
            return Err(Error::invalid("the classification head needs at least two classes"));
        }
        let mut enc_sizes = vec![arch.input_dim];
        enc_sizes.extend(&arch.hidden);
        let trunk_out = *enc_sizes.last().expect("non-empty");
        let encoder = Mlp::glorot(&enc_sizes, Activation::Relu, Activation::Relu, rng);
        let mu_head = DenseLayer::glorot(trunk_out, arch.latent_dim, Activation::Identity, rng);
        let logvar_head = DenseLayer::glorot(trunk_out, arch.latent_dim, Activation::Identity, rng);

        let mut dec_sizes = vec![arch.latent_dim];
        dec_sizes.extend(arch.hidden.iter().rev());
        dec_sizes.push(arch.input_dim);
        let decoder = Mlp::glorot(&dec_sizes, Activation::Relu, Activation::Identity, rng);
        let head = DenseLayer::glorot(arch.latent_dim, arch.private_classes, Activation::Softmax, rng);

        Ok(Self {
            public_class,
            encoder,
            mu_head,
            logvar_head,
            decoder,
            head,
            alpha: 0.0,
            beta: 0.0,
            seed: 0,
        })
    }

    pub fn arch(&self) -> VaeArch {
        VaeArch {
            input_dim: self.input_dim(),
            hidden: self.encoder.layers.iter().map(DenseLayer::output_dim).collect(),
            latent_dim: self.latent_dim(),
            private_classes: self.private_classes(),
        }
    }

    pub fn input_dim(&self) -> usize {
        if self.encoder.layers.is_empty() {
            self.mu_head.input_dim()
        } else {
            self.encoder.input_dim()
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.mu_head.output_dim()
    }

    pub fn private_classes(&self) -> usize {
        self.head.output_dim()
    }

    pub fn encode(&self, x: &[f64]) -> Result<LatentDistribution> {
        if x.len() != self.input_dim() {
            return Err(Error::shape(format!(
                "VAE for class {} expects input of length {}, got {}",
                self.public_class,
                self.input_dim(),
                x.len()
            )));
        }
        let h = self.encoder.forward(x)?;
        Ok(LatentDistribution {
            mu: self.mu_head.forward(&h)?,
            logvar: self.logvar_head.forward(&h)?,
        })
    }

    pub fn decode(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.latent_dim() {
            return Err(Error::shape(format!(
                "decoder expects a latent of length {}, got {}",
                self.latent_dim(),
                z.len()
            )));
        }
        self.decoder.forward(z)
    }

    /// `softmax(η z)`: the head's distribution over private classes.
    pub fn classify_from_latent(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.head.forward(z)
    }

    /// Number of trainable tensors; the head bias is not trainable.
    pub fn param_count(&self) -> usize {
        self.encoder.param_count() + 4 + self.decoder.param_count() + 1
    }

    /// Trainable tensors in [`ParamId`] order.
    pub fn params(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = self.encoder.params().collect();
        out.extend([
            self.mu_head.weights.data(),
            self.mu_head.bias.as_slice(),
            self.logvar_head.weights.data(),
            self.logvar_head.bias.as_slice(),
        ]);
        out.extend(self.decoder.params());
        out.push(self.head.weights.data());
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = self.encoder.params_mut().collect();
        out.extend([
            self.mu_head.weights.data_mut(),
            self.mu_head.bias.as_mut_slice(),
            self.logvar_head.weights.data_mut(),
            self.logvar_head.bias.as_mut_slice(),
        ]);
        out.extend(self.decoder.params_mut());
        out.push(self.head.weights.data_mut());
        out
    }

    pub fn head_param_id(&self) -> ParamId {
        ParamId(self.param_count() - 1)
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.params().into_iter().flatten().copied().collect()
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        let total: usize = self.params().iter().map(|p| p.len()).sum();
        if flat.len() != total {
            return Err(Error::shape(format!("{} values for {total} parameters", flat.len())));
        }
        let mut rest = flat;
        for p in self.params_mut() {
            let (head, tail) = rest.split_at(p.len());
            p.copy_from_slice(head);
            rest = tail;
        }
        Ok(())
    }

    /// Records encoder, reparameterized sample, decoder and head for a
    /// batch `x: B × D` with standard-normal `noise: B × J`.
    pub fn record(&self, tape: &mut Tape, x: Var, noise: Var) -> Result<VaeNodes> {
        let enc_ids = self.encoder.param_count();
        let h = self.encoder.record(tape, x, 0)?;
        let mu = self
            .mu_head
            .record(tape, h, ParamId(enc_ids), Some(ParamId(enc_ids + 1)))?;
        let logvar = self
            .logvar_head
            .record(tape, h, ParamId(enc_ids + 2), Some(ParamId(enc_ids + 3)))?;
        let half = tape.scale(logvar, 0.5);
        let std = tape.exp(half);
        let spread = tape.mul(std, noise)?;
        let z = tape.add(mu, spread)?;
        let reconstruction = self.decoder.record(tape, z, enc_ids + 4)?;
        let class_probs = self.head.record(tape, z, self.head_param_id(), None)?;
        Ok(VaeNodes {
            mu,
            logvar,
            z,
            reconstruction,
            class_probs,
        })
    }
}

/// `z = μ + exp(logvar / 2) ⊙ noise`.
pub fn sample_latent(dist: &LatentDistribution, noise: &[f64]) -> Result<Vec<f64>> {
    if noise.len() != dist.dim() || dist.logvar.len() != dist.dim() {
        return Err(Error::shape(format!(
            "latent of dimension {} with noise of length {}",
            dist.dim(),
            noise.len()
        )));
    }
    Ok(dist
        .mu
        .iter()
        .zip(&dist.logvar)
        .zip(noise)
        .map(|((m, lv), e)| m + (0.5 * lv).exp() * e)
        .collect())
}

/// `KL(q ‖ N(0, I)) = −½ Σ (1 + logvar − exp(logvar) − μ²)`.
pub fn kl_gaussian(dist: &LatentDistribution) -> f64 {
    -0.5 * dist
        .mu
        .iter()
        .zip(&dist.logvar)
        .map(|(m, lv)| 1.0 + lv - lv.exp() - m * m)
        .sum::<f64>()
}

/// `½ Σ (x − x̂)²`, the negative log-likelihood of a unit-variance Gaussian
/// decoder up to a constant.
pub fn reconstruction_loss(x: &[f64], x_hat: &[f64]) -> Result<f64> {
    if x.len() != x_hat.len() {
        return Err(Error::shape(format!(
            "reconstruction of length {} for input of length {}",
            x_hat.len(),
            x.len()
        )));
    }
    Ok(0.5 * x.iter().zip(x_hat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
}

/// Terms of the augmented loss summed over a batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub reconstruction: f64,
    pub kl: f64,
    pub classification: f64,
    pub total: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl LossBreakdown {
    /// Divides every term by `n` (for per-item averages).
    pub fn scaled(self, n: f64) -> Self {
        Self {
            reconstruction: self.reconstruction / n,
            kl: self.kl / n,
            classification: self.classification / n,
            total: self.total / n,
            ..self
        }
    }
}

/// A recorded augmented-loss graph.
pub struct LossGraph {
    pub tape: Tape,
    pub nodes: VaeNodes,
    pub reconstruction: Var,
    pub kl: Var,
    pub classification: Var,
    pub total: Var,
    pub breakdown: LossBreakdown,
}

/// Records `Σ_k [ ½‖x_k − x̂_k‖² + β·KL_k + α·CE(f_η(z_k), y_k) ]`.
pub fn record_augmented_loss(
    model: &VaeModel,
    x: &Matrix,
    labels: &[usize],
    noise: &Matrix,
    alpha: f64,
    beta: f64,
) -> Result<LossGraph> {
    if x.rows() == 0 {
        return Err(Error::invalid("augmented loss over an empty batch"));
    }
    if noise.shape() != (x.rows(), model.latent_dim()) {
        return Err(Error::shape(format!(
            "noise {:?} for a batch of {} with latent dimension {}",
            noise.shape(),
            x.rows(),
            model.latent_dim()
        )));
    }
    if x.cols() != model.input_dim() {
        return Err(Error::shape(format!(
            "batch width {} for a VAE with input dimension {}",
            x.cols(),
            model.input_dim()
        )));
    }
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let nv = tape.constant(noise.clone());
    let nodes = model.record(&mut tape, xv, nv)?;
    let reconstruction = tape.half_squared_error(nodes.reconstruction, xv)?;
    let kl = tape.kl_gaussian(nodes.mu, nodes.logvar)?;
    let classification = tape.cross_entropy(nodes.class_probs, labels)?;
    let wkl = tape.scale(kl, beta);
    let wce = tape.scale(classification, alpha);
    let elbo = tape.add(reconstruction, wkl)?;
    let total = tape.add(elbo, wce)?;
    let breakdown = LossBreakdown {
        reconstruction: tape.scalar(reconstruction),
        kl: tape.scalar(kl),
        classification: tape.scalar(classification),
        total: tape.scalar(total),
        alpha,
        beta,
    };
    Ok(LossGraph {
        tape,
        nodes,
        reconstruction,
        kl,
        classification,
        total,
        breakdown,
    })
}

pub fn augmented_loss(
    model: &VaeModel,
    x: &Matrix,
    labels: &[usize],
    noise: &Matrix,
    alpha: f64,
    beta: f64,
) -> Result<LossBreakdown> {
    Ok(record_augmented_loss(model, x, labels, noise, alpha, beta)?.breakdown)
}

/// Loss, parameter gradients and the relu activity pattern.
pub fn augmented_loss_gradients(
    model: &VaeModel,
    x: &Matrix,
    labels: &[usize],
    noise: &Matrix,
    alpha: f64,
    beta: f64,
) -> Result<(LossBreakdown, Gradients, Vec<bool>)> {
    let g = record_augmented_loss(model, x, labels, noise, alpha, beta)?;
    let grads = g.tape.backward(g.total)?;
    Ok((g.breakdown, grads, g.tape.relu_pattern()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny() -> VaeModel {
        let arch = VaeArch {
            input_dim: 3,
            hidden: vec![4],
            latent_dim: 2,
            private_classes: 2,
        };
        VaeModel::new(&arch, 0, &mut ChaCha8Rng::seed_from_u64(11)).unwrap()
    }

    #[test]
    fn zero_encoder_returns_biases() {
        let mut m = tiny();
        for p in m.params_mut() {
            p.fill(0.0);
        }
        m.mu_head.bias = vec![0.3, -0.2];
        m.logvar_head.bias = vec![-1.0, 0.5];
        let d = m.encode(&[4.0, -2.0, 9.0]).unwrap();
        assert_eq!(d.mu, vec![0.3, -0.2]);
        assert_eq!(d.logvar, vec![-1.0, 0.5]);
    }

    #[test]
    fn zero_decoder_returns_output_bias() {
        let mut m = tiny();
        for l in &mut m.decoder.layers {
            l.weights.data_mut().fill(0.0);
        }
        let last = m.decoder.layers.last_mut().unwrap();
        last.bias = vec![1.0, 2.0, 3.0];
        assert_eq!(m.decode(&[5.0, -5.0]).unwrap(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn deterministic_inference() {
        let m = tiny();
        let x = [0.1, 0.2, 0.3];
        assert_eq!(m.encode(&x).unwrap(), m.encode(&x).unwrap());
        assert_eq!(m.decode(&[0.5, 0.5]).unwrap(), m.decode(&[0.5, 0.5]).unwrap());
    }

    #[test]
    fn shape_errors() {
        let m = tiny();
        assert!(m.encode(&[1.0]).is_err());
        assert!(m.decode(&[1.0]).is_err());
        let d = LatentDistribution {
            mu: vec![0.0; 2],
            logvar: vec![0.0; 2],
        };
        assert!(sample_latent(&d, &[0.0]).is_err());
        assert!(reconstruction_loss(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn sampling_examples() {
        let d = LatentDistribution {
            mu: vec![1.0, -2.0],
            logvar: vec![0.0, 0.0],
        };
        assert_eq!(sample_latent(&d, &[0.0, 0.0]).unwrap(), d.mu);
        assert_eq!(sample_latent(&d, &[1.0, 1.0]).unwrap(), vec![2.0, -1.0]);
    }

    #[test]
    fn kl_closed_form() {
        let zero = LatentDistribution {
            mu: vec![0.0; 4],
            logvar: vec![0.0; 4],
        };
        assert_eq!(kl_gaussian(&zero), 0.0);
        let one = LatentDistribution {
            mu: vec![1.0],
            logvar: vec![0.0],
        };
        assert_eq!(kl_gaussian(&one), 0.5);
    }

    #[test]
    fn reconstruction_examples() {
        assert_eq!(reconstruction_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(reconstruction_loss(&[1.0, 0.0], &[0.0, 0.0]).unwrap(), 0.5);
    }

    #[test]
    fn zero_head_is_uniform() {
        let mut m = tiny();
        m.head.weights.data_mut().fill(0.0);
        assert_eq!(m.classify_from_latent(&[3.0, -1.0]).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn head_hand_computed() {
        let mut m = tiny();
        m.head.weights = Matrix::identity(2);
        let p = m.classify_from_latent(&[2.0, 0.0]).unwrap();
        assert!((p[0] - 0.8808).abs() < 1e-4 && (p[1] - 0.1192).abs() < 1e-4);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn flat_params_round_trip() {
        let mut m = tiny();
        let flat: Vec<f64> = (0..m.flat_params().len()).map(|k| k as f64 * 0.01).collect();
        m.set_flat_params(&flat).unwrap();
        assert_eq!(m.flat_params(), flat);
        assert!(m.set_flat_params(&flat[1..]).is_err());
    }

    #[test]
    fn arch_round_trips() {
        let m = tiny();
        assert_eq!(m.arch().hidden, vec![4]);
        assert_eq!((m.input_dim(), m.latent_dim(), m.private_classes()), (3, 2, 2));
    }
}
