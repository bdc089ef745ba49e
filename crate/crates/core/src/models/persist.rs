//! Model files: a little-endian `u32` length, that many bytes of JSON
//! metadata, then a `LANN1` tensor container.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::classifier::{AttributeKind, ClassifierModel};
use super::vae::VaeModel;
use crate::nn::container::{find, read_tensors, write_tensors, Tensor};
use crate::nn::{Activation, DenseLayer, Mlp};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Vae,
    Classifier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub kind: ModelKind,
    /// Public class served (VAE only).
    pub public_class: Option<usize>,
    pub input_dim: usize,
    pub latent_dim: Option<usize>,
    /// `M` for a VAE head, `C` for a classifier.
    pub classes: usize,
    pub hidden: Vec<usize>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub attribute: Option<AttributeKind>,
    pub seed: u64,
}

fn write_model<W: Write>(w: W, meta: &ModelMetadata, tensors: &[Tensor]) -> Result<()> {
    let mut w = BufWriter::new(w);
    let json = serde_json::to_vec(meta)?;
    w.write_all(&(json.len() as u32).to_le_bytes())?;
    w.write_all(&json)?;
    write_tensors(&mut w, tensors)?;
    w.flush()?;
    Ok(())
}

fn read_model<R: Read>(r: R) -> Result<(ModelMetadata, Vec<Tensor>)> {
    let mut r = BufReader::new(r);
    let mut len = [0u8; 4];
    r.read_exact(&mut len)
        .map_err(|_| Error::format("model file too short"))?;
    let len = u32::from_le_bytes(len) as usize;
    if len > 1 << 20 {
        return Err(Error::format("model metadata header is implausibly large"));
    }
    let mut json = vec![0u8; len];
    r.read_exact(&mut json)
        .map_err(|_| Error::format("model metadata is truncated"))?;
    let meta = serde_json::from_slice(&json)?;
    Ok((meta, read_tensors(r)?))
}

fn layer_tensors(prefix: &str, layer: &DenseLayer, out: &mut Vec<Tensor>) {
    out.push(Tensor::from_matrix(format!("{prefix}.weight"), &layer.weights));
    out.push(Tensor::from_vector(format!("{prefix}.bias"), &layer.bias));
}

fn layer_from(tensors: &[Tensor], prefix: &str, activation: Activation) -> Result<DenseLayer> {
    let weights = find(tensors, &format!("{prefix}.weight"))?.to_matrix()?;
    let bias = find(tensors, &format!("{prefix}.bias"))?.data.clone();
    DenseLayer::new(weights, bias, activation)
}

fn mlp_from(tensors: &[Tensor], prefix: &str, layers: usize, hidden: Activation, last: Activation) -> Result<Mlp> {
    let layers = (0..layers)
        .map(|k| {
            let act = if k + 1 == layers { last } else { hidden };
            layer_from(tensors, &format!("{prefix}.{k}"), act)
        })
        .collect::<Result<Vec<_>>>()?;
    Mlp::new(layers)
}

impl VaeModel {
    pub fn metadata(&self) -> ModelMetadata {
        let arch = self.arch();
        ModelMetadata {
            kind: ModelKind::Vae,
            public_class: Some(self.public_class),
            input_dim: arch.input_dim,
            latent_dim: Some(arch.latent_dim),
            classes: arch.private_classes,
            hidden: arch.hidden,
            alpha: Some(self.alpha),
            beta: Some(self.beta),
            attribute: Some(AttributeKind::Private),
            seed: self.seed,
        }
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        let mut t = Vec::new();
        for (k, l) in self.encoder.layers.iter().enumerate() {
            layer_tensors(&format!("encoder.{k}"), l, &mut t);
        }
        layer_tensors("mu", &self.mu_head, &mut t);
        layer_tensors("logvar", &self.logvar_head, &mut t);
        for (k, l) in self.decoder.layers.iter().enumerate() {
            layer_tensors(&format!("decoder.{k}"), l, &mut t);
        }
        layer_tensors("head", &self.head, &mut t);
        write_model(w, &self.metadata(), &t)
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let (meta, t) = read_model(r)?;
        if meta.kind != ModelKind::Vae {
            return Err(Error::format("model file does not hold a VAE"));
        }
        let n = meta.hidden.len();
        let model = Self {
            public_class: meta.public_class.unwrap_or(0),
            encoder: mlp_from(&t, "encoder", n, Activation::Relu, Activation::Relu)?,
            mu_head: layer_from(&t, "mu", Activation::Identity)?,
            logvar_head: layer_from(&t, "logvar", Activation::Identity)?,
            decoder: mlp_from(&t, "decoder", n + 1, Activation::Relu, Activation::Identity)?,
            head: layer_from(&t, "head", Activation::Softmax)?,
            alpha: meta.alpha.unwrap_or(0.0),
            beta: meta.beta.unwrap_or(0.0),
            seed: meta.seed,
        };
        if model.arch().hidden != meta.hidden
            || model.input_dim() != meta.input_dim
            || Some(model.latent_dim()) != meta.latent_dim
            || model.private_classes() != meta.classes
        {
            return Err(Error::format("VAE tensors disagree with the metadata header"));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_to(File::create(path)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(File::open(path)?)
    }
}

impl ClassifierModel {
    pub fn metadata(&self) -> ModelMetadata {
        ModelMetadata {
            kind: ModelKind::Classifier,
            public_class: None,
            input_dim: self.input_dim(),
            latent_dim: None,
            classes: self.classes(),
            hidden: self.hidden(),
            alpha: None,
            beta: None,
            attribute: Some(self.kind),
            seed: self.seed,
        }
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        let mut t = Vec::new();
        for (k, l) in self.mlp.layers.iter().enumerate() {
            layer_tensors(&format!("mlp.{k}"), l, &mut t);
        }
        write_model(w, &self.metadata(), &t)
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let (meta, t) = read_model(r)?;
        if meta.kind != ModelKind::Classifier {
            return Err(Error::format("model file does not hold a classifier"));
        }
        let mlp = mlp_from(&t, "mlp", meta.hidden.len() + 1, Activation::Relu, Activation::Softmax)?;
        let model = Self {
            mlp,
            kind: meta.attribute.unwrap_or(AttributeKind::Private),
            seed: meta.seed,
        };
        if model.input_dim() != meta.input_dim || model.classes() != meta.classes {
            return Err(Error::format("classifier tensors disagree with the metadata header"));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_to(File::create(path)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(File::open(path)?)
    }
}
