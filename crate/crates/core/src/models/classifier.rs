use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Embedding;
use crate::nn::{argmax, Activation, Mlp, Tape, Var};
use crate::{Error, Result};

/// Which label of an [`Embedding`] a classifier predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeKind {
    Public,
    Private,
}

impl AttributeKind {
    pub fn label(self, e: &Embedding) -> usize {
        match self {
            AttributeKind::Public => e.public,
            AttributeKind::Private => e.private,
        }
    }
}

/// MLP `D → hidden… → C` with a softmax output.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    pub mlp: Mlp,
    pub kind: AttributeKind,
    pub seed: u64,
}

impl ClassifierModel {
    pub fn new<R: Rng + ?Sized>(
        input_dim: usize,
        hidden: &[usize],
        classes: usize,
        kind: AttributeKind,
        rng: &mut R,
    ) -> Result<Self> {
        if input_dim == 0 || classes == 0 || hidden.contains(&0) {
            return Err(Error::invalid("degenerate classifier sizes"));
        }
        let mut sizes = vec![input_dim];
        sizes.extend(hidden);
        sizes.push(classes);
        Ok(Self {
            mlp: Mlp::glorot(&sizes, Activation::Relu, Activation::Softmax, rng),
            kind,
            seed: 0,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.mlp.input_dim()
    }

    pub fn classes(&self) -> usize {
        self.mlp.output_dim()
    }

    pub fn hidden(&self) -> Vec<usize> {
        let n = self.mlp.layers.len();
        self.mlp.layers[..n.saturating_sub(1)]
            .iter()
            .map(|l| l.output_dim())
            .collect()
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.mlp.forward(x)
    }

    /// Argmax class; ties go to the lower index.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.predict_proba(x)?))
    }

    pub fn record(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        self.mlp.record(tape, x, 0)
    }

    /// Fraction of `data` whose label of this classifier's kind is predicted.
    pub fn accuracy(&self, data: &[Embedding]) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::invalid("accuracy over an empty set"));
        }
        let mut hits = 0usize;
        for e in data {
            if self.predict(&e.x)? == self.kind.label(e) {
                hits += 1;
            }
        }
        Ok(hits as f64 / data.len() as f64)
    }
}
