use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd { lr: f64 },
    Adam { lr: f64, beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn adam(lr: f64) -> Self {
        OptimizerKind::Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl Default for OptimizerKind {
    fn default() -> Self {
        Self::adam(1e-3)
    }
}

#[derive(Debug, Clone, Default)]
struct Moments {
    first: Vec<f64>,
    second: Vec<f64>,
    steps: u64,
}

/// Optimizer with per-tensor moment accumulators.
///
/// A tensor whose gradient is identically zero is skipped entirely: its
/// values, moments and step count stay as they were.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    kind: OptimizerKind,
    moments: Vec<Moments>,
    steps: u64,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind) -> Self {
        Self {
            kind,
            moments: Vec::new(),
            steps: 0,
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    /// Number of `step` calls made so far.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::shape(format!(
                "{} parameter tensors but {} gradients",
                params.len(),
                grads.len()
            )));
        }
        for (k, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != g.len() {
                return Err(Error::shape(format!(
                    "tensor {k}: {} parameters but {} gradient entries",
                    p.len(),
                    g.len()
                )));
            }
        }
        if self.moments.is_empty() {
            self.moments = params.iter().map(|_| Moments::default()).collect();
        } else if self.moments.len() != params.len() {
            return Err(Error::shape("parameter set changed between optimizer steps"));
        }
        self.steps += 1;

        for ((p, g), state) in params.iter_mut().zip(grads).zip(&mut self.moments) {
            if g.iter().all(|&v| v == 0.0) {
                continue;
            }
            match self.kind {
                OptimizerKind::Sgd { lr } => {
                    for (w, d) in p.iter_mut().zip(g.iter()) {
                        *w -= lr * d;
                    }
                }
                OptimizerKind::Adam { lr, beta1, beta2, eps } => {
                    if state.first.is_empty() {
                        state.first = vec![0.0; p.len()];
                        state.second = vec![0.0; p.len()];
                    }
                    state.steps += 1;
                    let t = state.steps as i32;
                    let c1 = 1.0 - beta1.powi(t);
                    let c2 = 1.0 - beta2.powi(t);
                    for (((w, &d), m), v) in p.iter_mut().zip(g.iter()).zip(&mut state.first).zip(&mut state.second) {
                        *m = beta1 * *m + (1.0 - beta1) * d;
                        *v = beta2 * *v + (1.0 - beta2) * d * d;
                        let m_hat = *m / c1;
                        let v_hat = *v / c2;
                        *w -= lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}
