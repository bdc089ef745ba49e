//! Standalone loss and activation kernels shared by the tape and the
//! inference path.

use crate::{Error, Result};

/// Floor applied to probabilities before taking a logarithm.
pub const LOG_FLOOR: f64 = 1e-12;

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::invalid("softmax of an empty vector"));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("softmax logits".into()));
    }
    let mut out = logits.to_vec();
    softmax_in_place(&mut out);
    Ok(out)
}

pub(crate) fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

/// `−Σ y_i log(max(p_i, ε))` for a one-hot `y`.
pub fn cross_entropy(probs: &[f64], one_hot: &[f64]) -> Result<f64> {
    if probs.len() != one_hot.len() {
        return Err(Error::shape(format!(
            "cross_entropy: {} probabilities vs {} targets",
            probs.len(),
            one_hot.len()
        )));
    }
    let class = one_hot_index(one_hot)?;
    Ok(cross_entropy_index(probs, class))
}

/// Cross-entropy against an integer class label.
pub fn cross_entropy_index(probs: &[f64], class: usize) -> f64 {
    -probs[class].max(LOG_FLOOR).ln()
}

fn one_hot_index(y: &[f64]) -> Result<usize> {
    let mut hot = None;
    for (k, &v) in y.iter().enumerate() {
        if v == 1.0 {
            if hot.is_some() {
                return Err(Error::invalid("target has more than one hot entry"));
            }
            hot = Some(k);
        } else if v != 0.0 {
            return Err(Error::invalid(format!("target entry {k} is {v}, not 0 or 1")));
        }
    }
    hot.ok_or_else(|| Error::invalid("target has no hot entry"))
}

pub fn one_hot(class: usize, classes: usize) -> Vec<f64> {
    let mut v = vec![0.0; classes];
    v[class] = 1.0;
    v
}

/// Index of the largest entry; ties go to the lower index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (k, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = k;
        }
    }
    best
}
