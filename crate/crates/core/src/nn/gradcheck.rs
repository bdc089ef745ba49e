use crate::{Error, Result};

/// One evaluation of the function under check.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub value: f64,
    /// Relu activity pattern (see [`super::Tape::relu_pattern`]); empty for
    /// smooth functions.
    pub kinks: Vec<bool>,
}

impl Probe {
    pub fn smooth(value: f64) -> Self {
        Self {
            value,
            kinks: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    /// `max |analytic − numeric| / max(1, |numeric|)` over checked coordinates.
    pub max_rel_error: f64,
    pub checked: usize,
    /// Coordinates whose probes straddled a relu kink.
    pub skipped: usize,
}

/// Central-difference check of `analytic` against `f` at `params`.
///
/// A coordinate is skipped when the relu pattern at either probe differs from
/// the one at `params`, since the function is not differentiable across it.
pub fn grad_check<F>(mut f: F, params: &[f64], analytic: &[f64], eps: f64) -> Result<GradCheckReport>
where
    F: FnMut(&[f64]) -> Result<Probe>,
{
    if params.len() != analytic.len() {
        return Err(Error::shape(format!(
            "{} parameters but {} analytic gradient entries",
            params.len(),
            analytic.len()
        )));
    }
    if !(1e-6..=1e-4).contains(&eps) {
        return Err(Error::invalid(format!("probe step {eps} outside [1e-6, 1e-4]")));
    }
    let center = f(params)?;
    let mut point = params.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        checked: 0,
        skipped: 0,
    };
    for k in 0..params.len() {
        point[k] = params[k] + eps;
        let plus = f(&point)?;
        point[k] = params[k] - eps;
        let minus = f(&point)?;
        point[k] = params[k];
        if !plus.value.is_finite() || !minus.value.is_finite() {
            return Err(Error::NonFinite(format!("probe around coordinate {k}")));
        }
        if plus.kinks != center.kinks || minus.kinks != center.kinks {
            report.skipped += 1;
            continue;
        }
        let numeric = (plus.value - minus.value) / (2.0 * eps);
        let err = (analytic[k] - numeric).abs() / numeric.abs().max(1.0);
        report.max_rel_error = report.max_rel_error.max(err);
        report.checked += 1;
    }
    Ok(report)
}
