use crate::{Error, Result};

/// Weight group: `≤ 70 kg → 0`, `(70, 90] kg → 1`, `> 90 kg → 2`.
pub fn bin_weight(kg: f64) -> Result<usize> {
    if !(kg > 0.0) || !kg.is_finite() {
        return Err(Error::invalid(format!("weight must be positive, got {kg}")));
    }
    Ok(if kg <= 70.0 {
        0
    } else if kg <= 90.0 {
        1
    } else {
        2
    })
}
