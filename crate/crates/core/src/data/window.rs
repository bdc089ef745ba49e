use super::series::{Embedding, SensorSeries};
use crate::{Error, Result};

/// Number of windows of length `window` at `stride` over `len` samples.
pub fn window_count(len: usize, window: usize, stride: usize) -> usize {
    if window == 0 || stride == 0 || len < window {
        0
    } else {
        (len - window) / stride + 1
    }
}

/// Slides a `window`-sample window over the series with the given stride.
///
/// Window `k` covers rows `[k·stride, k·stride + window)`. A series shorter
/// than the window yields nothing.
pub fn window_embeddings(series: &SensorSeries, window: usize, stride: usize) -> Result<Vec<Embedding>> {
    if window == 0 || stride == 0 {
        return Err(Error::invalid(format!(
            "window ({window}) and stride ({stride}) must be at least 1"
        )));
    }
    let c = series.channels();
    let data = series.samples.data();
    let out = (0..window_count(series.len(), window, stride))
        .map(|k| {
            let origin = k * stride;
            Embedding {
                x: data[origin * c..(origin + window) * c].to_vec(),
                public: series.public,
                private: series.private,
                subject_id: series.subject_id,
                trial: series.trial,
                origin,
            }
        })
        .collect();
    Ok(out)
}
