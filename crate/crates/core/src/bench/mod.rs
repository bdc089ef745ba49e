//! Per-stage latency of the anonymization pipeline against a real-time
//! budget.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::pipeline::{Anonymizer, Stage, StageObserver};
use crate::{Error, Result};

/// Time between consecutive windows: `1000 · stride / rate` milliseconds.
pub fn time_budget_ms(sampling_rate_hz: f64, stride: usize) -> f64 {
    1000.0 * stride as f64 / sampling_rate_hz
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetSpec {
    pub sampling_rate_hz: f64,
    pub stride: usize,
    pub budget_ms: f64,
}

impl BudgetSpec {
    pub fn new(sampling_rate_hz: f64, stride: usize) -> Result<Self> {
        if !(sampling_rate_hz > 0.0 && sampling_rate_hz.is_finite()) || stride == 0 {
            return Err(Error::invalid(format!(
                "rate {sampling_rate_hz} Hz and stride {stride} do not define a budget"
            )));
        }
        Ok(Self {
            sampling_rate_hz,
            stride,
            budget_ms: time_budget_ms(sampling_rate_hz, stride),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchMode {
    /// One embedding per call.
    Single,
    /// Embeddings handed over in groups of `batch_size`; per-embedding times
    /// are the group time divided by its size.
    Batch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub warmup: usize,
    pub repetitions: usize,
    pub mode: BenchMode,
    pub batch_size: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            warmup: 100,
            repetitions: 3,
            mode: BenchMode::Single,
            batch_size: 256,
        }
    }
}

/// Timing of one stage (or of the whole pipeline).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageStats {
    pub name: String,
    /// Timed embeddings over all repetitions.
    pub count: usize,
    /// Seconds for one pass over the input, averaged over repetitions.
    pub total_s: f64,
    pub mean_s: f64,
    pub p50_s: f64,
    pub p99_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub mode: BenchMode,
    pub batch_size: usize,
    pub embeddings: usize,
    pub repetitions: usize,
    pub stages: Vec<StageStats>,
    pub total: StageStats,
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    // Nearest rank.
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

fn stats(name: &str, samples: &[f64], repetitions: usize) -> StageStats {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let sum: f64 = samples.iter().sum();
    StageStats {
        name: name.to_owned(),
        count: samples.len(),
        total_s: sum / repetitions as f64,
        mean_s: sum / samples.len() as f64,
        p50_s: percentile(&sorted, 0.50),
        p99_s: percentile(&sorted, 0.99),
    }
}

impl TimingReport {
    /// `|total − Σ stage means| / total`.
    pub fn decomposition_gap(&self) -> f64 {
        let parts: f64 = self.stages.iter().map(|s| s.mean_s).sum();
        (self.total.mean_s - parts).abs() / self.total.mean_s
    }

    /// Columns: Model, Batch, Type, nb. Embeddings, Time (s), Time/Embedding (s).
    pub fn render(&self) -> String {
        let kind = match self.mode {
            BenchMode::Single => "single",
            BenchMode::Batch => "batch",
        };
        let batch = match self.mode {
            BenchMode::Single => 1,
            BenchMode::Batch => self.batch_size,
        };
        let mut s = format!(
            "{:<18} {:>6} {:>7} {:>15} {:>12} {:>16} {:>12} {:>12}\n",
            "Model", "Batch", "Type", "nb. Embeddings", "Time (s)", "Time/Embedding", "p50 (s)", "p99 (s)"
        );
        for st in self.stages.iter().chain(std::iter::once(&self.total)) {
            s.push_str(&format!(
                "{:<18} {:>6} {:>7} {:>15} {:>12.6} {:>16.3e} {:>12.3e} {:>12.3e}\n",
                st.name, batch, kind, self.embeddings, st.total_s, st.mean_s, st.p50_s, st.p99_s
            ));
        }
        s
    }
}

struct Accumulate([Duration; 5]);

impl StageObserver for Accumulate {
    fn stage(&mut self, stage: Stage, elapsed: Duration) {
        self.0[stage as usize] += elapsed;
    }
}

/// Times the pipeline over `embeddings`, `repetitions` times after
/// `warmup` untimed calls.
pub fn benchmark_pipeline(
    anonymizer: &mut Anonymizer<'_>,
    embeddings: &[Vec<f64>],
    config: &BenchConfig,
) -> Result<TimingReport> {
    if embeddings.is_empty() {
        return Err(Error::invalid("benchmark needs at least one embedding"));
    }
    if config.repetitions == 0 || config.batch_size == 0 {
        return Err(Error::invalid("repetitions and batch size must be at least 1"));
    }
    for k in 0..config.warmup {
        anonymizer.anonymize(&embeddings[k % embeddings.len()])?;
    }
    let group = match config.mode {
        BenchMode::Single => 1,
        BenchMode::Batch => config.batch_size,
    };
    let mut per_stage: Vec<Vec<f64>> = vec![Vec::new(); Stage::ALL.len()];
    let mut total = Vec::new();
    for _ in 0..config.repetitions {
        for chunk in embeddings.chunks(group) {
            let mut acc = Accumulate([Duration::ZERO; 5]);
            let t = Instant::now();
            for x in chunk {
                anonymizer.anonymize_observed(x, &mut acc)?;
            }
            let elapsed = t.elapsed().as_secs_f64() / chunk.len() as f64;
            for (s, d) in per_stage.iter_mut().zip(acc.0) {
                let v = d.as_secs_f64() / chunk.len() as f64;
                s.extend(std::iter::repeat_n(v, chunk.len()));
            }
            total.extend(std::iter::repeat_n(elapsed, chunk.len()));
        }
    }
    Ok(TimingReport {
        mode: config.mode,
        batch_size: group,
        embeddings: embeddings.len(),
        repetitions: config.repetitions,
        stages: Stage::ALL
            .iter()
            .zip(&per_stage)
            .map(|(s, v)| stats(s.name(), v, config.repetitions))
            .collect(),
        total: stats("total", &total, config.repetitions),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealtimeVerdict {
    pub pass: bool,
    pub p99_ms: f64,
    pub budget_ms: f64,
    /// `budget − p99`; negative on failure.
    pub margin_ms: f64,
}

/// Passes when the p99 per-embedding total is strictly below the budget.
pub fn check_realtime(report: &TimingReport, budget: &BudgetSpec) -> RealtimeVerdict {
    let p99_ms = report.total.p99_s * 1000.0;
    RealtimeVerdict {
        pass: p99_ms < budget.budget_ms,
        p99_ms,
        budget_ms: budget.budget_ms,
        margin_ms: budget.budget_ms - p99_ms,
    }
}

/// Pins the calling thread to the core it is running on. Returns whether
/// pinning took effect.
#[cfg(target_os = "linux")]
pub fn pin_current_thread() -> bool {
    // SAFETY: `cpu_set_t` is plain data; the calls only read and write the
    // set we own and affect the calling thread.
    unsafe {
        let cpu = libc::sched_getcpu();
        if cpu < 0 {
            return false;
        }
        let mut set: libc::cpu_set_t = std::mem::zeroed();
        libc::CPU_SET(cpu as usize, &mut set);
        libc::sched_setaffinity(0, std::mem::size_of::<libc::cpu_set_t>(), &set) == 0
    }
}

#[cfg(not(target_os = "linux"))]
pub fn pin_current_thread() -> bool {
    false
}
