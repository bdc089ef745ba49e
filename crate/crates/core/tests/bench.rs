use std::collections::BTreeMap;

use latent_anon::bench::{benchmark_pipeline, check_realtime, pin_current_thread, BenchConfig, BenchMode, BudgetSpec};
use latent_anon::models::{AttributeKind, ClassifierModel, VaeArch, VaeModel};
use latent_anon::pipeline::{Anonymizer, LatentNoise, ModelRegistry};
use latent_anon::transform::{FixedCoin, MeanCell, MeanLatentTable, ModifyMode, ModifyPolicy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Untrained desk-size models; timing does not depend on the weights.
fn registry(d: usize, u: usize, m: usize) -> ModelRegistry {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let arch = VaeArch::desk(d, m);
    let vaes: BTreeMap<usize, VaeModel> = (0..u)
        .map(|k| (k, VaeModel::new(&arch, k, &mut rng).unwrap()))
        .collect();
    let cells = (0..u * m)
        .map(|_| {
            Some(MeanCell {
                mean: (0..arch.latent_dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
                count: 10,
            })
        })
        .collect();
    ModelRegistry {
        vaes,
        public_classifier: ClassifierModel::new(d, &[64, 32], u, AttributeKind::Public, &mut rng).unwrap(),
        private_classifier: ClassifierModel::new(d, &[64, 32], m, AttributeKind::Private, &mut rng).unwrap(),
        table: MeanLatentTable::from_cells(u, m, arch.latent_dim, cells).unwrap(),
        policy: ModifyPolicy::new(ModifyMode::Probabilistic, m),
    }
}

fn inputs(n: usize, d: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect()
}

fn anonymizer(reg: &ModelRegistry) -> Anonymizer<'_> {
    Anonymizer::with_coins(reg, LatentNoise::Sampled, 0, Box::new(FixedCoin::Always)).unwrap()
}

#[test]
fn single_embedding_counts() {
    let reg = registry(12, 2, 2);
    let cfg = BenchConfig {
        warmup: 0,
        repetitions: 1,
        ..BenchConfig::default()
    };
    let r = benchmark_pipeline(&mut anonymizer(&reg), &inputs(1, 12), &cfg).unwrap();
    assert_eq!(r.stages.len(), 5);
    for s in r.stages.iter().chain([&r.total]) {
        assert_eq!(s.count, 1);
        assert!(s.p50_s >= 0.0 && s.p50_s <= s.p99_s);
    }
    assert!(benchmark_pipeline(&mut anonymizer(&reg), &[], &cfg).is_err());
}

#[test]
fn totals_scale_linearly_and_decompose() {
    pin_current_thread();
    let reg = registry(96, 4, 2);
    let cfg = BenchConfig::default();
    let small = benchmark_pipeline(&mut anonymizer(&reg), &inputs(1000, 96), &cfg).unwrap();
    let large = benchmark_pipeline(&mut anonymizer(&reg), &inputs(2000, 96), &cfg).unwrap();
    let ratio = large.total.total_s / small.total.total_s;
    assert!((ratio - 2.0).abs() / 2.0 < 0.3, "ratio {ratio}");
    assert!(small.decomposition_gap() < 0.1, "{}", small.decomposition_gap());
    assert!(large.decomposition_gap() < 0.1);
    assert_eq!(small.total.count, 3000);
}

#[test]
fn batch_mode_reports_per_embedding_times() {
    let reg = registry(96, 4, 2);
    let cfg = BenchConfig {
        mode: BenchMode::Batch,
        repetitions: 1,
        ..BenchConfig::default()
    };
    let r = benchmark_pipeline(&mut anonymizer(&reg), &inputs(600, 96), &cfg).unwrap();
    assert_eq!(r.batch_size, 256);
    assert_eq!(r.total.count, 600);
    assert!(r.render().contains("batch"));
}

#[test]
fn motionsense_shaped_pipeline_is_realtime() {
    // 128 samples × 12 channels, four activities, binary gender.
    let reg = registry(128 * 12, 4, 2);
    let r = benchmark_pipeline(&mut anonymizer(&reg), &inputs(300, 128 * 12), &BenchConfig::default()).unwrap();
    let v = check_realtime(&r, &BudgetSpec::new(50.0, 10).unwrap());
    assert!(v.pass, "{v:?}");
}
