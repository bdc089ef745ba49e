//! One PASS/FAIL line per acceptance criterion. Runs without the libtest
//! harness so the lines come out in order; exits non-zero if any fails.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use common::{oracle_item, random_matrix, random_model, train_default, Trained};
use latent_anon::attack::{evaluate_utility_privacy, run_reid_attack, AttackConfig, AttackReport, Obfuscator};
use latent_anon::bench::{benchmark_pipeline, check_realtime, time_budget_ms, BenchConfig, BudgetSpec};
use latent_anon::data::csv::{load_csv, CsvSchema};
use latent_anon::data::{
    by_public_class, normalize, trial_split, window_embeddings, Embedding, NormStats, SensorSeries, SynthOracle,
};
use latent_anon::models::{
    augmented_loss, augmented_loss_gradients, kl_gaussian, reconstruction_loss, sample_latent, train_classifier,
    train_vae, vae_seed, AttributeKind, ClassifierConfig, ClassifierModel, LatentDistribution, VaeConfig, VaeModel,
};
use latent_anon::nn::{grad_check, Matrix, Probe};
use latent_anon::pipeline::{build_mean_table, load_models, save_models, Anonymizer, LatentNoise, ModelRegistry};
use latent_anon::transform::{
    apply_transfer, modify_deterministic, Bijection, FixedCoin, LabeledLatent, MeanLatentTable, ModifyMode,
    ModifyPolicy, SecureSource,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

type Outcome = Result<String, String>;

macro_rules! check {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn within(limit: Duration, start: Instant) -> Outcome {
    let took = start.elapsed();
    check!(
        took < limit,
        "took {:.1} s, limit {} s",
        took.as_secs_f64(),
        limit.as_secs()
    );
    Ok(format!("{:.1} s", took.as_secs_f64()))
}

struct Fixture {
    trained: Trained,
    setup: Duration,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let t = Instant::now();
        let trained = train_default();
        Fixture {
            trained,
            setup: t.elapsed(),
        }
    })
}

fn gradient_fidelity() -> Outcome {
    let start = Instant::now();
    let reports: Vec<_> = (0..100u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + k);
            let model = random_model(k, 6, &[5, 4], 3, 3);
            let x = random_matrix(&mut rng, 4, 6);
            let noise = random_matrix(&mut rng, 4, 3);
            let labels: Vec<usize> = (0..4).map(|_| rng.random_range(0..3)).collect();
            let alpha = rng.random_range(0.1..2.0);
            let beta = rng.random_range(0.1..2.0);
            let (_, grads, _) = augmented_loss_gradients(&model, &x, &labels, &noise, alpha, beta)?;
            let mut probe = model.clone();
            grad_check(
                |p| {
                    probe.set_flat_params(p)?;
                    let (b, _, kinks) = augmented_loss_gradients(&probe, &x, &labels, &noise, alpha, beta)?;
                    Ok(Probe { value: b.total, kinks })
                },
                &model.flat_params(),
                &grads.flatten(),
                1e-6,
            )
        })
        .collect::<latent_anon::Result<_>>()
        .map_err(|e| e.to_string())?;
    let worst = reports.iter().map(|r| r.max_rel_error).fold(0.0, f64::max);
    let checked: usize = reports.iter().map(|r| r.checked).sum();
    let skipped: usize = reports.iter().map(|r| r.skipped).sum();
    check!(worst < 1e-5, "max relative error {worst:e}");
    check!(
        checked > 10 * skipped,
        "{checked} coordinates checked, {skipped} skipped at kinks"
    );
    let t = within(Duration::from_secs(60), start)?;
    Ok(format!(
        "max rel err {worst:.2e} over 100 points, {checked} coords ({skipped} at kinks), {t}"
    ))
}

fn kl_correctness() -> Outcome {
    let start = Instant::now();
    check!(
        kl_gaussian(&LatentDistribution {
            mu: vec![0.0],
            logvar: vec![0.0]
        }) == 0.0,
        "kl(0, 0) is not 0"
    );
    let half = kl_gaussian(&LatentDistribution {
        mu: vec![1.0],
        logvar: vec![0.0],
    });
    check!(half == 0.5, "kl(mu=1, sigma=1) = {half}");
    let worst = (0..20u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(2000 + k);
            let j = rng.random_range(1..=4);
            let sign = |r: &mut ChaCha8Rng| if r.random_bool(0.5) { 1.0 } else { -1.0 };
            let dist = LatentDistribution {
                mu: (0..j).map(|_| sign(&mut rng) * rng.random_range(1.0..2.0)).collect(),
                logvar: (0..j).map(|_| rng.random_range(-1.5..1.5)).collect(),
            };
            let n = 1_000_000;
            let mut acc = 0.0;
            let mut e = vec![0.0; j];
            for _ in 0..n {
                for v in e.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
                let z = sample_latent(&dist, &e).unwrap();
                for d in 0..j {
                    // log q(z) − log p(z); the 2π terms cancel.
                    acc += -0.5 * dist.logvar[d] - 0.5 * e[d] * e[d] + 0.5 * z[d] * z[d];
                }
            }
            let exact = kl_gaussian(&dist);
            (acc / n as f64 - exact).abs() / exact
        })
        .reduce(|| 0.0, f64::max);
    check!(worst < 0.01, "Monte Carlo relative error {worst:.4}");
    let t = within(Duration::from_secs(60), start)?;
    Ok(format!(
        "worst MC rel err {:.3}% over 20 pairs, exact cases hold, {t}",
        100.0 * worst
    ))
}

fn loss_reduction() -> Outcome {
    for seed in 0..10 {
        let model = random_model(300 + seed, 5, &[4, 3], 3, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_matrix(&mut rng, 6, 5);
        let noise = random_matrix(&mut rng, 6, 3);
        let labels: Vec<usize> = (0..6).map(|k| k % 2).collect();
        let b = augmented_loss(&model, &x, &labels, &noise, 0.0, 1.0).map_err(|e| e.to_string())?;
        let (mut r, mut k, mut elbo) = (0.0, 0.0, 0.0);
        for n in 0..6 {
            let (rr, kk, _) = oracle_item(&model, x.row(n), noise.row(n), labels[n]);
            r += rr;
            k += kk;
            let d = model.encode(x.row(n)).unwrap();
            let z = sample_latent(&d, noise.row(n)).unwrap();
            elbo += reconstruction_loss(x.row(n), &model.decode(&z).unwrap()).unwrap() + kl_gaussian(&d);
        }
        check!(
            (b.reconstruction - r).abs() < 1e-10,
            "reconstruction {} vs {r}",
            b.reconstruction
        );
        check!((b.kl - k).abs() < 1e-10, "kl {} vs {k}", b.kl);
        check!((b.total - (r + k)).abs() < 1e-10, "total {} vs {}", b.total, r + k);
        check!(
            (b.total - elbo).abs() < 1e-10,
            "total {} vs negative ELBO {elbo}",
            b.total
        );
    }

    let data: Vec<Embedding> = (0..32)
        .map(|k| Embedding {
            x: (0..5).map(|d| ((k * 7 + d) as f64 * 0.31).sin()).collect(),
            public: 0,
            private: k % 2,
            subject_id: k as u32,
            trial: 0,
            origin: 0,
        })
        .collect();
    let cfg = VaeConfig {
        alpha: 0.0,
        hidden: vec![4],
        latent_dim: 3,
        epochs: 0,
        batch_size: 32,
        lr: 1e-2,
        ..VaeConfig::default()
    };
    let before = train_vae(&data, 2, &cfg).map_err(|e| e.to_string())?.model;
    let after = train_vae(&data, 2, &VaeConfig { epochs: 1, ..cfg })
        .map_err(|e| e.to_string())?
        .model;
    let bits = |m: &VaeModel| m.head.weights.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    check!(
        before.encoder != after.encoder,
        "the training step did not move the encoder"
    );
    check!(bits(&before) == bits(&after), "head changed under alpha = 0");
    Ok("alpha=0 matches negative ELBO term-by-term within 1e-10; head bit-unchanged after a step".into())
}

fn random_table(rng: &mut ChaCha8Rng, u: usize, m: usize, j: usize) -> MeanLatentTable {
    let latents: Vec<LabeledLatent> = (0..u * m * 3)
        .map(|k| LabeledLatent {
            z: (0..j).map(|_| rng.random_range(-10.0..10.0)).collect(),
            public: (k / m) % u,
            private: k % m,
        })
        .collect();
    MeanLatentTable::compute(&latents, u, m).unwrap()
}

fn transfer_algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let j = rng.random_range(1..=16);
        let z: Vec<f64> = (0..j).map(|_| rng.random_range(-20.0..20.0)).collect();

        let binary = random_table(&mut rng, 3, 2, j);
        let u = rng.random_range(0..3);
        let i = rng.random_range(0..2);
        let flip = modify_deterministic(i, &Bijection::cycle(2)).unwrap();
        check!(
            modify_deterministic(flip, &Bijection::cycle(2)).unwrap() == i,
            "binary flip is not an involution"
        );
        let back = apply_transfer(&apply_transfer(&z, &binary, u, i, flip).unwrap(), &binary, u, flip, i).unwrap();
        worst = back.iter().zip(&z).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
        check!(
            apply_transfer(&z, &binary, u, i, i).unwrap() == z,
            "i' == i is not the identity"
        );

        let m = rng.random_range(3..=6);
        let table = random_table(&mut rng, 2, m, j);
        let cyc = Bijection::cycle(m);
        let (mut cur, mut i) = (z.clone(), rng.random_range(0..m));
        for _ in 0..m {
            let next = modify_deterministic(i, &cyc).unwrap();
            cur = apply_transfer(&cur, &table, 1, i, next).unwrap();
            i = next;
        }
        worst = cur.iter().zip(&z).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
    }
    check!(worst < 1e-12, "round trip error {worst:e}");
    Ok(format!(
        "1000 latents: involution and cycle errors <= {worst:.1e}; i'==i exact"
    ))
}

fn windowing_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let t = rng.random_range(0..300);
        let w = rng.random_range(1..=64);
        let s = rng.random_range(1..=32);
        let c = rng.random_range(1..=4);
        let series = SensorSeries {
            subject_id: 3,
            trial: 1,
            samples: Matrix::from_vec(t, c, (0..t * c).map(|_| rng.random()).collect()).unwrap(),
            sampling_rate_hz: 50.0,
            public: 1,
            private: 0,
            attributes: BTreeMap::new(),
        };
        let got = window_embeddings(&series, w, s).map_err(|e| e.to_string())?;
        let mut naive = Vec::new();
        let mut start = 0;
        while start + w <= t {
            let mut x = Vec::new();
            for row in start..start + w {
                for ch in 0..c {
                    x.push(series.samples.get(row, ch));
                }
            }
            naive.push((start, x));
            start += s;
        }
        check!(
            got.len() == naive.len(),
            "(T={t}, W={w}, S={s}): {} windows, expected {}",
            got.len(),
            naive.len()
        );
        for (e, (origin, x)) in got.iter().zip(&naive) {
            check!(
                e.origin == *origin && &e.x == x,
                "(T={t}, W={w}, S={s}) window at {origin} differs"
            );
            check!(
                (e.public, e.private, e.subject_id, e.trial) == (1, 0, 3, 1),
                "labels not carried"
            );
        }
    }
    let series = SensorSeries {
        subject_id: 0,
        trial: 0,
        samples: Matrix::zeros(128 + 10 * 9, 1),
        sampling_rate_hz: 50.0,
        public: 0,
        private: 0,
        attributes: BTreeMap::new(),
    };
    let w = window_embeddings(&series, 128, 10).unwrap();
    check!(
        w.len() == 10 && w.windows(2).all(|p| p[1].origin - p[0].origin == 10),
        "(128, 10) cadence broken"
    );
    let (b50, b20) = (time_budget_ms(50.0, 10), time_budget_ms(20.0, 10));
    check!(b50 == 200.0 && b20 == 500.0, "budgets {b50} ms and {b20} ms");
    Ok("1000 (T, W, S) triples match naive enumeration; (128, 10) budgets 200 ms @ 50 Hz, 500 ms @ 20 Hz".into())
}

fn anonymize_all(reg: &ModelRegistry, coins: FixedCoin, xs: &[Embedding]) -> Vec<Vec<f64>> {
    let mut a = Anonymizer::with_coins(reg, LatentNoise::Sampled, 11, Box::new(coins)).unwrap();
    xs.iter().map(|e| a.anonymize(&e.x).unwrap().0).collect()
}

fn modify_frequency() -> Outcome {
    let policy = ModifyPolicy::new(ModifyMode::Probabilistic, 2);
    let mut src = SecureSource::new().map_err(|e| e.to_string())?;
    let n = 100_000;
    let mut applied = 0usize;
    for k in 0..n {
        applied += policy.modify(k % 2, &mut src).map_err(|e| e.to_string())?.applied as usize;
    }
    let f = applied as f64 / n as f64;
    check!((0.495..=0.505).contains(&f), "applied fraction {f}");

    let t = &fixture().trained;
    let xs = &t.set.test[..400];
    let prob = t.registry_with(ModifyMode::Probabilistic);
    let det = anonymize_all(&t.registry_with(ModifyMode::Deterministic), FixedCoin::Never, xs);
    let id = anonymize_all(&t.registry_with(ModifyMode::Identity), FixedCoin::Always, xs);
    check!(
        anonymize_all(&prob, FixedCoin::Always, xs) == det,
        "always-coin differs from deterministic"
    );
    check!(
        anonymize_all(&prob, FixedCoin::Never, xs) == id,
        "never-coin differs from identity"
    );
    Ok(format!(
        "applied fraction {f:.4} over 1e5 secure draws; always/never coins reproduce det/identity"
    ))
}

struct Scores {
    public: f64,
    private: f64,
    oracle_public: f64,
    oracle_private: f64,
}

fn score(t: &Trained, mode: ModifyMode) -> Scores {
    let reg = t.registry_with(mode);
    let mut anon = Anonymizer::new(&reg, LatentNoise::Sampled, 21).unwrap();
    let oracle = SynthOracle::new(t.set.config.clone(), common::WINDOW);
    let (mut p, mut q, mut op, mut oq) = (0, 0, 0, 0);
    for e in &t.set.test {
        let (mut y, _) = anon.anonymize(&e.x).unwrap();
        p += (t.public.predict(&y).unwrap() == e.public) as usize;
        q += (t.private.predict(&y).unwrap() == e.private) as usize;
        t.set.stats.invert(&mut y);
        let (u, i) = oracle.classify(&y, e.origin);
        op += (u == e.public) as usize;
        oq += (i == e.private) as usize;
    }
    let n = t.set.test.len() as f64;
    Scores {
        public: p as f64 / n,
        private: q as f64 / n,
        oracle_public: op as f64 / n,
        oracle_private: oq as f64 / n,
    }
}

fn utility_privacy() -> Outcome {
    let start = Instant::now();
    let f = fixture();
    let t = &f.trained;
    check!(
        t.vaes.values().all(|v| v.latent_dim() == 8),
        "latent dimension is not 8"
    );
    let det = score(t, ModifyMode::Deterministic);
    let prob = score(t, ModifyMode::Probabilistic);
    for (who, pub_acc, priv_acc, prob_priv) in [
        ("classifier", det.public, det.private, prob.private),
        ("oracle", det.oracle_public, det.oracle_private, prob.oracle_private),
    ] {
        check!(priv_acc <= 0.25, "{who}: deterministic private accuracy {priv_acc:.3}");
        check!(pub_acc >= 0.85, "{who}: deterministic public accuracy {pub_acc:.3}");
        check!(
            (0.35..=0.65).contains(&prob_priv),
            "{who}: probabilistic private accuracy {prob_priv:.3}"
        );
    }
    let took = start.elapsed() + f.setup;
    check!(
        took < Duration::from_secs(600),
        "took {:.1} s with training",
        took.as_secs_f64()
    );
    Ok(format!(
        "det private {:.1}% (oracle {:.1}%), public {:.1}% (oracle {:.1}%); prob private {:.1}% (oracle {:.1}%); {:.1} s incl. training",
        100.0 * det.private,
        100.0 * det.oracle_private,
        100.0 * det.public,
        100.0 * det.oracle_public,
        100.0 * prob.private,
        100.0 * prob.oracle_private,
        took.as_secs_f64()
    ))
}

fn attack(t: &Trained, mode: ModifyMode, config: &AttackConfig) -> latent_anon::Result<AttackReport> {
    let reg = t.registry_with(mode);
    let reg = &reg;
    run_reid_attack(
        |seed| Ok(Box::new(Anonymizer::new(reg, LatentNoise::Sampled, seed)?) as Box<dyn Obfuscator + '_>),
        &t.set.train,
        &t.set.test,
        t.set.config.private_classes,
        &format!("{mode:?}"),
        config,
    )
}

fn reidentification() -> Outcome {
    let start = Instant::now();
    let f = fixture();
    let config = AttackConfig::default();
    check!(config.runs == 20, "default attack runs {}", config.runs);
    let det = attack(&f.trained, ModifyMode::Deterministic, &config).map_err(|e| e.to_string())?;
    let prob = attack(&f.trained, ModifyMode::Probabilistic, &config).map_err(|e| e.to_string())?;
    check!(det.mean > 0.85, "deterministic attacker mean {:.3}", det.mean);
    check!(det.mean - prob.mean >= 0.10, "gap {:.3} - {:.3}", det.mean, prob.mean);
    let took = start.elapsed() + f.setup;
    check!(
        took < Duration::from_secs(900),
        "took {:.1} s with training",
        took.as_secs_f64()
    );
    Ok(format!(
        "20-run attacker: det {:.1}% ± {:.1}, prob {:.1}% ± {:.1}; {:.1} s incl. training",
        100.0 * det.mean,
        100.0 * det.std,
        100.0 * prob.mean,
        100.0 * prob.std,
        took.as_secs_f64()
    ))
}

fn realtime() -> Outcome {
    let t = &fixture().trained;
    let reg = t.registry_with(ModifyMode::Probabilistic);
    let mut anon = Anonymizer::new(&reg, LatentNoise::Sampled, 1).map_err(|e| e.to_string())?;
    let xs: Vec<Vec<f64>> = t.set.test.iter().map(|e| e.x.clone()).collect();
    let report = benchmark_pipeline(&mut anon, &xs, &BenchConfig::default()).map_err(|e| e.to_string())?;
    let verdict = check_realtime(&report, &BudgetSpec::new(50.0, 10).unwrap());
    let gap = report.decomposition_gap();
    check!(
        verdict.pass,
        "p99 {:.3} ms against {} ms",
        verdict.p99_ms,
        verdict.budget_ms
    );
    check!(gap < 0.10, "stage decomposition off by {:.1}%", 100.0 * gap);
    Ok(format!(
        "p99 {:.3} ms per embedding (budget {} ms), stages sum within {:.2}% of total",
        verdict.p99_ms,
        verdict.budget_ms,
        100.0 * gap
    ))
}

fn reproducibility() -> Outcome {
    let t = &fixture().trained;
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();

    let class0 = by_public_class(&t.set.train, 4).swap_remove(0);
    let cfg = VaeConfig {
        seed: vae_seed(0, 0),
        ..VaeConfig::default()
    };
    let vae = train_vae(&class0, 2, &cfg).map_err(|e| e.to_string())?;
    check!(
        bits(&vae.model.flat_params()) == bits(&t.vaes[&0].flat_params()),
        "VAE retraining differs"
    );
    let public = train_classifier(
        &t.set.train,
        AttributeKind::Public,
        4,
        &ClassifierConfig::default(),
        None,
    )
    .map_err(|e| e.to_string())?
    .model;
    check!(public == t.public, "public classifier retraining differs");

    let quick = AttackConfig {
        runs: 3,
        seed: 9,
        ..AttackConfig::default()
    };
    let a = attack(t, ModifyMode::Deterministic, &quick).map_err(|e| e.to_string())?;
    let b = attack(t, ModifyMode::Deterministic, &quick).map_err(|e| e.to_string())?;
    check!(a == b, "attack runs differ");

    let table = build_mean_table(&t.vaes, &t.set.train, 4, 2).map_err(|e| e.to_string())?;
    let bytes = table.to_bytes();
    check!(bytes == t.registry.table.to_bytes(), "mean table recomputation differs");
    let back = MeanLatentTable::from_bytes(&bytes).map_err(|e| e.to_string())?;
    check!(
        back.to_bytes() == bytes && back == table,
        "mean table round trip differs"
    );

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    save_models(dir.path(), &t.vaes, &t.public, &t.private).map_err(|e| e.to_string())?;
    let (vaes, public, private) = load_models(dir.path()).map_err(|e| e.to_string())?;
    for (u, v) in &t.vaes {
        check!(
            bits(&vaes[u].flat_params()) == bits(&v.flat_params()),
            "VAE {u} round trip differs"
        );
    }
    let cls_bits = |c: &ClassifierModel| {
        let mut buf = Vec::new();
        c.write_to(&mut buf).unwrap();
        buf
    };
    check!(
        cls_bits(&public) == cls_bits(&t.public),
        "public classifier round trip differs"
    );
    check!(
        cls_bits(&private) == cls_bits(&t.private),
        "private classifier round trip differs"
    );
    Ok("training, attack, mean table and model files reproduce bit-exactly".into())
}

/// Runs only when a MotionSense `A_DeviceMotion_data` directory is supplied.
fn motionsense() -> Option<Outcome> {
    let dir = std::env::var_os("LATENT_ANON_MOTIONSENSE_DIR")?;
    Some((|| {
        let schema = CsvSchema::motionsense();
        let series = load_csv(std::path::Path::new(&dir), &schema).map_err(|e| e.to_string())?;
        let mut all = Vec::new();
        for s in &series {
            all.extend(window_embeddings(s, 128, 10).map_err(|e| e.to_string())?);
        }
        let split = trial_split(&all, &schema.test_trials).map_err(|e| e.to_string())?;
        let stats = NormStats::fit(&split.train, schema.channels.len()).map_err(|e| e.to_string())?;
        let (train, test) = (normalize(&split.train, &stats), normalize(&split.test, &stats));
        let (u, m) = (4, 2);
        let vaes: BTreeMap<usize, VaeModel> = by_public_class(&train, u)
            .par_iter()
            .enumerate()
            .map(|(k, data)| {
                let cfg = VaeConfig {
                    seed: vae_seed(0, k),
                    ..VaeConfig::default()
                };
                train_vae(data, m, &cfg).map(|t| (k, t.model))
            })
            .collect::<latent_anon::Result<_>>()
            .map_err(|e| e.to_string())?;
        let ccfg = ClassifierConfig::default();
        let public = train_classifier(&train, AttributeKind::Public, u, &ccfg, None).map_err(|e| e.to_string())?;
        let private = train_classifier(
            &train,
            AttributeKind::Private,
            m,
            &ClassifierConfig { seed: 1, ..ccfg },
            None,
        )
        .map_err(|e| e.to_string())?;
        let reg = ModelRegistry {
            table: build_mean_table(&vaes, &train, u, m).map_err(|e| e.to_string())?,
            vaes,
            public_classifier: public.model,
            private_classifier: private.model,
            policy: ModifyPolicy::new(ModifyMode::Deterministic, m),
        };
        let mut anon = Anonymizer::new(&reg, LatentNoise::Sampled, 0).map_err(|e| e.to_string())?;
        let table = evaluate_utility_privacy(&mut anon, &test, &reg.public_classifier, &reg.private_classifier, u)
            .map_err(|e| e.to_string())?;
        let before = table.weighted.private_before.unwrap_or(0.0);
        let after = table.weighted.private_after.unwrap_or(0.0);
        check!(
            before - after > 0.5,
            "weighted private accuracy {before:.3} -> {after:.3}"
        );
        Ok(format!(
            "weighted gender accuracy {:.2}% -> {:.2}%",
            100.0 * before,
            100.0 * after
        ))
    })())
}

fn main() {
    let criteria: [(&str, fn() -> Option<Outcome>); 11] = [
        ("gradient fidelity", || Some(gradient_fidelity())),
        ("KL correctness", || Some(kl_correctness())),
        ("loss reduction", || Some(loss_reduction())),
        ("transfer algebra", || Some(transfer_algebra())),
        ("windowing oracle", || Some(windowing_oracle())),
        ("probabilistic Modify frequency", || Some(modify_frequency())),
        ("utility/privacy on synthetic oracle", || Some(utility_privacy())),
        ("re-identification ordering", || Some(reidentification())),
        ("real-time check", || Some(realtime())),
        ("reproducibility", || Some(reproducibility())),
        ("MotionSense private drop", motionsense),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Some(Err(format!("panicked: {msg}")))
        });
        match outcome {
            Some(Ok(detail)) => println!("PASS {:>2} {name}: {detail}", k + 1),
            Some(Err(detail)) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", k + 1);
            }
            None => println!("SKIP {:>2} {name}: set LATENT_ANON_MOTIONSENSE_DIR to run", k + 1),
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
