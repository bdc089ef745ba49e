use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use latent_anon::attack::{evaluate_utility_privacy, run_reid_attack, AttackConfig, Obfuscator};
use latent_anon::bench::{benchmark_pipeline, check_realtime, pin_current_thread, BenchConfig, BenchMode, BudgetSpec};
use latent_anon::data::csv::{load_csv, CsvSchema};
use latent_anon::data::{
    by_public_class, normalize, subject_split, synth_generate, trial_split, window_embeddings, ArchiveHeader,
    DatasetSplit, EmbeddingArchive, LabelSpace, NormStats, SensorSeries, SynthConfig,
};
use latent_anon::models::{
    grid_search, train_classifier, train_vae, vae_seed, AttributeKind, ClassifierConfig, VaeConfig, VaeModel,
};
use latent_anon::pipeline::{
    build_mean_table, load_models, parse_sample_line, save_models, Anonymizer, LatentNoise, ModelRegistry,
    StreamAnonymizer,
};
use latent_anon::transform::{load_table, save_table, Bijection, FlipTarget, ModifyMode, ModifyPolicy};
use log::{info, warn};
use rayon::prelude::*;

use crate::output::{
    echo_config, load_prepared, load_train, write_atomic, write_json, Manifest, MANIFEST, TEST_ARCHIVE, TRAIN_ARCHIVE,
};
use crate::{
    AnonymizeArgs, AttackArgs, BenchArgs, EvalArgs, Flip, GridArgs, MeansArgs, Mode, Noise, PipelineArgs, PrepareArgs,
    Split, TrainArgs, TrainingArgs,
};

fn csv_writer(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    write_atomic(path, |p| {
        let mut w = BufWriter::new(File::create(p)?);
        writeln!(w, "{}", header.join(","))?;
        for r in rows {
            writeln!(w, "{}", r.join(","))?;
        }
        w.flush()?;
        Ok(())
    })
}

pub fn prepare(a: &PrepareArgs) -> Result<()> {
    echo_config(&a.out, "prepare", a)?;
    let (series, labels, schema_name, test_trials): (Vec<SensorSeries>, LabelSpace, String, Vec<u32>) =
        if a.schema == "synthetic" {
            let cfg: SynthConfig = match &a.synth {
                Some(p) => {
                    serde_json::from_str(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?
                }
                None => SynthConfig::default(),
            };
            (
                synth_generate(&cfg)?,
                cfg.label_space()?,
                "synthetic".into(),
                Vec::new(),
            )
        } else {
            let schema = match CsvSchema::preset(&a.schema) {
                Some(s) => s,
                None => CsvSchema::from_json_file(Path::new(&a.schema))
                    .with_context(|| format!("{:?} is neither a preset nor a readable schema file", a.schema))?,
            };
            let data = a.data.as_deref().context("--data is required for CSV schemas")?;
            let series = load_csv(data, &schema)?;
            (
                series,
                schema.label_space()?,
                schema.name.clone(),
                schema.test_trials.clone(),
            )
        };
    ensure!(!series.is_empty(), "no usable series found");
    let window = a.window.unwrap_or(if a.schema == "synthetic" { 32 } else { 128 });
    let channels = series[0].channels();
    let rate = series[0].sampling_rate_hz;
    let mut all = Vec::new();
    for s in &series {
        ensure!(
            s.channels() == channels,
            "subject {} has {} channels, expected {channels}",
            s.subject_id,
            s.channels()
        );
        all.extend(window_embeddings(s, window, a.stride)?);
    }
    ensure!(!all.is_empty(), "no series is at least {window} samples long");
    let (split, kind): (DatasetSplit, &str) = if test_trials.is_empty() {
        (subject_split(&all, a.fraction, a.seed)?, "subject")
    } else {
        (trial_split(&all, &test_trials)?, "trial")
    };
    ensure!(
        !split.train.is_empty() && !split.test.is_empty(),
        "split left one side empty"
    );
    for i in 0..labels.private_count() {
        if !split.test.iter().any(|e| e.private == i) {
            warn!(
                "test split has no embeddings of private class {} ({})",
                i, labels.private[i]
            );
        }
    }
    let norm = NormStats::fit(&split.train, channels)?;
    let header = ArchiveHeader {
        window: window as u32,
        stride: a.stride as u32,
        channels: channels as u32,
        public_classes: labels.public_count() as u32,
        private_classes: labels.private_count() as u32,
    };
    let train = EmbeddingArchive::new(header, normalize(&split.train, &norm))?;
    let test = EmbeddingArchive::new(header, normalize(&split.test, &norm))?;
    write_atomic(&a.out.join(TRAIN_ARCHIVE), |p| train.save(p))?;
    write_atomic(&a.out.join(TEST_ARCHIVE), |p| test.save(p))?;
    let manifest = Manifest {
        schema: schema_name,
        labels,
        window,
        stride: a.stride,
        channels,
        sampling_rate_hz: rate,
        split: kind.into(),
        train_subjects: split.train_subjects,
        test_subjects: split.test_subjects,
        train_embeddings: train.embeddings.len(),
        test_embeddings: test.embeddings.len(),
        norm,
    };
    write_json(&a.out.join(MANIFEST), &manifest)?;
    info!(
        "{} train and {} test embeddings of {}×{} ({} split)",
        manifest.train_embeddings, manifest.test_embeddings, window, channels, kind
    );
    Ok(())
}

fn vae_config(t: &TrainingArgs, alpha: f64, beta: f64) -> VaeConfig {
    VaeConfig {
        alpha,
        beta,
        latent_dim: t.latent_dim,
        hidden: t.hidden.clone(),
        epochs: t.epochs,
        batch_size: t.batch_size,
        lr: t.lr,
        seed: t.seed,
    }
}

pub fn train(a: &TrainArgs) -> Result<()> {
    echo_config(&a.out, "train", a)?;
    let p = load_prepared(&a.archive)?;
    let (u_count, m) = (p.public_classes(), p.private_classes());
    let base = vae_config(&a.training, a.alpha, a.beta);
    let per_class = by_public_class(&p.train.embeddings, u_count);
    for (u, data) in per_class.iter().enumerate() {
        ensure!(!data.is_empty(), "training split has no embeddings of public class {u}");
    }
    let ccfg = ClassifierConfig {
        hidden: a.training.hidden.clone(),
        epochs: a.training.epochs,
        batch_size: a.training.batch_size,
        lr: a.training.lr,
        seed: a.training.seed,
    };
    let (vaes, classifiers) = rayon::join(
        || {
            per_class
                .par_iter()
                .enumerate()
                .map(|(u, data)| {
                    let cfg = VaeConfig {
                        seed: vae_seed(base.seed, u),
                        ..base.clone()
                    };
                    train_vae(data, m, &cfg).map(|t| (u, t))
                })
                .collect::<latent_anon::Result<Vec<_>>>()
        },
        || {
            rayon::join(
                || {
                    train_classifier(
                        &p.train.embeddings,
                        AttributeKind::Public,
                        u_count,
                        &ccfg,
                        Some(&p.test.embeddings),
                    )
                },
                || {
                    let cfg = ClassifierConfig {
                        seed: ccfg.seed.wrapping_add(1),
                        ..ccfg.clone()
                    };
                    train_classifier(
                        &p.train.embeddings,
                        AttributeKind::Private,
                        m,
                        &cfg,
                        Some(&p.test.embeddings),
                    )
                },
            )
        },
    );
    let vaes = vaes?;
    let (public, private) = (classifiers.0?, classifiers.1?);

    for (u, t) in &vaes {
        let rows: Vec<Vec<String>> = t
            .history
            .iter()
            .enumerate()
            .map(|(e, b)| {
                vec![
                    e.to_string(),
                    b.reconstruction.to_string(),
                    b.kl.to_string(),
                    b.classification.to_string(),
                    (b.beta * b.kl).to_string(),
                    (b.alpha * b.classification).to_string(),
                    b.total.to_string(),
                ]
            })
            .collect();
        csv_writer(
            &a.out.join(format!("vae_u{u}_loss.csv")),
            &[
                "epoch",
                "reconstruction",
                "kl",
                "classification",
                "weighted_kl",
                "weighted_classification",
                "total",
            ],
            &rows,
        )?;
    }
    let models: BTreeMap<usize, VaeModel> = vaes.into_iter().map(|(u, t)| (u, t.model)).collect();
    save_models(&a.out, &models, &public.model, &private.model)?;
    let metrics = serde_json::json!({
        "public_classifier": {"train_accuracy": public.train_accuracy, "test_accuracy": public.held_out_accuracy},
        "private_classifier": {"train_accuracy": private.train_accuracy, "test_accuracy": private.held_out_accuracy},
    });
    write_json(&a.out.join("train_metrics.json"), &metrics)?;
    info!(
        "classifier test accuracy: public {:.4}, private {:.4}",
        public.held_out_accuracy.unwrap_or(f64::NAN),
        private.held_out_accuracy.unwrap_or(f64::NAN)
    );
    Ok(())
}

pub fn gridsearch(a: &GridArgs) -> Result<()> {
    echo_config(&a.out, "gridsearch", a)?;
    let (_, train) = load_train(&a.archive)?;
    let u_count = train.header.public_classes as usize;
    let per_class = by_public_class(&train.embeddings, u_count);
    let base = vae_config(&a.training, 1.0, 1.0);
    let r = grid_search(
        &per_class,
        train.header.private_classes as usize,
        &a.alphas,
        &a.betas,
        &base,
    )?;
    let rows: Vec<Vec<String>> = r
        .entries
        .iter()
        .map(|e| {
            let mut row = vec![e.alpha.to_string(), e.beta.to_string(), e.mean_loss.to_string()];
            row.extend(e.per_class_loss.iter().map(ToString::to_string));
            row
        })
        .collect();
    let mut header = vec!["alpha".to_owned(), "beta".to_owned(), "mean_loss".to_owned()];
    header.extend((0..u_count).map(|u| format!("loss_u{u}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    csv_writer(&a.out.join("grid.csv"), &header, &rows)?;
    write_json(
        &a.out.join("grid.json"),
        &serde_json::json!({"best_alpha": r.best_alpha, "best_beta": r.best_beta, "entries": r.entries}),
    )?;
    println!(
        "best α = {}, β = {} (mean final loss {:.6})",
        r.best_alpha,
        r.best_beta,
        r.best().mean_loss
    );
    Ok(())
}

pub fn means(a: &MeansArgs) -> Result<()> {
    echo_config(&a.out, "means", a)?;
    // Only the training split is read.
    let (_, train) = load_train(&a.archive)?;
    let (vaes, _, _) = load_models(&a.models).with_context(|| format!("loading models from {}", a.models.display()))?;
    let d = train.header.input_dim();
    if let Some((u, v)) = vaes.iter().find(|(_, v)| v.input_dim() != d) {
        bail!(
            "VAE {u} takes {} inputs but the archive holds embeddings of {d}",
            v.input_dim()
        );
    }
    let table = build_mean_table(
        &vaes,
        &train.embeddings,
        train.header.public_classes as usize,
        train.header.private_classes as usize,
    )?;
    for (u, i) in table.missing_cells() {
        warn!("training split has no embeddings for cell (u={u}, i={i})");
    }
    let path = a.table.clone().unwrap_or_else(|| a.out.join("means.zbar"));
    write_atomic(&path, |p| save_table(&table, p))?;
    info!("wrote {}", path.display());
    Ok(())
}

fn policy(p: &PipelineArgs, private_classes: usize) -> Result<ModifyPolicy> {
    let mode = match p.mode {
        Mode::Det => ModifyMode::Deterministic,
        Mode::Prob => ModifyMode::Probabilistic,
        Mode::Identity => ModifyMode::Identity,
    };
    let mapping = match &p.mapping {
        Some(m) => Bijection::new(m.clone())?,
        None => Bijection::cycle(private_classes),
    };
    Ok(ModifyPolicy {
        mode,
        mapping,
        flip_target: match p.flip_target {
            Flip::Mapping => FlipTarget::Mapping,
            Flip::UniformOther => FlipTarget::UniformOther,
        },
    })
}

fn registry(p: &PipelineArgs, private_classes: usize) -> Result<ModelRegistry> {
    let (vaes, public, private) =
        load_models(&p.models).with_context(|| format!("loading models from {}", p.models.display()))?;
    let table = load_table(&p.table).with_context(|| format!("loading {}", p.table.display()))?;
    Ok(ModelRegistry {
        vaes,
        public_classifier: public,
        private_classifier: private,
        table,
        policy: policy(p, private_classes)?,
    })
}

fn latent_noise(n: Noise) -> LatentNoise {
    match n {
        Noise::Sampled => LatentNoise::Sampled,
        Noise::Mean => LatentNoise::MeanOnly,
    }
}

fn anonymizer<'a>(reg: &'a ModelRegistry, p: &PipelineArgs, seed: u64) -> Result<Anonymizer<'a>> {
    Ok(Anonymizer::new(reg, latent_noise(p.noise), seed)?)
}

fn note_randomness(p: &PipelineArgs) {
    if p.mode == Mode::Prob {
        info!(
            "probabilistic mode draws its coins from operating-system randomness; outputs are not reproducible by seed"
        );
    }
}

pub fn anonymize(a: &AnonymizeArgs) -> Result<()> {
    echo_config(&a.out, "anonymize", a)?;
    let manifest = crate::output::read_manifest(&a.pipeline.archive)?;
    let reg = registry(&a.pipeline, manifest.labels.private_count())?;
    let anon = anonymizer(&reg, &a.pipeline, a.pipeline.seed)?;
    note_randomness(&a.pipeline);

    if let Some(src) = &a.stream {
        let mut stream = StreamAnonymizer::new(
            anon,
            manifest.window,
            manifest.stride,
            manifest.channels,
            Some(manifest.norm.clone()),
        )?;
        let reader: Box<dyn BufRead> = if src.as_os_str() == "-" {
            Box::new(BufReader::new(std::io::stdin()))
        } else {
            Box::new(BufReader::new(
                File::open(src).with_context(|| format!("opening {}", src.display()))?,
            ))
        };
        let path = a.out.join("stream.csv");
        let mut count = 0usize;
        write_atomic(&path, |p| {
            let mut w = BufWriter::new(File::create(p)?);
            for (n, line) in reader.lines().enumerate() {
                let line = line?;
                let Some(sample) = parse_sample_line(&line).map_err(|e| latent_anon::Error::at(n, e))? else {
                    continue;
                };
                if let Some((y, rec)) = stream.push(&sample).map_err(|e| latent_anon::Error::at(n, e))? {
                    let values: Vec<String> = y.iter().map(ToString::to_string).collect();
                    writeln!(
                        w,
                        "{},{},{},{},{}",
                        rec.id,
                        rec.public,
                        rec.target,
                        rec.applied,
                        values.join(",")
                    )?;
                    count += 1;
                }
            }
            w.flush()?;
            Ok(())
        })?;
        info!("{count} windows anonymized from {} samples", stream.samples_seen());
        return Ok(());
    }

    let p = load_prepared(&a.pipeline.archive)?;
    let source = match a.split {
        Split::Train => &p.train,
        Split::Test => &p.test,
    };
    let mut anon = anon;
    let xs: Vec<&[f64]> = source.embeddings.iter().map(|e| e.x.as_slice()).collect();
    let (ys, records) = anon.anonymize_batch(&xs)?;
    let mut out = source.clone();
    for (e, y) in out.embeddings.iter_mut().zip(ys) {
        e.x = y;
    }
    write_atomic(&a.out.join("anonymized.embd"), |path| out.save(path))?;
    let rows: Vec<Vec<String>> = records
        .iter()
        .zip(&source.embeddings)
        .map(|(r, e)| {
            vec![
                r.id.to_string(),
                e.subject_id.to_string(),
                e.trial.to_string(),
                e.origin.to_string(),
                e.public.to_string(),
                e.private.to_string(),
                r.public.to_string(),
                r.private.to_string(),
                r.target.to_string(),
                r.applied.to_string(),
                format!("{:08x}", r.latent_checksum),
            ]
        })
        .collect();
    csv_writer(
        &a.out.join("records.csv"),
        &[
            "id",
            "subject",
            "trial",
            "origin",
            "true_public",
            "true_private",
            "public",
            "private",
            "target",
            "applied",
            "latent_crc32",
        ],
        &rows,
    )?;
    let applied = records.iter().filter(|r| r.applied).count();
    info!(
        "{} embeddings anonymized, Modify applied to {} ({:.2}%)",
        records.len(),
        applied,
        100.0 * applied as f64 / records.len().max(1) as f64
    );
    Ok(())
}

pub fn attack(a: &AttackArgs) -> Result<()> {
    echo_config(&a.out, "attack", a)?;
    let p = load_prepared(&a.pipeline.archive)?;
    let reg = registry(&a.pipeline, p.private_classes())?;
    note_randomness(&a.pipeline);
    let hidden = reg.private_classifier.hidden();
    let config = AttackConfig {
        sample_fraction: a.fraction,
        runs: a.runs,
        attacker: ClassifierConfig {
            hidden,
            epochs: a.epochs,
            ..ClassifierConfig::default()
        },
        seed: a.pipeline.seed,
    };
    let mode = format!("{:?}", a.pipeline.mode).to_lowercase();
    let report = run_reid_attack(
        |seed| {
            let anon = Anonymizer::new(&reg, latent_noise(a.pipeline.noise), seed)?;
            Ok(Box::new(anon) as Box<dyn Obfuscator>)
        },
        &p.train.embeddings,
        &p.test.embeddings,
        p.private_classes(),
        &mode,
        &config,
    )?;
    write_atomic(&a.out.join("attack_runs.csv"), |path| {
        report.write_csv(File::create(path)?)
    })?;
    write_json(&a.out.join("attack.json"), &report)?;
    println!(
        "{mode}: attacker accuracy {:.2}% ± {:.2}% over {} runs",
        100.0 * report.mean,
        100.0 * report.std,
        report.runs.len()
    );
    Ok(())
}

pub fn eval(a: &EvalArgs) -> Result<()> {
    echo_config(&a.out, "eval", a)?;
    let p = load_prepared(&a.pipeline.archive)?;
    let reg = registry(&a.pipeline, p.private_classes())?;
    note_randomness(&a.pipeline);
    let mut anon = anonymizer(&reg, &a.pipeline, a.pipeline.seed)?;
    let table = evaluate_utility_privacy(
        &mut anon,
        &p.test.embeddings,
        &reg.public_classifier,
        &reg.private_classifier,
        p.public_classes(),
    )?;
    write_atomic(&a.out.join("eval.csv"), |path| table.write_csv(File::create(path)?))?;
    write_json(&a.out.join("eval.json"), &table)?;
    print!("{}", table.render(&p.manifest.labels.public));
    Ok(())
}

pub fn bench(a: &BenchArgs) -> Result<()> {
    echo_config(&a.out, "bench", a)?;
    let p = load_prepared(&a.pipeline.archive)?;
    let budget = BudgetSpec::new(
        a.rate.unwrap_or(p.manifest.sampling_rate_hz),
        a.stride.unwrap_or(p.manifest.stride),
    )?;
    println!(
        "budget: {} ms per embedding ({} Hz, stride {})",
        budget.budget_ms, budget.sampling_rate_hz, budget.stride
    );
    let reg = registry(&a.pipeline, p.private_classes())?;
    // Timing does not need secret coins; a seeded source keeps runs comparable.
    let mut anon = Anonymizer::with_coins(
        &reg,
        latent_noise(a.pipeline.noise),
        a.pipeline.seed,
        Box::new(latent_anon::transform::SeededSource::new(a.pipeline.seed)),
    )?;
    if !pin_current_thread() {
        warn!("could not pin the benchmark thread to a core");
    }
    let xs: Vec<Vec<f64>> = p
        .test
        .embeddings
        .iter()
        .take(a.limit.max(1))
        .map(|e| e.x.clone())
        .collect();
    let config = BenchConfig {
        warmup: a.warmup,
        repetitions: a.reps,
        mode: if a.batch > 1 {
            BenchMode::Batch
        } else {
            BenchMode::Single
        },
        batch_size: a.batch.max(1),
    };
    let report = benchmark_pipeline(&mut anon, &xs, &config)?;
    let verdict = check_realtime(&report, &budget);
    print!("{}", report.render());
    println!(
        "real-time: {} (p99 {:.3} ms vs budget {} ms, margin {:.3} ms)",
        if verdict.pass { "pass" } else { "FAIL" },
        verdict.p99_ms,
        verdict.budget_ms,
        verdict.margin_ms
    );
    write_json(
        &a.out.join("bench.json"),
        &serde_json::json!({"budget": budget, "report": report, "verdict": verdict}),
    )?;
    Ok(())
}
