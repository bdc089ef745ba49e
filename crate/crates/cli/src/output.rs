use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use latent_anon::data::{EmbeddingArchive, LabelSpace, NormStats};
use serde::{Deserialize, Serialize};

pub const TRAIN_ARCHIVE: &str = "train.embd";
pub const TEST_ARCHIVE: &str = "test.embd";
pub const MANIFEST: &str = "manifest.json";

/// Written by `prepare` next to the two archives.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub labels: LabelSpace,
    pub window: usize,
    pub stride: usize,
    pub channels: usize,
    pub sampling_rate_hz: f64,
    /// `"subject"` or `"trial"`.
    pub split: String,
    pub train_subjects: Vec<u32>,
    pub test_subjects: Vec<u32>,
    pub train_embeddings: usize,
    pub test_embeddings: usize,
    /// Archives hold embeddings normalized with these statistics.
    pub norm: NormStats,
}

pub struct Prepared {
    pub manifest: Manifest,
    pub train: EmbeddingArchive,
    pub test: EmbeddingArchive,
}

impl Prepared {
    pub fn public_classes(&self) -> usize {
        self.train.header.public_classes as usize
    }

    pub fn private_classes(&self) -> usize {
        self.train.header.private_classes as usize
    }
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_archive(path: &Path) -> Result<EmbeddingArchive> {
    EmbeddingArchive::load(path).with_context(|| format!("reading {}", path.display()))
}

pub fn load_train(dir: &Path) -> Result<(Manifest, EmbeddingArchive)> {
    Ok((read_manifest(dir)?, load_archive(&dir.join(TRAIN_ARCHIVE))?))
}

pub fn load_prepared(dir: &Path) -> Result<Prepared> {
    let manifest = read_manifest(dir)?;
    let train = load_archive(&dir.join(TRAIN_ARCHIVE))?;
    let test = load_archive(&dir.join(TEST_ARCHIVE))?;
    anyhow::ensure!(
        train.header == test.header,
        "train and test archives disagree on their headers"
    );
    Ok(Prepared { manifest, train, test })
}

/// Writes via a sibling temporary file so that a failed run never leaves a
/// half-written output behind.
pub fn write_atomic(path: &Path, write: impl FnOnce(&Path) -> latent_anon::Result<()>) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    if let Err(e) = write(&tmp) {
        let _ = fs::remove_file(&tmp);
        return Err(e).with_context(|| format!("writing {}", path.display()));
    }
    fs::rename(&tmp, path).with_context(|| format!("moving output into {}", path.display()))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    write_atomic(path, |p| Ok(fs::write(p, bytes)?))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

/// Records the exact invocation as `<command>.config.json` in `dir`.
pub fn echo_config<T: Serialize>(dir: &Path, command: &str, args: &T) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let echo = serde_json::json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "args": args,
    });
    write_json(&dir.join(format!("{command}.config.json")), &echo)
}
