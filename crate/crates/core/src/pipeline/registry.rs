use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use crate::data::Embedding;
use crate::models::{AttributeKind, ClassifierModel, VaeModel};
use crate::transform::{LabeledLatent, MeanLatentTable, ModifyPolicy};
use crate::{Error, Result};

/// Everything the anonymizer needs.
#[derive(Debug, Clone)]
pub struct ModelRegistry {
    pub vaes: BTreeMap<usize, VaeModel>,
    pub public_classifier: ClassifierModel,
    pub private_classifier: ClassifierModel,
    pub table: MeanLatentTable,
    pub policy: ModifyPolicy,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Defect {
    MissingVae(usize),
    MissingCell { u: usize, i: usize },
    Dimension(String),
    Mapping(String),
}

impl fmt::Display for Defect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Defect::MissingVae(u) => write!(f, "no VAE for public class {u}"),
            Defect::MissingCell { u, i } => write!(f, "mean table has no cell (u={u}, i={i})"),
            Defect::Dimension(m) => write!(f, "dimension mismatch: {m}"),
            Defect::Mapping(m) => write!(f, "modify mapping: {m}"),
        }
    }
}

/// Lists every coherence problem; an empty list means the registry is usable.
pub fn validate_registry(r: &ModelRegistry) -> Vec<Defect> {
    let mut out = Vec::new();
    let u_count = r.public_classifier.classes();
    let m = r.private_classifier.classes();
    let d = r.public_classifier.input_dim();
    let j = r.table.latent_dim();
    let mut dim = |msg: String| out.push(Defect::Dimension(msg));

    if r.private_classifier.input_dim() != d {
        dim(format!(
            "private classifier takes {} inputs, public classifier {d}",
            r.private_classifier.input_dim()
        ));
    }
    if r.table.public_classes() != u_count {
        dim(format!(
            "table has {} public classes, classifier emits {u_count}",
            r.table.public_classes()
        ));
    }
    if r.table.private_classes() != m {
        dim(format!(
            "table has {} private classes, classifier emits {m}",
            r.table.private_classes()
        ));
    }
    if r.policy.private_classes() != m {
        dim(format!(
            "mapping covers {} classes, classifier emits {m}",
            r.policy.private_classes()
        ));
    }
    for (&u, vae) in &r.vaes {
        if vae.public_class != u {
            dim(format!("VAE stored under class {u} serves class {}", vae.public_class));
        }
        if vae.input_dim() != d {
            dim(format!("VAE {u} takes {} inputs, classifiers {d}", vae.input_dim()));
        }
        if vae.latent_dim() != j {
            dim(format!("VAE {u} has latent dimension {}, table {j}", vae.latent_dim()));
        }
        if vae.private_classes() != m {
            dim(format!(
                "VAE {u} head has {} classes, expected {m}",
                vae.private_classes()
            ));
        }
    }
    for u in 0..u_count {
        if !r.vaes.contains_key(&u) {
            out.push(Defect::MissingVae(u));
        }
    }
    for (u, i) in r.table.missing_cells() {
        if u < u_count && i < m {
            out.push(Defect::MissingCell { u, i });
        }
    }
    out.extend(r.policy.defects().into_iter().map(Defect::Mapping));
    out
}

/// Encodes each training embedding with the VAE of its own public class and
/// averages the posterior means per `(u, i)` cell.
pub fn build_mean_table(
    vaes: &BTreeMap<usize, VaeModel>,
    train: &[Embedding],
    public_classes: usize,
    private_classes: usize,
) -> Result<MeanLatentTable> {
    let latents = train
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let vae = vaes.get(&e.public).ok_or(Error::MissingVae(e.public))?;
            let dist = vae.encode(&e.x).map_err(|err| Error::at(k, err))?;
            Ok(LabeledLatent {
                z: dist.mu,
                public: e.public,
                private: e.private,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    MeanLatentTable::compute(&latents, public_classes, private_classes)
}

pub fn vae_file_name(u: usize) -> String {
    format!("vae_u{u}.lann")
}

pub const PUBLIC_CLASSIFIER_FILE: &str = "classifier_public.lann";
pub const PRIVATE_CLASSIFIER_FILE: &str = "classifier_private.lann";

/// Writes the VAEs and both classifiers into `dir`.
pub fn save_models(
    dir: &Path,
    vaes: &BTreeMap<usize, VaeModel>,
    public: &ClassifierModel,
    private: &ClassifierModel,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (u, v) in vaes {
        v.save(&dir.join(vae_file_name(*u)))?;
    }
    public.save(&dir.join(PUBLIC_CLASSIFIER_FILE))?;
    private.save(&dir.join(PRIVATE_CLASSIFIER_FILE))
}

/// Reads what [`save_models`] wrote. VAEs are loaded for classes
/// `0..U` where `U` is the public classifier's class count; missing files
/// are left out so that validation can report them.
pub fn load_models(dir: &Path) -> Result<(BTreeMap<usize, VaeModel>, ClassifierModel, ClassifierModel)> {
    let public = ClassifierModel::load(&dir.join(PUBLIC_CLASSIFIER_FILE))?;
    let private = ClassifierModel::load(&dir.join(PRIVATE_CLASSIFIER_FILE))?;
    if public.kind != AttributeKind::Public || private.kind != AttributeKind::Private {
        return Err(Error::format("classifier files hold the wrong attribute kinds"));
    }
    let mut vaes = BTreeMap::new();
    for u in 0..public.classes() {
        let path = dir.join(vae_file_name(u));
        if path.exists() {
            vaes.insert(u, VaeModel::load(&path)?);
        }
    }
    Ok((vaes, public, private))
}
