//! Schema-driven CSV ingestion.
//!
//! A [`CsvSchema`] names the channel columns, a regular expression matched
//! against each file's path (relative to the data directory, `/`-separated)
//! whose named groups become attributes, an optional per-subject info table,
//! and how the public and private labels are derived from the attributes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::labels::bin_weight;
use super::series::{LabelSpace, SensorSeries};
use crate::nn::Matrix;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub name: String,
    pub channels: Vec<String>,
    pub sampling_rate_hz: f64,
    /// Regex over the relative path; files that do not match are ignored.
    /// Must capture `subject`; may capture `trial` and any other attribute.
    pub file_pattern: String,
    #[serde(default)]
    pub subject_info: Option<SubjectInfo>,
    /// Columns whose first-row value becomes an attribute of the series.
    #[serde(default)]
    pub attribute_columns: Vec<String>,
    pub public: LabelRule,
    pub private: LabelRule,
    /// Trials held out by the trial-based split, when the dataset has one.
    #[serde(default)]
    pub test_trials: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectInfo {
    /// Path of the table relative to the data directory.
    pub file: String,
    pub subject_column: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRule {
    pub attribute: String,
    /// Class names in label order. Values not listed drop the series.
    #[serde(default)]
    pub classes: Vec<String>,
    /// Applied to the raw value before class lookup.
    #[serde(default)]
    pub remap: BTreeMap<String, String>,
    /// When set, the numeric value is binned instead of looked up.
    #[serde(default)]
    pub binning: Option<Binning>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Binning {
    /// `≤ 70 kg`, `(70, 90] kg`, `> 90 kg`.
    Weight,
}

impl LabelRule {
    fn class_names(&self) -> Vec<String> {
        match self.binning {
            Some(Binning::Weight) => vec!["<=70kg".into(), "70-90kg".into(), ">90kg".into()],
            None => self.classes.clone(),
        }
    }

    /// `Ok(None)` when the value is not one of the declared classes.
    fn resolve(&self, attributes: &BTreeMap<String, String>) -> Result<Option<usize>> {
        let raw = attributes
            .get(&self.attribute)
            .ok_or_else(|| Error::invalid(format!("attribute {} not available", self.attribute)))?;
        let value = self.remap.get(raw).unwrap_or(raw);
        match self.binning {
            Some(Binning::Weight) => {
                let kg: f64 = value
                    .trim()
                    .parse()
                    .map_err(|_| Error::invalid(format!("{} value {value:?} is not numeric", self.attribute)))?;
                bin_weight(kg).map(Some)
            }
            None => Ok(self.classes.iter().position(|c| c == value)),
        }
    }
}

impl CsvSchema {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn label_space(&self) -> Result<LabelSpace> {
        LabelSpace::new(self.public.class_names(), self.private.class_names())
    }

    /// Layout of the MotionSense `A_DeviceMotion_data` release: one folder
    /// per `<activity>_<trial>` holding `sub_<n>.csv`, plus
    /// `data_subjects_info.csv`. Sitting and standing are dropped.
    pub fn motionsense() -> Self {
        Self {
            name: "motionsense".into(),
            channels: [
                "attitude.roll",
                "attitude.pitch",
                "attitude.yaw",
                "gravity.x",
                "gravity.y",
                "gravity.z",
                "rotationRate.x",
                "rotationRate.y",
                "rotationRate.z",
                "userAcceleration.x",
                "userAcceleration.y",
                "userAcceleration.z",
            ]
            .map(String::from)
            .to_vec(),
            sampling_rate_hz: 50.0,
            file_pattern: r"(?P<activity>[a-z]+)_(?P<trial>\d+)/sub_(?P<subject>\d+)\.csv$".into(),
            subject_info: Some(SubjectInfo {
                file: "data_subjects_info.csv".into(),
                subject_column: "code".into(),
            }),
            attribute_columns: Vec::new(),
            public: LabelRule {
                attribute: "activity".into(),
                classes: ["dws", "ups", "wlk", "jog"].map(String::from).to_vec(),
                remap: BTreeMap::new(),
                binning: None,
            },
            private: LabelRule {
                attribute: "gender".into(),
                classes: vec!["0".into(), "1".into()],
                remap: BTreeMap::new(),
                binning: None,
            },
            test_trials: vec![11, 12, 13, 14, 15, 16],
        }
    }

    /// MobiAct annotated CSVs (`<ACT>_<subject>_<trial>_annotated.csv`) with a
    /// user-supplied `subjects.csv` holding `subject`, `gender`, `weight`.
    pub fn mobiact() -> Self {
        Self {
            name: "mobiact".into(),
            channels: [
                "acc_x", "acc_y", "acc_z", "gyro_x", "gyro_y", "gyro_z", "azimuth", "pitch", "roll",
            ]
            .map(String::from)
            .to_vec(),
            sampling_rate_hz: 20.0,
            file_pattern: r"(?P<activity>[A-Z]+)_(?P<subject>\d+)_(?P<trial>\d+)_annotated\.csv$".into(),
            subject_info: Some(SubjectInfo {
                file: "subjects.csv".into(),
                subject_column: "subject".into(),
            }),
            attribute_columns: Vec::new(),
            public: LabelRule {
                attribute: "activity".into(),
                classes: ["WAL", "STD", "JOG", "STU"].map(String::from).to_vec(),
                remap: BTreeMap::new(),
                binning: None,
            },
            private: LabelRule {
                attribute: "gender".into(),
                classes: vec!["0".into(), "1".into()],
                remap: BTreeMap::new(),
                binning: None,
            },
            test_trials: Vec::new(),
        }
    }

    /// MobiAct with the three weight groups as the private attribute.
    pub fn mobiact_weight() -> Self {
        let mut s = Self::mobiact();
        s.name = "mobiact-weight".into();
        s.private = LabelRule {
            attribute: "weight".into(),
            classes: Vec::new(),
            remap: BTreeMap::new(),
            binning: Some(Binning::Weight),
        };
        s
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "motionsense" => Some(Self::motionsense()),
            "mobiact" => Some(Self::mobiact()),
            "mobiact-weight" => Some(Self::mobiact_weight()),
            _ => None,
        }
    }
}

fn data_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Data {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<_> = fs::read_dir(dir)?.collect::<std::io::Result<_>>()?;
    entries.sort_by_key(|e| e.path());
    for entry in entries {
        let path = entry.path();
        if entry.file_type()?.is_dir() {
            collect_files(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

fn read_subject_info(dir: &Path, info: &SubjectInfo) -> Result<BTreeMap<String, BTreeMap<String, String>>> {
    let path = dir.join(&info.file);
    let mut reader = csv::Reader::from_path(&path).map_err(|e| data_err(&path, e.to_string()))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| data_err(&path, e.to_string()))?
        .iter()
        .map(|h| h.trim().to_owned())
        .collect();
    let key = headers
        .iter()
        .position(|h| *h == info.subject_column)
        .ok_or_else(|| data_err(&path, format!("missing column {}", info.subject_column)))?;
    let mut out = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| data_err(&path, e.to_string()))?;
        let row: BTreeMap<String, String> = headers
            .iter()
            .cloned()
            .zip(record.iter().map(|v| v.trim().to_owned()))
            .collect();
        out.insert(normalize_id(&record[key]), row);
    }
    Ok(out)
}

fn normalize_id(raw: &str) -> String {
    let t = raw.trim();
    t.parse::<f64>()
        .ok()
        .filter(|v| v.fract() == 0.0)
        .map(|v| format!("{}", v as i64))
        .unwrap_or_else(|| t.to_owned())
}

/// Parses one CSV into a `T × C` matrix plus the requested attribute columns.
fn read_samples(path: &Path, schema: &CsvSchema) -> Result<(Matrix, BTreeMap<String, String>)> {
    let c = schema.channels.len();
    if fs::metadata(path)?.len() == 0 {
        warn!("{}: empty file, producing a zero-length series", path.display());
        return Ok((Matrix::zeros(0, c), BTreeMap::new()));
    }
    let mut reader = csv::Reader::from_path(path).map_err(|e| data_err(path, e.to_string()))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| data_err(path, e.to_string()))?
        .iter()
        .map(|h| h.trim().to_owned())
        .collect();
    let find = |name: &String| headers.iter().position(|h| h == name);
    let missing: Vec<&String> = schema
        .channels
        .iter()
        .chain(&schema.attribute_columns)
        .filter(|n| find(n).is_none())
        .collect();
    if !missing.is_empty() {
        return Err(data_err(path, format!("missing columns {missing:?}")));
    }
    let channel_idx: Vec<usize> = schema.channels.iter().filter_map(find).collect();
    let attr_idx: Vec<(String, usize)> = schema
        .attribute_columns
        .iter()
        .filter_map(|n| find(n).map(|k| (n.clone(), k)))
        .collect();

    let mut data = Vec::new();
    let mut attributes = BTreeMap::new();
    let mut rows = 0;
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| data_err(path, e.to_string()))?;
        // Row numbers are 1-based and count the header line.
        let row_no = line + 2;
        for (&k, name) in channel_idx.iter().zip(&schema.channels) {
            let cell = record.get(k).unwrap_or("").trim();
            let v: f64 = cell
                .parse()
                .map_err(|_| data_err(path, format!("row {row_no}, column {name}: {cell:?} is not numeric")))?;
            data.push(v);
        }
        if rows == 0 {
            for (name, k) in &attr_idx {
                attributes.insert(name.clone(), record.get(*k).unwrap_or("").trim().to_owned());
            }
        }
        rows += 1;
    }
    if rows == 0 {
        warn!("{}: no data rows", path.display());
    }
    Ok((Matrix::from_vec(rows, c, data)?, attributes))
}

/// Loads every file under `dir` that matches the schema's pattern.
///
/// Files whose header lacks required columns are collected and reported
/// together. Series whose public or private value is not a declared class
/// are skipped.
pub fn load_csv(dir: &Path, schema: &CsvSchema) -> Result<Vec<SensorSeries>> {
    let pattern = Regex::new(&schema.file_pattern).map_err(|e| Error::invalid(format!("bad file pattern: {e}")))?;
    if !pattern.capture_names().flatten().any(|n| n == "subject") {
        return Err(Error::invalid("file pattern must capture a `subject` group"));
    }
    let subjects = match &schema.subject_info {
        Some(info) => read_subject_info(dir, info)?,
        None => BTreeMap::new(),
    };

    let mut files = Vec::new();
    collect_files(dir, &mut files)?;

    let mut out = Vec::new();
    let mut offending = Vec::new();
    for path in files {
        let rel = path
            .strip_prefix(dir)
            .unwrap_or(&path)
            .components()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect::<Vec<_>>()
            .join("/");
        let Some(caps) = pattern.captures(&rel) else { continue };

        let mut attributes: BTreeMap<String, String> = pattern
            .capture_names()
            .flatten()
            .filter_map(|n| caps.name(n).map(|m| (n.to_owned(), m.as_str().to_owned())))
            .collect();
        let subject_key = normalize_id(&attributes["subject"]);
        let subject_id: u32 = subject_key
            .parse()
            .map_err(|_| data_err(&path, format!("subject id {subject_key:?} is not an integer")))?;
        let trial: u32 = match attributes.get("trial") {
            Some(t) => t
                .parse()
                .map_err(|_| data_err(&path, format!("trial id {t:?} is not an integer")))?,
            None => 0,
        };
        if let Some(info) = subjects.get(&subject_key) {
            for (k, v) in info {
                attributes.entry(k.clone()).or_insert_with(|| v.clone());
            }
        }

        let (samples, columns) = match read_samples(&path, schema) {
            Ok(v) => v,
            Err(Error::Data { message, .. }) if message.starts_with("missing columns") => {
                offending.push(format!("{}: {message}", path.display()));
                continue;
            }
            Err(e) => return Err(e),
        };
        attributes.extend(columns);

        let public = schema
            .public
            .resolve(&attributes)
            .map_err(|e| data_err(&path, e.to_string()))?;
        let private = schema
            .private
            .resolve(&attributes)
            .map_err(|e| data_err(&path, e.to_string()))?;
        let (Some(public), Some(private)) = (public, private) else {
            info!("{}: label outside the declared classes, skipped", path.display());
            continue;
        };
        out.push(SensorSeries {
            subject_id,
            trial,
            samples,
            sampling_rate_hz: schema.sampling_rate_hz,
            public,
            private,
            attributes,
        });
    }
    if !offending.is_empty() {
        return Err(Error::Data {
            path: dir.to_path_buf(),
            message: format!(
                "{} file(s) do not match the schema:\n  {}",
                offending.len(),
                offending.join("\n  ")
            ),
        });
    }
    Ok(out)
}
