//! Append-only JSONL store of evaluated configurations, used as a regression
//! baseline: a later run of the same configuration must reproduce every
//! exact rate of the first one.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analytics::RateReport;
use crate::config::ConfigRecord;
use crate::experiments::ValidationReport;

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}, line {line}: {message}")]
    Corrupt { path: PathBuf, line: usize, message: String },
    #[error("serialization failed: {0}")]
    Serialize(#[from] serde_json::Error),
}

/// Serializes with keys sorted at every level and no whitespace.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String, serde_json::Error> {
    let v = serde_json::to_value(value)?;
    serde_json::to_string(&v)
}

/// Hex SHA-256 of the canonical configuration JSON.
pub fn config_hash(config: &ConfigRecord) -> String {
    let json = canonical_json(config).expect("config records always serialize");
    hex::encode(Sha256::digest(json.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunRecord {
    pub config_hash: String,
    pub config: ConfigRecord,
    pub report: RateReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation: Option<ValidationReport>,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub artifact_version: String,
}

impl RunRecord {
    pub fn new(config: ConfigRecord, report: RateReport, validation: Option<ValidationReport>) -> Self {
        let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        Self {
            config_hash: config_hash(&config),
            config,
            report,
            validation,
            timestamp,
            artifact_version: ARTIFACT_VERSION.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldChange {
    pub field: String,
    pub baseline: String,
    pub latest: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BaselineDiff {
    NoBaseline,
    /// Oldest (`baseline_id`) against newest (`latest_id`) record for the hash.
    Compared { baseline_id: usize, latest_id: usize, changes: Vec<FieldChange> },
}

/// One record per line; ids are 1-based line numbers.
#[derive(Debug, Clone)]
pub struct RunStore {
    path: PathBuf,
}

impl RunStore {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self { path: path.into() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn io(&self, source: std::io::Error) -> StoreError {
        StoreError::Io { path: self.path.clone(), source }
    }

    pub fn append(&self, record: &RunRecord) -> Result<usize, StoreError> {
        let line = canonical_json(record)?;
        let existing = match fs::read_to_string(&self.path) {
            Ok(text) => text.lines().count(),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => 0,
            Err(e) => return Err(self.io(e)),
        };
        let mut file = OpenOptions::new().create(true).append(true).open(&self.path).map_err(|e| self.io(e))?;
        writeln!(file, "{line}").map_err(|e| self.io(e))?;
        Ok(existing + 1)
    }

    /// All records with their ids. A missing file is an empty store.
    pub fn load(&self) -> Result<Vec<(usize, RunRecord)>, StoreError> {
        let text = match fs::read_to_string(&self.path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(self.io(e)),
        };
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map(|r| (i + 1, r)).map_err(|e| StoreError::Corrupt {
                    path: self.path.clone(),
                    line: i + 1,
                    message: e.to_string(),
                })
            })
            .collect()
    }

    pub fn diff_against_baseline(&self, hash: &str) -> Result<BaselineDiff, StoreError> {
        let matching: Vec<(usize, RunRecord)> = self.load()?.into_iter().filter(|(_, r)| r.config_hash == hash).collect();
        let (Some((baseline_id, baseline)), Some((latest_id, latest))) = (matching.first(), matching.last()) else {
            return Ok(BaselineDiff::NoBaseline);
        };
        Ok(BaselineDiff::Compared {
            baseline_id: *baseline_id,
            latest_id: *latest_id,
            changes: diff_reports(&baseline.report, &latest.report)?,
        })
    }
}

/// Top-level report fields whose values differ. Rationals compare by their
/// exact form.
pub fn diff_reports(baseline: &RateReport, latest: &RateReport) -> Result<Vec<FieldChange>, serde_json::Error> {
    let (a, b) = (serde_json::to_value(baseline)?, serde_json::to_value(latest)?);
    let (a, b) = (a.as_object().expect("report is an object"), b.as_object().expect("report is an object"));
    let render = |v: Option<&serde_json::Value>| match v {
        Some(v) => v.get("exact").map_or_else(|| v.to_string(), |e| e.as_str().unwrap_or_default().to_string()),
        None => "(absent)".to_string(),
    };
    let mut keys: Vec<&String> = a.keys().chain(b.keys()).collect();
    keys.sort();
    keys.dedup();
    Ok(keys
        .into_iter()
        .filter(|k| a.get(*k) != b.get(*k))
        .map(|k| FieldChange { field: k.clone(), baseline: render(a.get(k)), latest: render(b.get(k)) })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::GammaConvention;
    use crate::config::{FullCachePolicy, SystemConfig};
    use crate::rational::{int, ratio};

    fn example_one() -> (ConfigRecord, SystemConfig) {
        let cfg = SystemConfig::new(2, vec![ratio(1, 8), ratio(1, 4), ratio(1, 2), int(1)], 4096).unwrap();
        (ConfigRecord::from_config(&cfg, 0), cfg)
    }

    #[test]
    fn canonical_round_trip_is_byte_identical() {
        let (rec, cfg) = example_one();
        let run = RunRecord::new(rec, RateReport::evaluate(&cfg, GammaConvention::Ceil), None);
        let first = canonical_json(&run).unwrap();
        let parsed: RunRecord = serde_json::from_str(&first).unwrap();
        assert_eq!(canonical_json(&parsed).unwrap(), first);
        assert!(first.find("\"artifactVersion\"").unwrap() < first.find("\"configHash\"").unwrap());
    }

    #[test]
    fn hash_ignores_literal_spelling() {
        let (rec, _) = example_one();
        let spelled: ConfigRecord =
            serde_json::from_str(r#"{"N": 2, "K": 4, "M": [0.125, "0.25", "1/2", 1], "F": 4096}"#).unwrap();
        assert_eq!(config_hash(&rec), config_hash(&spelled));
        assert_eq!(config_hash(&rec).len(), 64);
        let other = ConfigRecord { file_size_bits: 8, ..rec.clone() };
        assert_ne!(config_hash(&rec), config_hash(&other));
        assert!(spelled.to_config(FullCachePolicy::Reject).is_ok());
    }

    #[test]
    fn rerun_has_empty_diff_and_gamma_flip_touches_only_bound_fields() {
        let dir = tempfile::tempdir().unwrap();
        let store = RunStore::new(dir.path().join("runs.jsonl"));
        let (rec, cfg) = example_one();
        let hash = config_hash(&rec);
        assert_eq!(store.diff_against_baseline(&hash).unwrap(), BaselineDiff::NoBaseline);

        let ceil = RunRecord::new(rec.clone(), RateReport::evaluate(&cfg, GammaConvention::Ceil), None);
        assert_eq!(store.append(&ceil).unwrap(), 1);
        assert_eq!(store.append(&ceil).unwrap(), 2);
        let BaselineDiff::Compared { changes, .. } = store.diff_against_baseline(&hash).unwrap() else { panic!() };
        assert!(changes.is_empty());

        let three = SystemConfig::new(3, vec![ratio(16, 25), ratio(4, 5), int(1)], 64).unwrap();
        let rec3 = ConfigRecord::from_config(&three, 0);
        store.append(&RunRecord::new(rec3.clone(), RateReport::evaluate(&three, GammaConvention::Ceil), None)).unwrap();
        store.append(&RunRecord::new(rec3.clone(), RateReport::evaluate(&three, GammaConvention::Floor), None)).unwrap();
        let BaselineDiff::Compared { baseline_id, latest_id, changes } = store.diff_against_baseline(&config_hash(&rec3)).unwrap()
        else {
            panic!()
        };
        assert_eq!((baseline_id, latest_id), (3, 4));
        assert!(!changes.is_empty());
        assert!(changes.iter().all(|c| c.field.starts_with("lowerBoundNew")), "{changes:?}");
        assert!(changes.iter().any(|c| c.field == "lowerBoundNew" && c.baseline == "26/25" && c.latest == "59/50"));
    }

    #[test]
    fn corrupt_line_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("runs.jsonl");
        let store = RunStore::new(&path);
        let (rec, cfg) = example_one();
        store.append(&RunRecord::new(rec, RateReport::evaluate(&cfg, GammaConvention::Ceil), None)).unwrap();
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        writeln!(f, "{{not json").unwrap();
        match store.load() {
            Err(StoreError::Corrupt { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }
}
