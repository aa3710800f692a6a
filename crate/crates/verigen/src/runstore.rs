//! Persistent, resumable run state.
//!
//! Layout inside a run directory: `manifest.json` (atomic write-then-rename,
//! schema-versioned), `objects/<sha256>.v` (content-addressed candidate
//! sources, deduplicated across retries), `candidates/<id>/…` (per-candidate
//! scratch and transcripts), `reports/…`. A lock file serializes writers;
//! readers are unrestricted. Stage order is monotone: recording an earlier
//! stage over a later one is refused.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::llmclient::Provenance;
use crate::ppa::PpaReport;
use crate::verify::Verdict;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
const MANIFEST_FILE: &str = "manifest.json";
const LOCK_FILE: &str = ".lock";

/// Pipeline stages in execution order; the manifest stage only moves forward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Split,
    Prompted,
    Generated,
    Corrected,
    Measured,
    Selected,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Split => "split",
            Stage::Prompted => "prompted",
            Stage::Generated => "generated",
            Stage::Corrected => "corrected",
            Stage::Measured => "measured",
            Stage::Selected => "selected",
        }
    }

    pub const ALL: [Stage; 6] = [
        Stage::Split,
        Stage::Prompted,
        Stage::Generated,
        Stage::Corrected,
        Stage::Measured,
        Stage::Selected,
    ];
}

/// One candidate's persisted state: where its source lives (relative to the
/// run directory), its latest verdict, whether a human rejected it, its PPA
/// report once measured, and accumulated correction effort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub id: String,
    pub path: String,
    pub module_name: String,
    pub provenance: Option<Provenance>,
    pub verdict: Option<Verdict>,
    pub rejected: bool,
    pub ppa: Option<PpaReport>,
    pub correction_loc: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub target: String,
    pub chosen: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub run_id: String,
    pub spec_digest: String,
    pub stage: Stage,
    pub candidates: Vec<CandidateRecord>,
    pub selection: Option<Selection>,
    /// Stage name → RFC 3339 completion time.
    pub timestamps: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(run_id: impl Into<String>, spec_digest: impl Into<String>) -> Self {
        RunManifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            run_id: run_id.into(),
            spec_digest: spec_digest.into(),
            stage: Stage::Split,
            candidates: Vec::new(),
            selection: None,
            timestamps: BTreeMap::new(),
        }
    }

    pub fn stamp(&mut self, stage: Stage) {
        self.stage = stage;
        self.timestamps.insert(
            stage.name().to_string(),
            chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
        );
    }

    pub fn candidate(&self, id: &str) -> Option<&CandidateRecord> {
        self.candidates.iter().find(|c| c.id == id)
    }

    pub fn candidate_mut(&mut self, id: &str) -> Option<&mut CandidateRecord> {
        self.candidates.iter_mut().find(|c| c.id == id)
    }

    fn check_invariants(&self, run_dir: &Path) -> Result<(), String> {
        if self.selection.is_some() && self.stage != Stage::Selected {
            return Err(format!(
                "selection present at stage `{}`",
                self.stage.name()
            ));
        }
        for record in &self.candidates {
            let path = run_dir.join(&record.path);
            if !path.is_file() {
                return Err(format!(
                    "candidate `{}` references missing file `{}`",
                    record.id, record.path
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("no manifest in run directory")]
    NotFound,
    #[error("corrupt manifest: {0}")]
    Corrupt(String),
    #[error("stale write: on-disk stage `{on_disk}` is past `{attempted}`")]
    StaleWrite { on_disk: String, attempted: String },
    #[error("invalid manifest: {0}")]
    Invalid(String),
    #[error("run directory is locked by {0}")]
    LockHeld(PathBuf),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Serializes the manifest (pretty JSON, stable field order) and writes it
/// atomically: temp file, then rename. Refuses to regress a later on-disk
/// stage. Re-recording the same stage is idempotent.
pub fn record(manifest: &RunManifest, run_dir: &Path) -> Result<(), StoreError> {
    manifest
        .check_invariants(run_dir)
        .map_err(StoreError::Invalid)?;
    if let Ok(existing) = load(run_dir) {
        if existing.stage > manifest.stage {
            return Err(StoreError::StaleWrite {
                on_disk: existing.stage.name().into(),
                attempted: manifest.stage.name().into(),
            });
        }
    }
    fs::create_dir_all(run_dir.join("candidates"))?;
    let body =
        serde_json::to_string_pretty(manifest).map_err(|e| StoreError::Invalid(e.to_string()))?;
    let tmp = run_dir.join(format!("{MANIFEST_FILE}.tmp"));
    fs::write(&tmp, body + "\n")?;
    fs::rename(&tmp, run_dir.join(MANIFEST_FILE))?;
    Ok(())
}

/// Loads and re-validates the manifest; `load(record(m)) = m`.
pub fn load(run_dir: &Path) -> Result<RunManifest, StoreError> {
    let path = run_dir.join(MANIFEST_FILE);
    let body = match fs::read_to_string(&path) {
        Ok(body) => body,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(StoreError::NotFound),
        Err(e) => return Err(e.into()),
    };
    let manifest: RunManifest =
        serde_json::from_str(&body).map_err(|e| StoreError::Corrupt(e.to_string()))?;
    if manifest.schema_version != MANIFEST_SCHEMA_VERSION {
        return Err(StoreError::Corrupt(format!(
            "unsupported schema version {}",
            manifest.schema_version
        )));
    }
    manifest
        .check_invariants(run_dir)
        .map_err(StoreError::Corrupt)?;
    Ok(manifest)
}

/// Stores a candidate source content-addressed under `objects/` and returns
/// its run-relative path. Identical sources share one object.
pub fn store_source(run_dir: &Path, source: &str) -> Result<String, StoreError> {
    let digest = hex::encode(Sha256::digest(source.as_bytes()));
    let rel = format!("objects/{digest}.v");
    let path = run_dir.join(&rel);
    if !path.is_file() {
        fs::create_dir_all(path.parent().expect("objects dir"))?;
        fs::write(&path, source)?;
    }
    Ok(rel)
}

/// Reads a candidate source back by its run-relative path.
pub fn load_source(run_dir: &Path, rel_path: &str) -> Result<String, StoreError> {
    Ok(fs::read_to_string(run_dir.join(rel_path))?)
}

/// Exclusive writer lock on a run directory, released on drop.
#[derive(Debug)]
pub struct RunLock {
    path: PathBuf,
}

impl RunLock {
    pub fn acquire(run_dir: &Path) -> Result<Self, StoreError> {
        fs::create_dir_all(run_dir)?;
        let path = run_dir.join(LOCK_FILE);
        match fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
        {
            Ok(mut file) => {
                use std::io::Write;
                let _ = writeln!(file, "{}", std::process::id());
                Ok(RunLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(StoreError::LockHeld(path))
            }
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest(stage: Stage) -> RunManifest {
        let mut m = RunManifest::new("run-1", "deadbeef");
        m.stage = stage;
        m.timestamps
            .insert(stage.name().into(), "2024-01-01T00:00:00.000Z".into());
        m
    }

    #[test]
    fn fresh_manifest_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let m = manifest(Stage::Split);
        record(&m, dir.path()).unwrap();
        let loaded = load(dir.path()).unwrap();
        assert_eq!(m, loaded);
        // Recording lays out the run directory: manifest plus an (empty)
        // candidates dir.
        assert!(dir.path().join("manifest.json").is_file());
        assert!(dir.path().join("candidates").is_dir());
    }

    #[test]
    fn rerecord_same_stage_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let m = manifest(Stage::Generated);
        record(&m, dir.path()).unwrap();
        record(&m, dir.path()).unwrap();
        assert_eq!(load(dir.path()).unwrap(), m);
        assert!(!dir.path().join("manifest.json.tmp").exists());
    }

    #[test]
    fn earlier_stage_over_later_is_stale() {
        let dir = tempfile::tempdir().unwrap();
        record(&manifest(Stage::Measured), dir.path()).unwrap();
        match record(&manifest(Stage::Split), dir.path()) {
            Err(StoreError::StaleWrite { on_disk, attempted }) => {
                assert_eq!(on_disk, "measured");
                assert_eq!(attempted, "split");
            }
            other => panic!("expected StaleWrite, got {other:?}"),
        }
    }

    #[test]
    fn empty_directory_is_not_found() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load(dir.path()), Err(StoreError::NotFound)));
    }

    #[test]
    fn garbage_manifest_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("manifest.json"), "{ not json").unwrap();
        assert!(matches!(load(dir.path()), Err(StoreError::Corrupt(_))));
    }

    #[test]
    fn missing_candidate_file_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = manifest(Stage::Generated);
        let rel = store_source(dir.path(), "module m(); endmodule\n").unwrap();
        m.candidates.push(CandidateRecord {
            id: "P0".into(),
            path: rel.clone(),
            module_name: "m".into(),
            provenance: None,
            verdict: None,
            rejected: false,
            ppa: None,
            correction_loc: 0,
        });
        record(&m, dir.path()).unwrap();
        fs::remove_file(dir.path().join(&rel)).unwrap();
        assert!(matches!(load(dir.path()), Err(StoreError::Corrupt(_))));
    }

    #[test]
    fn selection_requires_selected_stage() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = manifest(Stage::Measured);
        m.selection = Some(Selection {
            target: "area".into(),
            chosen: "P0".into(),
        });
        assert!(matches!(
            record(&m, dir.path()),
            Err(StoreError::Invalid(_))
        ));
    }

    #[test]
    fn sources_are_content_addressed_and_deduplicated() {
        let dir = tempfile::tempdir().unwrap();
        let a = store_source(dir.path(), "module m(); endmodule\n").unwrap();
        let b = store_source(dir.path(), "module m(); endmodule\n").unwrap();
        let c = store_source(dir.path(), "module n(); endmodule\n").unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(
            load_source(dir.path(), &a).unwrap(),
            "module m(); endmodule\n"
        );
        let objects: Vec<_> = fs::read_dir(dir.path().join("objects")).unwrap().collect();
        assert_eq!(objects.len(), 2);
    }

    #[test]
    fn lock_is_exclusive_and_released_on_drop() {
        let dir = tempfile::tempdir().unwrap();
        let lock = RunLock::acquire(dir.path()).unwrap();
        assert!(matches!(
            RunLock::acquire(dir.path()),
            Err(StoreError::LockHeld(_))
        ));
        drop(lock);
        let again = RunLock::acquire(dir.path());
        assert!(again.is_ok());
    }
}
