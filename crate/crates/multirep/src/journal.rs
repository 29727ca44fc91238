//! Append-only JSON-lines run journal and its failure log.

use std::collections::BTreeSet;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use multirep_core::metrics::{RunKey, RunRecord};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const JOURNAL_FILE: &str = "journal.jsonl";
pub const FAILURES_FILE: &str = "failures.jsonl";

/// A run that could not complete.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub model: String,
    pub dataset: String,
    pub resample: usize,
    pub error: String,
}

pub fn record_line(record: &RunRecord) -> String {
    let mut s = serde_json::to_string(record).expect("records serialize");
    s.push('\n');
    s
}

/// Parses a journal. A final line without its newline is taken as an
/// interrupted write and dropped.
pub fn parse_journal(text: &str, path: &Path) -> Result<Vec<RunRecord>> {
    let complete = match text.rfind('\n') {
        Some(i) => &text[..=i],
        None => "",
    };
    let mut out = Vec::new();
    for (i, line) in complete.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: RunRecord =
            serde_json::from_str(line).map_err(|e| Error::parse(path, i + 1, format!("bad journal record: {e}")))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn read_journal(path: &Path) -> Result<Vec<RunRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_journal(&text, path)
}

/// Single writer over `journal.jsonl` and `failures.jsonl` in one
/// directory.
#[derive(Debug)]
pub struct Journal {
    path: PathBuf,
    failures: PathBuf,
    file: File,
    done: BTreeSet<RunKey>,
    records: Vec<RunRecord>,
}

impl Journal {
    /// Opens (or creates) the journal in `dir`, loading completed keys. A
    /// torn last line is cut off before appending.
    pub fn open(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(JOURNAL_FILE);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(Error::io(&path, e)),
        };
        let records = parse_journal(&text, &path)?;
        let keep = text.rfind('\n').map_or(0, |i| i + 1);
        if keep != text.len() {
            let f = OpenOptions::new().write(true).open(&path).map_err(|e| Error::io(&path, e))?;
            f.set_len(keep as u64).map_err(|e| Error::io(&path, e))?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        let done = records.iter().map(RunRecord::key).collect();
        Ok(Self {
            failures: dir.join(FAILURES_FILE),
            path,
            file,
            done,
            records,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn contains(&self, key: &RunKey) -> bool {
        self.done.contains(key)
    }

    pub fn done(&self) -> &BTreeSet<RunKey> {
        &self.done
    }

    pub fn records(&self) -> &[RunRecord] {
        &self.records
    }

    /// Appends and syncs one record.
    pub fn append(&mut self, record: RunRecord) -> Result<()> {
        self.file
            .write_all(record_line(&record).as_bytes())
            .and_then(|_| self.file.sync_data())
            .map_err(|e| Error::io(&self.path, e))?;
        self.done.insert(record.key());
        self.records.push(record);
        Ok(())
    }

    pub fn record_failure(&self, key: &RunKey, error: &str) -> Result<()> {
        let f = Failure {
            model: key.model.clone(),
            dataset: key.dataset.clone(),
            resample: key.resample,
            error: error.to_string(),
        };
        let mut line = serde_json::to_string(&f).expect("failures serialize");
        line.push('\n');
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.failures)
            .map_err(|e| Error::io(&self.failures, e))?;
        file.write_all(line.as_bytes()).map_err(|e| Error::io(&self.failures, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(resample: usize, auc: Option<f64>) -> RunRecord {
        RunRecord {
            model: "mrms".into(),
            dataset: "d".into(),
            resample,
            accuracy: 0.5,
            macro_f1: 0.25,
            auc,
            nll: 0.7,
            train_seconds: 1.5,
            test_seconds: 0.01,
            epochs: 4,
            params: 100,
        }
    }

    #[test]
    fn line_has_documented_keys() {
        let v: serde_json::Value = serde_json::from_str(&record_line(&rec(0, None))).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        let mut expected = vec![
            "model", "dataset", "resample", "acc", "f1", "auc", "nll", "train_s", "test_s", "epochs", "params",
        ];
        expected.sort_unstable();
        let mut keys = keys;
        keys.sort_unstable();
        assert_eq!(keys, expected);
        assert!(v["auc"].is_null());
    }

    #[test]
    fn resume_and_torn_tail() {
        let dir = tempfile::tempdir().unwrap();
        {
            let mut j = Journal::open(dir.path()).unwrap();
            j.append(rec(0, Some(0.9))).unwrap();
            j.append(rec(1, None)).unwrap();
        }
        let path = dir.path().join(JOURNAL_FILE);
        let mut text = fs::read_to_string(&path).unwrap();
        text.push_str("{\"model\":\"mr");
        fs::write(&path, &text).unwrap();
        let mut j = Journal::open(dir.path()).unwrap();
        assert_eq!(j.records().len(), 2);
        assert!(j.contains(&rec(1, None).key()));
        j.append(rec(2, Some(0.8))).unwrap();
        let back = read_journal(&path).unwrap();
        assert_eq!(back, vec![rec(0, Some(0.9)), rec(1, None), rec(2, Some(0.8))]);
    }
}
