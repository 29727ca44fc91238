//! UCR-style TSV: integer label, then the series values, tab separated,
//! one series per line.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use multirep_core::data::{remap_labels, Dataset};
use multirep_core::representations::Series;
use multirep_core::Error as CoreError;

use crate::error::{Error, Result};

/// Raw rows of one TSV file: original labels and values.
#[derive(Debug, Clone, PartialEq)]
pub struct Rows {
    pub labels: Vec<i64>,
    pub values: Vec<Vec<f64>>,
}

fn parse_label(field: &str) -> Option<i64> {
    if let Ok(v) = field.parse::<i64>() {
        return Some(v);
    }
    // some archives write labels as floats
    let f = field.parse::<f64>().ok()?;
    (f.is_finite() && f.fract() == 0.0 && f.abs() < 9.0e15).then_some(f as i64)
}

/// Parses TSV text; `path` only labels diagnostics.
pub fn parse_rows(text: &str, path: &Path) -> Result<Rows> {
    let mut labels = Vec::new();
    let mut values: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let label_field = fields.next().unwrap_or("").trim();
        let label = parse_label(label_field)
            .ok_or_else(|| Error::parse(path, line_no, format!("label `{label_field}` is not an integer")))?;
        let mut row = Vec::new();
        for (col, field) in fields.enumerate() {
            let field = field.trim();
            let v: f64 = field.parse().map_err(|_| {
                Error::parse(path, line_no, format!("field {} `{field}` is not a number", col + 2))
            })?;
            if !v.is_finite() {
                return Err(Error::parse(path, line_no, format!("field {} is not finite", col + 2)));
            }
            row.push(v);
        }
        if row.is_empty() {
            return Err(Error::parse(path, line_no, "row has a label but no values"));
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!("ragged row: expected {w} values, found {}", row.len()),
                ))
            }
            _ => {}
        }
        labels.push(label);
        values.push(row);
    }
    if labels.is_empty() {
        return Err(Error::parse(path, 0, "no series"));
    }
    Ok(Rows { labels, values })
}

pub fn read_rows(path: &Path) -> Result<Rows> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_rows(&text, path)
}

fn build(name: &str, rows: Rows) -> Result<Dataset> {
    let (mapped, classes) = remap_labels(&rows.labels);
    if classes.len() < 2 {
        return Err(CoreError::TooFewClasses(classes.len()).into());
    }
    let series = rows
        .values
        .into_iter()
        .zip(mapped)
        .map(|(v, l)| Series::new(v, l))
        .collect::<multirep_core::Result<Vec<_>>>()?;
    Ok(Dataset::new(name, series)?)
}

/// File stem without a trailing `_TRAIN` / `_TEST`.
pub fn dataset_name(path: &Path) -> String {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset");
    stem.strip_suffix("_TRAIN")
        .or_else(|| stem.strip_suffix("_TEST"))
        .unwrap_or(stem)
        .to_string()
}

/// One TSV file as a dataset. Labels are remapped to `0..C` in ascending
/// order of the original values.
pub fn load_tsv(path: &Path) -> Result<Dataset> {
    build(&dataset_name(path), read_rows(path)?)
}

/// A TRAIN/TEST pair as one dataset whose first rows are the training
/// part; the pair's split is kept as the original partition.
pub fn load_tsv_pair(train: &Path, test: &Path) -> Result<Dataset> {
    let a = read_rows(train)?;
    let b = read_rows(test)?;
    if let (Some(x), Some(y)) = (a.values.first(), b.values.first()) {
        if x.len() != y.len() {
            return Err(Error::parse(
                test,
                1,
                format!("series length {} differs from the training file's {}", y.len(), x.len()),
            ));
        }
    }
    let n_train = a.labels.len();
    let rows = Rows {
        labels: a.labels.into_iter().chain(b.labels).collect(),
        values: a.values.into_iter().chain(b.values).collect(),
    };
    Ok(build(&dataset_name(train), rows)?.with_original_split(n_train)?)
}

/// Appends `label \t v1 \t ... \n`; values use the shortest round-trip
/// decimal form.
pub fn write_row(out: &mut String, label: impl std::fmt::Display, values: &[f64]) {
    let _ = write!(out, "{label}");
    for v in values {
        let _ = write!(out, "\t{v}");
    }
    out.push('\n');
}

pub fn to_tsv(dataset: &Dataset) -> String {
    let mut out = String::new();
    for s in dataset.series() {
        write_row(&mut out, s.label, &s.values);
    }
    out
}

pub fn save_tsv(dataset: &Dataset, path: &Path) -> Result<()> {
    write_file(path, to_tsv(dataset).as_bytes())
}

/// Writes `bytes`, creating parent directories.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// A dataset found on disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetFiles {
    pub name: String,
    pub train: PathBuf,
    pub test: PathBuf,
    /// `<name>_INDICES.jsonl` next to the pair, if present.
    pub indices: Option<PathBuf>,
}

/// Finds `<name>_TRAIN.tsv` / `<name>_TEST.tsv` pairs in `dir` and in its
/// immediate subdirectories, sorted by name.
pub fn discover(dir: &Path) -> Result<Vec<DatasetFiles>> {
    let mut found = Vec::new();
    let mut dirs = vec![dir.to_path_buf()];
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        if entry.path().is_dir() {
            dirs.push(entry.path());
        }
    }
    for d in &dirs {
        let entries = fs::read_dir(d).map_err(|e| Error::io(d, e))?;
        for entry in entries {
            let path = entry.map_err(|e| Error::io(d, e))?.path();
            let Some(file) = path.file_name().and_then(|f| f.to_str()) else {
                continue;
            };
            let Some(name) = file.strip_suffix("_TRAIN.tsv") else {
                continue;
            };
            let test = d.join(format!("{name}_TEST.tsv"));
            if !test.is_file() {
                continue;
            }
            let indices = d.join(format!("{name}_INDICES.jsonl"));
            found.push(DatasetFiles {
                name: name.to_string(),
                train: path.clone(),
                test,
                indices: indices.is_file().then_some(indices),
            });
        }
    }
    found.sort_by(|a, b| a.name.cmp(&b.name).then_with(|| a.train.cmp(&b.train)));
    found.dedup_by(|a, b| a.name == b.name);
    Ok(found)
}
