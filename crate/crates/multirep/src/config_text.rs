//! Flat `key=value` model configuration text. Blank lines and lines
//! starting with `#` are ignored; absent keys keep their defaults.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use multirep_core::models::{ExitGate, LmrmsConfig, ModelConfig, ModelKind, MrmsConfig};
use multirep_core::representations::{parse_kinds, RepKind};

use crate::error::{Error, Result};

/// A model architecture together with its input layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub model: ModelConfig,
    pub in_channels: usize,
    pub reps: Option<Vec<RepKind>>,
}

fn list(values: &[usize]) -> String {
    values.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

fn gate_name(g: ExitGate) -> &'static str {
    match g {
        ExitGate::PerSample => "per_sample",
        ExitGate::BatchMean => "batch_mean",
    }
}

pub fn to_text(file: &ModelFile) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "model={}", file.model.kind());
    let _ = writeln!(out, "in_channels={}", file.in_channels);
    match &file.model {
        ModelConfig::Mrms(c) => {
            let _ = writeln!(out, "kernel_sizes={}", list(&c.kernel_sizes));
            let _ = writeln!(out, "branch_filters={}", c.branch_filters);
            let _ = writeln!(out, "fusion_channels={}", list(&c.fusion_channels));
            let _ = writeln!(out, "fusion_kernel={}", c.fusion_kernel);
            let _ = writeln!(out, "dropout_rate={}", c.dropout_rate);
            let _ = writeln!(out, "num_classes={}", c.num_classes);
        }
        ModelConfig::Lmrms(c) => {
            let _ = writeln!(out, "kernel_sizes={}", list(&c.kernel_sizes));
            let _ = writeln!(out, "branch_filters={}", c.branch_filters);
            let _ = writeln!(out, "hidden_units={}", c.hidden_units);
            let _ = writeln!(out, "main_channels={}", list(&c.main_channels));
            let _ = writeln!(out, "main_kernel={}", c.main_kernel);
            let _ = writeln!(out, "dropout_rate={}", c.dropout_rate);
            let _ = writeln!(out, "tau={}", c.tau);
            let _ = writeln!(out, "gate={}", gate_name(c.gate));
            let _ = writeln!(out, "num_classes={}", c.num_classes);
        }
    }
    if let Some(reps) = &file.reps {
        let names: Vec<&str> = reps.iter().map(|k| k.as_str()).collect();
        let _ = writeln!(out, "reps={}", names.join(","));
    }
    out
}

struct Fields<'a> {
    path: &'a Path,
    map: BTreeMap<String, (usize, String)>,
}

impl Fields<'_> {
    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.map.remove(key)
    }

    fn parsed<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::parse(self.path, line, format!("invalid value `{v}` for `{key}`"))),
        }
    }

    fn usizes(&mut self, key: &str) -> Result<Option<Vec<usize>>> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => v
                .split(',')
                .map(|s| s.trim().parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map(Some)
                .map_err(|_| Error::parse(self.path, line, format!("invalid list `{v}` for `{key}`"))),
        }
    }
}

pub fn parse_text(text: &str, path: &Path) -> Result<ModelFile> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(path, i + 1, format!("expected key=value, found `{line}`")))?;
        let key = k.trim().to_string();
        if map.insert(key.clone(), (i + 1, v.trim().to_string())).is_some() {
            return Err(Error::parse(path, i + 1, format!("duplicate key `{key}`")));
        }
    }
    let mut f = Fields { path, map };
    let kind: ModelKind = match f.take("model") {
        Some((line, v)) => v.parse().map_err(|e: multirep_core::Error| Error::parse(path, line, e.to_string()))?,
        None => return Err(Error::parse(path, 0, "missing key `model`")),
    };
    let reps = match f.take("reps") {
        Some((line, v)) => Some(parse_kinds(&v).map_err(|e| Error::parse(path, line, e.to_string()))?),
        None => None,
    };
    let in_channels = match (f.parsed::<usize>("in_channels")?, &reps) {
        (Some(c), _) => c,
        (None, Some(r)) => r.len(),
        (None, None) => return Err(Error::parse(path, 0, "missing key `in_channels`")),
    };
    let num_classes = f.parsed("num_classes")?.unwrap_or(2);
    let model = match kind {
        ModelKind::Mrms => {
            let mut c = MrmsConfig::new(num_classes);
            if let Some(v) = f.usizes("kernel_sizes")? {
                c.kernel_sizes = v;
            }
            if let Some(v) = f.parsed("branch_filters")? {
                c.branch_filters = v;
            }
            if let Some(v) = f.usizes("fusion_channels")? {
                c.fusion_channels = v;
            }
            if let Some(v) = f.parsed("fusion_kernel")? {
                c.fusion_kernel = v;
            }
            if let Some(v) = f.parsed("dropout_rate")? {
                c.dropout_rate = v;
            }
            ModelConfig::Mrms(c)
        }
        ModelKind::Lmrms => {
            let mut c = LmrmsConfig::new(num_classes);
            if let Some(v) = f.usizes("kernel_sizes")? {
                c.kernel_sizes = v;
            }
            if let Some(v) = f.parsed("branch_filters")? {
                c.branch_filters = v;
            }
            if let Some(v) = f.parsed("hidden_units")? {
                c.hidden_units = v;
            }
            if let Some(v) = f.usizes("main_channels")? {
                c.main_channels = v;
            }
            if let Some(v) = f.parsed("main_kernel")? {
                c.main_kernel = v;
            }
            if let Some(v) = f.parsed("dropout_rate")? {
                c.dropout_rate = v;
            }
            if let Some(v) = f.parsed("tau")? {
                c.tau = v;
            }
            if let Some((line, v)) = f.take("gate") {
                c.gate = match v.as_str() {
                    "per_sample" => ExitGate::PerSample,
                    "batch_mean" => ExitGate::BatchMean,
                    _ => {
                        return Err(Error::parse(
                            path,
                            line,
                            format!("invalid gate `{v}` (expected per_sample or batch_mean)"),
                        ))
                    }
                };
            }
            ModelConfig::Lmrms(c)
        }
    };
    if let Some((key, (line, _))) = f.map.into_iter().next() {
        return Err(Error::parse(path, line, format!("unknown key `{key}` for model {kind}")));
    }
    model.validate()?;
    Ok(ModelFile {
        model,
        in_channels,
        reps,
    })
}

pub fn load(path: &Path) -> Result<ModelFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_text(&text, path)
}

pub fn save(file: &ModelFile, path: &Path) -> Result<()> {
    crate::tsv::write_file(path, to_text(file).as_bytes())
}
