//! Per-resample classification metrics and two-stage aggregation: mean over
//! resamples within each dataset, then an unweighted mean over datasets.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::math;
use crate::{Error, Result};

/// Probability floor inside the log of [`nll`].
pub const NLL_FLOOR: f64 = 1e-12;
/// Allowed deviation of a probability row sum from one.
pub const ROW_SUM_TOLERANCE: f64 = 1e-6;

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::LengthMismatch { left: a, right: b });
    }
    if a == 0 {
        return Err(Error::InvalidConfig("metrics need at least one sample".into()));
    }
    Ok(())
}

fn check_labels(labels: &[usize], classes: usize) -> Result<()> {
    match labels.iter().find(|&&l| l >= classes) {
        Some(&label) => Err(Error::LabelOutOfRange { label, classes }),
        None => Ok(()),
    }
}

fn check_probabilities(probs: &[f64], truth: &[usize], classes: usize) -> Result<()> {
    if classes == 0 || probs.len() != truth.len() * classes {
        return Err(Error::LengthMismatch {
            left: probs.len(),
            right: truth.len() * classes,
        });
    }
    check_labels(truth, classes)?;
    for (row, r) in probs.chunks_exact(classes).enumerate() {
        let sum: f64 = r.iter().sum();
        if !sum.is_finite() || (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
            return Err(Error::NotAProbability { row, sum });
        }
    }
    Ok(())
}

/// Fraction of exact matches.
pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_lengths(pred.len(), truth.len())?;
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Unweighted mean of per-class F1 over all `classes`. A class that is
/// neither predicted nor present contributes 0.
pub fn macro_f1(pred: &[usize], truth: &[usize], classes: usize) -> Result<f64> {
    check_lengths(pred.len(), truth.len())?;
    if classes < 2 {
        return Err(Error::InvalidConfig("macro F1 needs at least two classes".into()));
    }
    check_labels(pred, classes)?;
    check_labels(truth, classes)?;
    let mut tp = vec![0usize; classes];
    let mut fp = vec![0usize; classes];
    let mut fneg = vec![0usize; classes];
    for (&p, &t) in pred.iter().zip(truth) {
        if p == t {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fneg[t] += 1;
        }
    }
    let total: f64 = (0..classes)
        .map(|c| {
            let denom = 2 * tp[c] + fp[c] + fneg[c];
            if denom == 0 {
                0.0
            } else {
                2.0 * tp[c] as f64 / denom as f64
            }
        })
        .sum();
    Ok(total / classes as f64)
}

/// Rank-sum (Mann-Whitney) AUC of `scores` for a binary split; ties
/// count one half. `None` when either side is empty.
pub fn binary_auc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let n_pos = positive.iter().filter(|p| **p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based mid-rank of the tie block i..=j
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += mid * order[i..=j].iter().filter(|&&k| positive[k]).count() as f64;
        i = j + 1;
    }
    let np = n_pos as f64;
    Some((rank_sum - np * (np + 1.0) / 2.0) / (np * n_neg as f64))
}

/// Binary AUC on the class-1 column for two classes; otherwise the mean
/// one-vs-rest AUC over classes that are present (and not universal) in
/// `truth`. `None` when no class admits an AUC.
pub fn auc(probs: &[f64], truth: &[usize], classes: usize) -> Result<Option<f64>> {
    check_probabilities(probs, truth, classes)?;
    if classes < 2 {
        return Err(Error::InvalidConfig("AUC needs at least two classes".into()));
    }
    let column = |c: usize| -> Vec<f64> { probs.chunks_exact(classes).map(|r| r[c]).collect() };
    if classes == 2 {
        let positive: Vec<bool> = truth.iter().map(|&t| t == 1).collect();
        return Ok(binary_auc(&column(1), &positive));
    }
    let per_class: Vec<f64> = (0..classes)
        .filter_map(|c| {
            let positive: Vec<bool> = truth.iter().map(|&t| t == c).collect();
            binary_auc(&column(c), &positive)
        })
        .collect();
    if per_class.is_empty() {
        Ok(None)
    } else {
        Ok(Some(math::mean(&per_class)))
    }
}

/// Mean of `-ln(max(p_true, 1e-12))`.
pub fn nll(probs: &[f64], truth: &[usize], classes: usize) -> Result<f64> {
    check_probabilities(probs, truth, classes)?;
    let total: f64 = probs
        .chunks_exact(classes)
        .zip(truth)
        .map(|(row, &t)| -math::ln(row[t].max(NLL_FLOOR)))
        .sum();
    Ok(total / truth.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Accuracy,
    MacroF1,
    Auc,
    Nll,
    TrainSeconds,
    TestSeconds,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::Accuracy,
        Metric::MacroF1,
        Metric::Auc,
        Metric::Nll,
        Metric::TrainSeconds,
        Metric::TestSeconds,
    ];

    /// Journal / CSV key.
    pub fn key(self) -> &'static str {
        match self {
            Metric::Accuracy => "acc",
            Metric::MacroF1 => "f1",
            Metric::Auc => "auc",
            Metric::Nll => "nll",
            Metric::TrainSeconds => "train_s",
            Metric::TestSeconds => "test_s",
        }
    }

    pub fn higher_is_better(self) -> bool {
        matches!(self, Metric::Accuracy | Metric::MacroF1 | Metric::Auc)
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let alias = match s.as_str() {
            "accuracy" => "acc",
            "macro_f1" => "f1",
            "train_seconds" => "train_s",
            "test_seconds" => "test_s",
            other => other,
        };
        Metric::ALL
            .into_iter()
            .find(|m| m.key() == alias)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown metric `{s}` (expected acc, f1, auc, nll, train_s or test_s)")))
    }
}

/// Metrics of one (model, dataset, resample) run.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunRecord {
    pub model: String,
    pub dataset: String,
    pub resample: usize,
    #[cfg_attr(feature = "serde", serde(rename = "acc"))]
    pub accuracy: f64,
    #[cfg_attr(feature = "serde", serde(rename = "f1"))]
    pub macro_f1: f64,
    /// `None` when undefined (a binary test set with a single class).
    pub auc: Option<f64>,
    pub nll: f64,
    #[cfg_attr(feature = "serde", serde(rename = "train_s"))]
    pub train_seconds: f64,
    #[cfg_attr(feature = "serde", serde(rename = "test_s"))]
    pub test_seconds: f64,
    pub epochs: usize,
    pub params: usize,
}

impl RunRecord {
    pub fn metric(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Accuracy => Some(self.accuracy),
            Metric::MacroF1 => Some(self.macro_f1),
            Metric::Auc => self.auc,
            Metric::Nll => Some(self.nll),
            Metric::TrainSeconds => Some(self.train_seconds),
            Metric::TestSeconds => Some(self.test_seconds),
        }
    }

    pub fn key(&self) -> RunKey {
        RunKey {
            model: self.model.clone(),
            dataset: self.dataset.clone(),
            resample: self.resample,
        }
    }
}

/// Identity of a run inside a sweep.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RunKey {
    pub model: String,
    pub dataset: String,
    pub resample: usize,
}

impl fmt::Display for RunKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/r{}", self.model, self.dataset, self.resample)
    }
}

/// Means of every metric; `None` where no value was available.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricMeans([Option<f64>; 6]);

impl MetricMeans {
    pub fn get(&self, metric: Metric) -> Option<f64> {
        self.0[metric.index()]
    }

    fn from_columns(columns: &[Vec<f64>; 6]) -> Self {
        let mut out = [None; 6];
        for (slot, col) in out.iter_mut().zip(columns) {
            if !col.is_empty() {
                *slot = Some(math::mean(col));
            }
        }
        Self(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateTable {
    pub models: Vec<String>,
    pub datasets: Vec<String>,
    /// Resample count per dataset (identical for every model).
    pub resamples: BTreeMap<String, usize>,
    per_dataset: BTreeMap<(String, String), MetricMeans>,
    overall: BTreeMap<String, MetricMeans>,
}

impl AggregateTable {
    /// Mean over resamples for one (model, dataset) cell.
    pub fn dataset_mean(&self, model: &str, dataset: &str, metric: Metric) -> Option<f64> {
        self.per_dataset
            .get(&(model.to_string(), dataset.to_string()))
            .and_then(|m| m.get(metric))
    }

    /// Unweighted mean of the per-dataset means.
    pub fn overall(&self, model: &str, metric: Metric) -> Option<f64> {
        self.overall.get(model).and_then(|m| m.get(metric))
    }
}

/// Two-stage macro average over a complete (model x dataset x resample)
/// grid. The resample ids expected for a dataset are the union over all
/// models; any hole is reported by key. Result is independent of record
/// order.
pub fn aggregate(records: &[RunRecord]) -> Result<AggregateTable> {
    if records.is_empty() {
        return Err(Error::IncompleteGrid {
            missing: vec!["<no records>".to_string()],
        });
    }
    let mut by_key: BTreeMap<RunKey, &RunRecord> = BTreeMap::new();
    for r in records {
        if by_key.insert(r.key(), r).is_some() {
            return Err(Error::DuplicateRecord(r.key().to_string()));
        }
    }
    let models: BTreeSet<String> = records.iter().map(|r| r.model.clone()).collect();
    let mut resample_ids: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
    for r in records {
        resample_ids.entry(r.dataset.clone()).or_default().insert(r.resample);
    }

    let mut missing = Vec::new();
    for m in &models {
        for (d, ids) in &resample_ids {
            for &resample in ids {
                let key = RunKey {
                    model: m.clone(),
                    dataset: d.clone(),
                    resample,
                };
                if !by_key.contains_key(&key) {
                    missing.push(key.to_string());
                }
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::IncompleteGrid { missing });
    }

    let mut per_dataset = BTreeMap::new();
    let mut overall = BTreeMap::new();
    for m in &models {
        let mut dataset_columns: [Vec<f64>; 6] = Default::default();
        for (d, ids) in &resample_ids {
            let mut columns: [Vec<f64>; 6] = Default::default();
            for &resample in ids {
                let key = RunKey {
                    model: m.clone(),
                    dataset: d.clone(),
                    resample,
                };
                let rec = by_key[&key];
                for metric in Metric::ALL {
                    if let Some(v) = rec.metric(metric) {
                        columns[metric.index()].push(v);
                    }
                }
            }
            let means = MetricMeans::from_columns(&columns);
            for metric in Metric::ALL {
                if let Some(v) = means.get(metric) {
                    dataset_columns[metric.index()].push(v);
                }
            }
            per_dataset.insert((m.clone(), d.clone()), means);
        }
        overall.insert(m.clone(), MetricMeans::from_columns(&dataset_columns));
    }

    Ok(AggregateTable {
        models: models.into_iter().collect(),
        resamples: resample_ids.iter().map(|(d, ids)| (d.clone(), ids.len())).collect(),
        datasets: resample_ids.into_keys().collect(),
        per_dataset,
        overall,
    })
}
