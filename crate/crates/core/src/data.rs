//! Datasets, train/test resampling and synthetic benchmark data.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::math;
use crate::representations::Series;
use crate::{Error, Result};

/// SplitMix64 finalizer over `base ^ stream`; gives independent seeds for
/// derived random streams.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a, for turning names into seed streams.
pub fn name_hash(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3))
}

/// Maps arbitrary integer labels onto `0..C` in ascending order of the
/// original value. Returns the mapped labels and the sorted originals.
pub fn remap_labels(raw: &[i64]) -> (Vec<usize>, Vec<i64>) {
    let mut classes: Vec<i64> = raw.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let index: BTreeMap<i64, usize> = classes.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    (raw.iter().map(|l| index[l]).collect(), classes)
}

/// Fixed-length univariate dataset with contiguous labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    series: Vec<Series>,
    num_classes: usize,
    len: usize,
    original_train: Option<usize>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, series: Vec<Series>) -> Result<Self> {
        let len = series.first().map(Series::len).unwrap_or(0);
        for (index, s) in series.iter().enumerate() {
            if s.len() != len {
                return Err(Error::Ragged {
                    index,
                    expected: len,
                    found: s.len(),
                });
            }
        }
        let num_classes = series.iter().map(|s| s.label + 1).max().unwrap_or(0);
        if num_classes < 2 {
            return Err(Error::TooFewClasses(num_classes));
        }
        let mut present = vec![false; num_classes];
        for s in &series {
            present[s.label] = true;
        }
        if let Some(missing) = present.iter().position(|p| !p) {
            return Err(Error::NonContiguousLabels {
                classes: num_classes,
                missing,
            });
        }
        Ok(Self {
            name: name.into(),
            series,
            num_classes,
            len,
            original_train: None,
        })
    }

    /// Marks the first `train_count` series as the distribution's original
    /// training partition and the rest as its test partition.
    pub fn with_original_split(mut self, train_count: usize) -> Result<Self> {
        if train_count == 0 || train_count >= self.series.len() {
            return Err(Error::EmptyPartition {
                resample: 0,
                part: if train_count == 0 { "train" } else { "test" },
            });
        }
        self.original_train = Some(train_count);
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn series(&self) -> &[Series] {
        &self.series
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Series length `L`.
    pub fn series_len(&self) -> usize {
        self.len
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.series.iter().map(|s| s.label).collect()
    }

    pub fn original_train(&self) -> Option<usize> {
        self.original_train
    }

    /// The original train share when known, otherwise one half.
    pub fn default_train_fraction(&self) -> f64 {
        match self.original_train {
            Some(n) => n as f64 / self.series.len() as f64,
            None => 0.5,
        }
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for s in &self.series {
            counts[s.label] += 1;
        }
        counts
    }
}

/// One train/test partition of a dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ResamplePlan {
    pub resample: usize,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl ResamplePlan {
    /// Bounds, disjointness, no repeats, both parts non-empty and every
    /// class represented in the training part.
    pub fn validate(&self, dataset: &Dataset) -> Result<()> {
        let n = dataset.len();
        let resample = self.resample;
        if self.train.is_empty() {
            return Err(Error::EmptyPartition { resample, part: "train" });
        }
        if self.test.is_empty() {
            return Err(Error::EmptyPartition { resample, part: "test" });
        }
        // 0 unseen, 1 train, 2 test
        let mut seen = vec![0u8; n];
        for (part, indices) in [(1u8, &self.train), (2u8, &self.test)] {
            for &index in indices {
                if index >= n {
                    return Err(Error::IndexOutOfRange { resample, index, len: n });
                }
                match seen[index] {
                    0 => seen[index] = part,
                    p if p == part => return Err(Error::RepeatedIndex { resample, index }),
                    _ => return Err(Error::Overlap { resample, index }),
                }
            }
        }
        let mut in_train = vec![false; dataset.num_classes()];
        for &i in &self.train {
            in_train[dataset.series()[i].label] = true;
        }
        if let Some(class) = in_train.iter().position(|p| !p) {
            return Err(Error::ClassMissingFromTrain { resample, class });
        }
        Ok(())
    }
}

/// `resamples` stratified random train/test splits. When the dataset
/// carries its original partition, resample 0 reproduces it exactly. Each
/// resample draws from its own seed stream, so plan `r` does not depend on
/// how many plans are requested.
pub fn monte_carlo_split(dataset: &Dataset, resamples: usize, seed: u64, train_fraction: f64) -> Result<Vec<ResamplePlan>> {
    if resamples == 0 {
        return Err(Error::InvalidConfig("at least one resample is required".into()));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidConfig(alloc::format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let counts = dataset.class_counts();
    if let Some((class, &count)) = counts.iter().enumerate().find(|(_, c)| **c < 2) {
        return Err(Error::ClassTooSmall { class, count });
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); dataset.num_classes()];
    for (i, s) in dataset.series().iter().enumerate() {
        by_class[s.label].push(i);
    }

    let mut plans = Vec::with_capacity(resamples);
    for r in 0..resamples {
        let plan = match (r, dataset.original_train()) {
            (0, Some(n_train)) => ResamplePlan {
                resample: 0,
                train: (0..n_train).collect(),
                test: (n_train..dataset.len()).collect(),
            },
            _ => {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, r as u64));
                let mut train = Vec::new();
                let mut test = Vec::new();
                for members in &by_class {
                    let mut shuffled = members.clone();
                    shuffled.shuffle(&mut rng);
                    let n = shuffled.len();
                    let take = (math::round(train_fraction * n as f64) as usize).clamp(1, n - 1);
                    train.extend_from_slice(&shuffled[..take]);
                    test.extend_from_slice(&shuffled[take..]);
                }
                train.sort_unstable();
                test.sort_unstable();
                ResamplePlan { resample: r, train, test }
            }
        };
        plan.validate(dataset)?;
        plans.push(plan);
    }
    Ok(plans)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticKind {
    /// Randomly phased sines at two distinct frequencies plus noise.
    TwoSines,
    /// Pure white noise against a noisy linear trend.
    NoiseVsTrend,
}

impl SyntheticKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SyntheticKind::TwoSines => "two_sines",
            SyntheticKind::NoiseVsTrend => "noise_vs_trend",
        }
    }
}

impl FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two_sines" => Ok(SyntheticKind::TwoSines),
            "noise_vs_trend" => Ok(SyntheticKind::NoiseVsTrend),
            other => Err(Error::InvalidConfig(alloc::format!("unknown synthetic dataset `{other}`"))),
        }
    }
}

/// Cycles per series of the two sine classes.
pub const SINE_CYCLES: [f64; 2] = [3.0, 7.0];
/// Standard deviation of the additive Gaussian noise.
pub const SYNTHETIC_NOISE: f64 = 0.2;

/// Balanced two-class dataset; labels alternate `0, 1, 0, 1, ...`.
pub fn make_synthetic(kind: SyntheticKind, n: usize, len: usize, seed: u64) -> Result<Dataset> {
    if n == 0 || !n.is_multiple_of(2) {
        return Err(Error::InvalidConfig(alloc::format!("sample count must be positive and even, got {n}")));
    }
    if len < 32 {
        return Err(Error::InvalidConfig(alloc::format!("synthetic series need L >= 32, got {len}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, SYNTHETIC_NOISE).expect("valid sigma");
    let unit = Normal::new(0.0, 1.0).expect("valid sigma");
    let mut series = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % 2;
        let values: Vec<f64> = match kind {
            SyntheticKind::TwoSines => {
                let phase = rng.random::<f64>() * 2.0 * PI;
                let cycles = SINE_CYCLES[label];
                (0..len)
                    .map(|t| math::sin(2.0 * PI * cycles * t as f64 / len as f64 + phase) + noise.sample(&mut rng))
                    .collect()
            }
            SyntheticKind::NoiseVsTrend => {
                if label == 0 {
                    (0..len).map(|_| unit.sample(&mut rng)).collect()
                } else {
                    let slope = if rng.random::<bool>() { 1.0 } else { -1.0 } * (1.0 + rng.random::<f64>());
                    (0..len)
                        .map(|t| slope * (2.0 * t as f64 / (len - 1) as f64 - 1.0) + noise.sample(&mut rng))
                        .collect()
                }
            }
        };
        series.push(Series::new(values, label)?);
    }
    Dataset::new(kind.as_str(), series)
}
