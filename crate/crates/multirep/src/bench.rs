//! Benchmark sweeps over dataset directories with a resumable journal.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use multirep_core::data::{derive_seed, monte_carlo_split, name_hash};
use multirep_core::metrics::{RunKey, RunRecord};
use multirep_core::training::{bench_tasks, run_single, task_key, BenchDataset, Clock, RunSpec, Timing};

use crate::error::Result;
use crate::indices::load_predefined_indices;
use crate::journal::Journal;
use crate::tsv::{discover, load_tsv_pair, DatasetFiles};

/// Seconds since construction.
#[derive(Debug, Clone, Copy)]
pub struct WallClock(Instant);

impl WallClock {
    pub fn new() -> Self {
        Self(Instant::now())
    }
}

impl Default for WallClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for WallClock {
    fn now(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum TimingMode {
    /// Measured wall-clock seconds.
    #[default]
    Wall,
    /// Multiply-accumulate count times 1e-9; reproducible.
    Work,
}

/// Runs `f` with the requested timing source.
pub fn with_timing<T>(mode: TimingMode, f: impl FnOnce(Timing<'_>) -> T) -> T {
    match mode {
        TimingMode::Wall => {
            let clock = WallClock::new();
            f(Timing::Wall(&clock))
        }
        TimingMode::Work => f(Timing::Work),
    }
}

/// Loads one dataset and its plans: the index file when present (first
/// `resamples` records by id), otherwise stratified Monte-Carlo splits
/// whose resample 0 is the TRAIN/TEST partition.
pub fn load_bench_dataset(
    files: &DatasetFiles,
    resamples: usize,
    seed: u64,
    train_fraction: Option<f64>,
) -> Result<BenchDataset> {
    let dataset = load_tsv_pair(&files.train, &files.test)?;
    let plans = match &files.indices {
        Some(path) => {
            let mut plans = load_predefined_indices(path, &dataset)?;
            plans.sort_by_key(|p| p.resample);
            plans.truncate(resamples);
            plans
        }
        None => {
            let fraction = train_fraction.unwrap_or_else(|| dataset.default_train_fraction());
            monte_carlo_split(&dataset, resamples, derive_seed(seed, name_hash(dataset.name())), fraction)?
        }
    };
    Ok(BenchDataset { dataset, plans })
}

/// Every loadable dataset under `dir`; failures are returned by name.
pub fn load_bench_datasets(
    dir: &Path,
    resamples: usize,
    seed: u64,
    train_fraction: Option<f64>,
) -> Result<(Vec<BenchDataset>, Vec<(String, String)>)> {
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for files in discover(dir)? {
        match load_bench_dataset(&files, resamples, seed, train_fraction) {
            Ok(d) => ok.push(d),
            Err(e) => failed.push((files.name.clone(), e.to_string())),
        }
    }
    Ok((ok, failed))
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SweepSummary {
    pub skipped: usize,
    pub succeeded: usize,
    pub failed: usize,
}

/// Runs every task missing from `journal` on `jobs` worker threads.
/// Results are journaled in task order regardless of completion order, so
/// the journal does not depend on `jobs`.
pub fn run_sweep(
    journal: &mut Journal,
    models: &[RunSpec],
    datasets: &[BenchDataset],
    jobs: usize,
    timing: TimingMode,
    progress: &mut dyn FnMut(&str),
) -> Result<SweepSummary> {
    let all = bench_tasks(models, datasets);
    let pending: Vec<((usize, usize, usize), RunKey)> = all
        .into_iter()
        .map(|t| (t, task_key(models, datasets, t)))
        .filter(|(_, k)| !journal.contains(k))
        .collect();
    let mut summary = SweepSummary {
        skipped: bench_tasks(models, datasets).len() - pending.len(),
        ..SweepSummary::default()
    };
    let total = pending.len();
    let run = |i: usize| -> std::result::Result<RunRecord, String> {
        let (m, d, p) = pending[i].0;
        with_timing(timing, |t| run_single(&models[m], &datasets[d].dataset, &datasets[d].plans[p], t))
            .map(|r| r.record)
            .map_err(|e| e.to_string())
    };
    let mut handle = |i: usize, result: std::result::Result<RunRecord, String>| -> Result<()> {
        let key = &pending[i].1;
        match result {
            Ok(rec) => {
                progress(&format!(
                    "[{}/{total}] {key} acc={:.4} nll={:.4} epochs={} train_s={:.3}",
                    i + 1,
                    rec.accuracy,
                    rec.nll,
                    rec.epochs,
                    rec.train_seconds
                ));
                journal.append(rec)?;
                summary.succeeded += 1;
            }
            Err(e) => {
                progress(&format!("[{}/{total}] {key} failed: {e}", i + 1));
                journal.record_failure(key, &e)?;
                summary.failed += 1;
            }
        }
        Ok(())
    };

    if jobs <= 1 || total <= 1 {
        for i in 0..total {
            handle(i, run(i))?;
        }
        return Ok(summary);
    }

    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel();
    std::thread::scope(|scope| -> Result<()> {
        for _ in 0..jobs.min(total) {
            let tx = tx.clone();
            let (next, run) = (&next, &run);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= total || tx.send((i, run(i))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        let mut buffer = BTreeMap::new();
        let mut written = 0;
        for (i, result) in rx {
            buffer.insert(i, result);
            while let Some(result) = buffer.remove(&written) {
                if let Err(e) = handle(written, result) {
                    // stop handing out work; workers drain and exit
                    next.store(total, Ordering::SeqCst);
                    return Err(e);
                }
                written += 1;
            }
        }
        Ok(())
    })?;
    Ok(summary)
}
