//! Mini-batch Adam training with train-loss early stopping, evaluation and
//! the per-run benchmark step.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{derive_seed, name_hash, Dataset, ResamplePlan};
use crate::kernels::{AdamConfig, Graph, Tensor};
use crate::math;
use crate::metrics::{self, RunKey, RunRecord};
use crate::models::{Model, ModelConfig};
use crate::representations::{build_stack, RepKind, RepStack};
use crate::{Error, Result};

/// Simulated seconds per multiply-accumulate under [`Timing::Work`].
pub const SECONDS_PER_MAC: f64 = 1e-9;
/// Smallest reported duration.
pub const MIN_SECONDS: f64 = 1e-9;

const SHUFFLE_STREAM: u64 = 1;
const DROPOUT_STREAM: u64 = 2;
const HEAD_STREAM: u64 = 3;
const INIT_STREAM: u64 = 4;

/// Monotonic time source in seconds.
pub trait Clock {
    fn now(&self) -> f64;
}

/// How durations are measured.
#[derive(Clone, Copy)]
pub enum Timing<'a> {
    /// Wall-clock time from the given clock.
    Wall(&'a dyn Clock),
    /// Deterministic time derived from the multiply-accumulate count.
    Work,
}

struct Stopwatch<'a> {
    timing: Timing<'a>,
    start: f64,
}

impl<'a> Stopwatch<'a> {
    fn start(timing: Timing<'a>) -> Self {
        let start = match timing {
            Timing::Wall(c) => c.now(),
            Timing::Work => 0.0,
        };
        Self { timing, start }
    }

    fn seconds(&self, work: u64) -> f64 {
        let s = match self.timing {
            Timing::Wall(c) => c.now() - self.start,
            Timing::Work => work as f64 * SECONDS_PER_MAC,
        };
        s.max(MIN_SECONDS)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub patience: usize,
    pub min_delta: f64,
    pub seed: u64,
    /// `None` picks [`auto_batch_size`].
    pub batch_size: Option<usize>,
    pub adam: AdamConfig,
    /// Epochs for the LMRMS-Net early-exit head; `None` uses a tenth of the
    /// main phase (at least one).
    pub head_epochs: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 1500,
            patience: 50,
            min_delta: 1e-4,
            seed: 0,
            batch_size: None,
            adam: AdamConfig::default(),
            head_epochs: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_epochs == 0 {
            return Err(Error::InvalidConfig("max_epochs must be at least 1".into()));
        }
        if self.patience == 0 {
            return Err(Error::InvalidConfig("patience must be at least 1".into()));
        }
        if self.min_delta.is_nan() || self.min_delta < 0.0 {
            return Err(Error::InvalidConfig("min_delta must be non-negative".into()));
        }
        if self.batch_size == Some(0) {
            return Err(Error::InvalidConfig("batch_size must be positive".into()));
        }
        if self.adam.lr.is_nan() || self.adam.lr <= 0.0 {
            return Err(Error::InvalidConfig("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// Batch size from the workload `N * L`: 16 up to 1e5, 32 up to 1e6,
/// otherwise 64, never more than `n`.
pub fn auto_batch_size(n: usize, len: usize) -> usize {
    let w = n.saturating_mul(len);
    let b = if w <= 100_000 {
        16
    } else if w <= 1_000_000 {
        32
    } else {
        64
    };
    b.min(n).max(1)
}

/// Stacked representations `[N, R, L]` with labels.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedSet {
    inputs: Tensor,
    labels: Vec<usize>,
}

impl StackedSet {
    pub fn from_stacks(stacks: &[RepStack], labels: Vec<usize>) -> Result<Self> {
        if stacks.len() != labels.len() {
            return Err(Error::LengthMismatch {
                left: stacks.len(),
                right: labels.len(),
            });
        }
        let first = stacks.first().ok_or(Error::EmptyPartition {
            resample: 0,
            part: "stacks",
        })?;
        let (r, l) = (first.channels(), first.len());
        let mut data = Vec::with_capacity(stacks.len() * r * l);
        for (index, s) in stacks.iter().enumerate() {
            if s.channels() != r || s.len() != l {
                return Err(Error::Ragged {
                    index,
                    expected: r * l,
                    found: s.channels() * s.len(),
                });
            }
            data.extend_from_slice(s.as_slice());
        }
        Ok(Self {
            inputs: Tensor::new(vec![stacks.len(), r, l], data)?,
            labels,
        })
    }

    /// Builds the stacks of `dataset` rows `indices`.
    pub fn from_dataset(dataset: &Dataset, indices: &[usize], kinds: &[RepKind]) -> Result<Self> {
        let series = dataset.series();
        let mut stacks = Vec::with_capacity(indices.len());
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            let s = series.get(i).ok_or(Error::IndexOutOfRange {
                resample: 0,
                index: i,
                len: series.len(),
            })?;
            stacks.push(build_stack(&s.values, kinds)?);
            labels.push(s.label);
        }
        Self::from_stacks(&stacks, labels)
    }

    pub fn inputs(&self) -> &Tensor {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.inputs.shape()[1]
    }

    pub fn series_len(&self) -> usize {
        self.inputs.shape()[2]
    }

    /// `[indices.len(), R, L]` batch and its labels.
    pub fn gather(&self, indices: &[usize]) -> (Tensor, Vec<usize>) {
        let row = self.channels() * self.series_len();
        let src = self.inputs.data();
        let mut data = Vec::with_capacity(indices.len() * row);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend_from_slice(&src[i * row..(i + 1) * row]);
            labels.push(self.labels[i]);
        }
        let t = Tensor::new(vec![indices.len(), self.channels(), self.series_len()], data)
            .expect("gathered shape matches data");
        (t, labels)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Parameters and normalization statistics of the best epoch (plus the
    /// trained early head for LMRMS-Net).
    pub model: Model,
    pub epochs_run: usize,
    /// 0-based epoch of the restored snapshot.
    pub best_epoch: usize,
    pub best_train_loss: f64,
    pub loss_history: Vec<f64>,
    pub head_epochs: usize,
    pub train_seconds: f64,
    /// Multiply-accumulates spent, including the loss passes.
    pub work: u64,
}

fn check_fit(model: &Model, data: &StackedSet) -> Result<()> {
    if data.is_empty() {
        return Err(Error::EmptyPartition { resample: 0, part: "train" });
    }
    if model.in_channels() != data.channels() {
        return Err(Error::ChannelMismatch {
            expected: model.in_channels(),
            found: data.channels(),
        });
    }
    let classes = model.num_classes();
    if let Some(&label) = data.labels().iter().find(|&&l| l >= classes) {
        return Err(Error::LabelOutOfRange { label, classes });
    }
    Ok(())
}

/// Mean batch loss of the training path over fixed, unshuffled batches:
/// batch statistics, no dropout, running statistics untouched.
pub fn evaluate_loss(model: &Model, data: &StackedSet, batch_size: usize) -> Result<(f64, u64)> {
    check_fit(model, data)?;
    let order: Vec<usize> = (0..data.len()).collect();
    let mut total = 0.0;
    let mut batches = 0;
    let mut work = 0;
    for chunk in order.chunks(batch_size.max(1)) {
        let (x, y) = data.gather(chunk);
        let mut g = Graph::new();
        let p = model.params().bind_frozen(&mut g);
        let x = g.constant(x);
        let logits = model.forward_eval(&mut g, &p, x)?;
        let loss = g.softmax_cross_entropy(logits, &y)?;
        total += g.value(loss).data()[0];
        batches += 1;
        work += g.work();
    }
    Ok((total / batches as f64, work))
}

/// Trains `model` on `data`. Returns the restored best state.
pub fn train(model: Model, data: &StackedSet, config: &TrainConfig, timing: Timing<'_>) -> Result<TrainOutcome> {
    config.validate()?;
    check_fit(&model, data)?;
    let watch = Stopwatch::start(timing);
    let n = data.len();
    let batch_size = config
        .batch_size
        .unwrap_or_else(|| auto_batch_size(n, data.series_len()))
        .min(n);

    let mut model = model;
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, SHUFFLE_STREAM));
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, DROPOUT_STREAM));
    let ids = model.training_params();
    let mut adam = model.params().optimizer(&ids, config.adam);

    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::new();
    let mut best = f64::INFINITY;
    let mut best_epoch = 0;
    let mut snapshot = model.clone();
    let mut reference = f64::INFINITY;
    let mut wait = 0;
    let mut work = 0u64;

    for epoch in 0..config.max_epochs {
        order.shuffle(&mut shuffle_rng);
        for chunk in order.chunks(batch_size) {
            let (x, y) = data.gather(chunk);
            let mut g = Graph::new();
            let p = model.params().bind(&mut g);
            let x = g.constant(x);
            let logits = model.forward_train(&mut g, &p, x, &mut dropout_rng)?;
            let loss = g.softmax_cross_entropy(logits, &y)?;
            if !g.value(loss).data()[0].is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            g.backward(loss)?;
            model.params_mut().apply_gradients(&ids, &g, &p, &mut adam);
            work += g.work();
        }
        let (loss, w) = evaluate_loss(&model, data, batch_size)?;
        work += w;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        history.push(loss);
        if loss < best {
            best = loss;
            best_epoch = epoch;
            snapshot = model.clone();
        }
        if loss < reference - config.min_delta {
            reference = loss;
            wait = 0;
        } else {
            wait += 1;
            if wait >= config.patience {
                break;
            }
        }
    }

    let epochs_run = history.len();
    let mut model = snapshot;
    let mut head_epochs = 0;
    if let Model::Lmrms(_) = model {
        head_epochs = config
            .head_epochs
            .unwrap_or_else(|| (math::ceil(epochs_run as f64 / 10.0) as usize).max(1));
        work += train_early_head(&mut model, data, batch_size, head_epochs, config)?;
    }

    Ok(TrainOutcome {
        model,
        epochs_run,
        best_epoch,
        best_train_loss: best,
        loss_history: history,
        head_epochs,
        train_seconds: watch.seconds(work),
        work,
    })
}

/// Fits the early-exit classifier on the frozen pooled branch features.
fn train_early_head(model: &mut Model, data: &StackedSet, batch_size: usize, epochs: usize, config: &TrainConfig) -> Result<u64> {
    let Model::Lmrms(net) = model else {
        return Ok(0);
    };
    let pooled = net.pooled_features(data.inputs())?;
    let ids = net.early_head_params();
    let mut adam = net.params().optimizer(&ids, config.adam);
    let mut work = 0;
    let width = pooled.shape()[1];
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, HEAD_STREAM));
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 0..epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch_size) {
            let mut rows = Vec::with_capacity(chunk.len() * width);
            let mut labels = Vec::with_capacity(chunk.len());
            for &i in chunk {
                rows.extend_from_slice(&pooled.data()[i * width..(i + 1) * width]);
                labels.push(data.labels()[i]);
            }
            let mut g = Graph::new();
            let p = net.params().bind(&mut g);
            let x = g.constant(Tensor::new(vec![chunk.len(), width], rows)?);
            let logits = net.early_head(&mut g, &p, x)?;
            let loss = g.softmax_cross_entropy(logits, &labels)?;
            if !g.value(loss).data()[0].is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            g.backward(loss)?;
            work += g.work();
            net.params_mut().apply_gradients(&ids, &g, &p, &mut adam);
        }
    }
    Ok(work)
}

/// Test-set predictions and metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub predictions: Vec<usize>,
    /// Row-major `N x C` probabilities.
    pub probabilities: Vec<f64>,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub auc: Option<f64>,
    pub nll: f64,
    pub early_exit_fraction: f64,
    pub test_seconds: f64,
    pub work: u64,
}

/// Inference over `data` in chunks of `batch_size`.
pub fn evaluate(model: &Model, data: &StackedSet, batch_size: usize, timing: Timing<'_>) -> Result<Evaluation> {
    check_fit(model, data)?;
    let watch = Stopwatch::start(timing);
    let classes = model.num_classes();
    let order: Vec<usize> = (0..data.len()).collect();
    let mut predictions = Vec::with_capacity(data.len());
    let mut probabilities = Vec::with_capacity(data.len() * classes);
    let mut exits = 0usize;
    let mut work = 0;
    for chunk in order.chunks(batch_size.max(1)) {
        let (x, _) = data.gather(chunk);
        let out = model.infer(&x)?;
        predictions.extend(out.predictions());
        probabilities.extend(out.probabilities());
        exits += out.exited_early.iter().filter(|e| **e).count();
        work += out.work;
    }
    let truth = data.labels();
    Ok(Evaluation {
        accuracy: metrics::accuracy(&predictions, truth)?,
        macro_f1: metrics::macro_f1(&predictions, truth, classes)?,
        auc: metrics::auc(&probabilities, truth, classes)?,
        nll: metrics::nll(&probabilities, truth, classes)?,
        early_exit_fraction: exits as f64 / data.len() as f64,
        test_seconds: watch.seconds(work),
        work,
        predictions,
        probabilities,
    })
}

/// One model entry of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    /// Name written to records (usually `mrms` or `lmrms`).
    pub name: String,
    /// Architecture; the class count is taken from each dataset.
    pub model: ModelConfig,
    pub kinds: Vec<RepKind>,
    pub train: TrainConfig,
}

impl RunSpec {
    pub fn new(model: ModelConfig, kinds: Vec<RepKind>, train: TrainConfig) -> Self {
        Self {
            name: String::from(model.kind().as_str()),
            model,
            kinds,
            train,
        }
    }
}

/// Seed of one (dataset, resample) cell. Every model sees the same seed on
/// the same split.
pub fn run_seed(base: u64, dataset: &str, resample: usize) -> u64 {
    derive_seed(derive_seed(base, name_hash(dataset)), resample as u64)
}

/// Result of [`run_single`] with the trained model kept.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub record: RunRecord,
    pub outcome: TrainOutcome,
    pub evaluation: Evaluation,
}

/// Builds stacks, trains on `plan.train`, evaluates on `plan.test`.
pub fn run_single(spec: &RunSpec, dataset: &Dataset, plan: &ResamplePlan, timing: Timing<'_>) -> Result<RunResult> {
    plan.validate(dataset)?;
    let train_set = StackedSet::from_dataset(dataset, &plan.train, &spec.kinds)?;
    let test_set = StackedSet::from_dataset(dataset, &plan.test, &spec.kinds)?;
    let seed = run_seed(spec.train.seed, dataset.name(), plan.resample);
    let model = spec
        .model
        .clone()
        .with_num_classes(dataset.num_classes())
        .build(spec.kinds.len(), derive_seed(seed, INIT_STREAM))?;
    let params = model.param_count();
    let mut train_config = spec.train.clone();
    train_config.seed = seed;
    let batch_size = train_config
        .batch_size
        .unwrap_or_else(|| auto_batch_size(train_set.len(), train_set.series_len()))
        .min(train_set.len());
    let outcome = train(model, &train_set, &train_config, timing)?;
    let evaluation = evaluate(&outcome.model, &test_set, batch_size, timing)?;
    let record = RunRecord {
        model: spec.name.clone(),
        dataset: String::from(dataset.name()),
        resample: plan.resample,
        accuracy: evaluation.accuracy,
        macro_f1: evaluation.macro_f1,
        auc: evaluation.auc,
        nll: evaluation.nll,
        train_seconds: outcome.train_seconds,
        test_seconds: evaluation.test_seconds,
        epochs: outcome.epochs_run,
        params,
    };
    Ok(RunResult {
        record,
        outcome,
        evaluation,
    })
}

/// A dataset with its resampling plans.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchDataset {
    pub dataset: Dataset,
    pub plans: Vec<ResamplePlan>,
}

/// Every (model, dataset, plan) triple of a sweep, in the order
/// dataset, resample, model.
pub fn bench_tasks(models: &[RunSpec], datasets: &[BenchDataset]) -> Vec<(usize, usize, usize)> {
    let mut tasks = Vec::new();
    for (d, bd) in datasets.iter().enumerate() {
        for p in 0..bd.plans.len() {
            for m in 0..models.len() {
                tasks.push((m, d, p));
            }
        }
    }
    tasks
}

pub fn task_key(models: &[RunSpec], datasets: &[BenchDataset], task: (usize, usize, usize)) -> RunKey {
    let (m, d, p) = task;
    RunKey {
        model: models[m].name.clone(),
        dataset: String::from(datasets[d].dataset.name()),
        resample: datasets[d].plans[p].resample,
    }
}

/// Sequential sweep. Keys for which `skip` is true are not run; every
/// other run's result, success or failure, goes to `sink`. Returns the
/// number of runs attempted.
pub fn run_benchmark(
    models: &[RunSpec],
    datasets: &[BenchDataset],
    timing: Timing<'_>,
    skip: &dyn Fn(&RunKey) -> bool,
    sink: &mut dyn FnMut(RunKey, Result<RunRecord>),
) -> usize {
    let mut attempted = 0;
    for task in bench_tasks(models, datasets) {
        let key = task_key(models, datasets, task);
        if skip(&key) {
            continue;
        }
        attempted += 1;
        let (m, d, p) = task;
        let result = run_single(&models[m], &datasets[d].dataset, &datasets[d].plans[p], timing).map(|r| r.record);
        sink(key, result);
    }
    attempted
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batch_size_table() {
        assert_eq!(auto_batch_size(100, 100), 16);
        assert_eq!(auto_batch_size(1000, 100), 16);
        assert_eq!(auto_batch_size(1001, 100), 32);
        assert_eq!(auto_batch_size(5000, 500), 64);
        assert_eq!(auto_batch_size(8, 100), 8);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            patience: 0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            max_epochs: 0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
