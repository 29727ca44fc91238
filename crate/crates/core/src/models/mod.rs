//! MRMS-Net and LMRMS-Net.
//!
//! Both networks are fully convolutional up to a global average pool, so a
//! constructed model accepts any series length at least as long as its
//! largest kernel.

mod lmrms;
mod mrms;
mod params;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::RngCore;

use crate::kernels::{softmax_rows, BatchNormState, Graph, Mode, Tensor, Value};
use crate::{Error, Result};

pub use lmrms::{ExitGate, Lmrms, LmrmsConfig};
pub use mrms::{Mrms, MrmsConfig};
pub use params::{Bound, ParamId, ParamStore};

use params::{Affine, Conv};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    Mrms,
    Lmrms,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Mrms => "mrms",
            ModelKind::Lmrms => "lmrms",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mrms" => Ok(ModelKind::Mrms),
            "lmrms" => Ok(ModelKind::Lmrms),
            other => Err(Error::InvalidConfig(alloc::format!(
                "unknown model `{other}` (expected mrms or lmrms)"
            ))),
        }
    }
}

/// Architecture of either network, independent of the input width.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelConfig {
    Mrms(MrmsConfig),
    Lmrms(LmrmsConfig),
}

impl ModelConfig {
    /// Default architecture for `kind`.
    pub fn new(kind: ModelKind, num_classes: usize) -> Self {
        match kind {
            ModelKind::Mrms => ModelConfig::Mrms(MrmsConfig::new(num_classes)),
            ModelKind::Lmrms => ModelConfig::Lmrms(LmrmsConfig::new(num_classes)),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            ModelConfig::Mrms(_) => ModelKind::Mrms,
            ModelConfig::Lmrms(_) => ModelKind::Lmrms,
        }
    }

    pub fn num_classes(&self) -> usize {
        match self {
            ModelConfig::Mrms(c) => c.num_classes,
            ModelConfig::Lmrms(c) => c.num_classes,
        }
    }

    pub fn with_num_classes(mut self, num_classes: usize) -> Self {
        match &mut self {
            ModelConfig::Mrms(c) => c.num_classes = num_classes,
            ModelConfig::Lmrms(c) => c.num_classes = num_classes,
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelConfig::Mrms(c) => c.validate(),
            ModelConfig::Lmrms(c) => c.validate(),
        }
    }

    pub fn build(&self, in_channels: usize, seed: u64) -> Result<Model> {
        Ok(match self {
            ModelConfig::Mrms(c) => Model::Mrms(Mrms::new(c.clone(), in_channels, seed)?),
            ModelConfig::Lmrms(c) => Model::Lmrms(Lmrms::new(c.clone(), in_channels, seed)?),
        })
    }
}

/// Result of an inference pass over a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct InferenceOutcome {
    /// `B x C`.
    pub logits: Tensor,
    pub exited_early: Vec<bool>,
    /// Max softmax probability of the gating head (the early head for
    /// LMRMS-Net, the only head for MRMS-Net).
    pub confidence: Vec<f64>,
    /// Multiply-accumulate count of the pass.
    pub work: u64,
}

impl InferenceOutcome {
    pub fn num_classes(&self) -> usize {
        self.logits.shape()[1]
    }

    /// Row-wise softmax of the logits.
    pub fn probabilities(&self) -> Vec<f64> {
        softmax_rows(self.logits.data(), self.num_classes())
    }

    pub fn predictions(&self) -> Vec<usize> {
        self.logits
            .data()
            .chunks_exact(self.num_classes())
            .map(argmax)
            .collect()
    }

    pub fn early_exit_fraction(&self) -> f64 {
        if self.exited_early.is_empty() {
            return 0.0;
        }
        self.exited_early.iter().filter(|e| **e).count() as f64 / self.exited_early.len() as f64
    }
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn max_probabilities(logits: &[f64], classes: usize) -> Vec<f64> {
    softmax_rows(logits, classes)
        .chunks_exact(classes)
        .map(|r| r.iter().copied().fold(0.0, f64::max))
        .collect()
}

/// Either network behind one interface.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Mrms(Mrms),
    Lmrms(Lmrms),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Mrms(_) => ModelKind::Mrms,
            Model::Lmrms(_) => ModelKind::Lmrms,
        }
    }

    pub fn config(&self) -> ModelConfig {
        match self {
            Model::Mrms(m) => ModelConfig::Mrms(m.config().clone()),
            Model::Lmrms(m) => ModelConfig::Lmrms(m.config().clone()),
        }
    }

    pub fn in_channels(&self) -> usize {
        match self {
            Model::Mrms(m) => m.in_channels(),
            Model::Lmrms(m) => m.in_channels(),
        }
    }

    pub fn num_classes(&self) -> usize {
        match self {
            Model::Mrms(m) => m.config().num_classes,
            Model::Lmrms(m) => m.config().num_classes,
        }
    }

    pub fn params(&self) -> &ParamStore {
        match self {
            Model::Mrms(m) => m.params(),
            Model::Lmrms(m) => m.params(),
        }
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        match self {
            Model::Mrms(m) => m.params_mut(),
            Model::Lmrms(m) => m.params_mut(),
        }
    }

    /// Named batch-norm running statistics.
    pub fn norm_states(&self) -> Vec<(String, &BatchNormState)> {
        match self {
            Model::Mrms(m) => alloc::vec![(String::from("fusion.bn"), m.norm_state())],
            Model::Lmrms(m) => alloc::vec![(String::from("main.bn"), m.norm_state())],
        }
    }

    pub fn norm_states_mut(&mut self) -> Vec<(String, &mut BatchNormState)> {
        match self {
            Model::Mrms(m) => alloc::vec![(String::from("fusion.bn"), m.norm_state_mut())],
            Model::Lmrms(m) => alloc::vec![(String::from("main.bn"), m.norm_state_mut())],
        }
    }

    /// Exact number of trainable scalars.
    pub fn param_count(&self) -> usize {
        self.params().scalar_count()
    }

    /// Parameters updated by the main training phase. For LMRMS-Net this
    /// excludes the early-exit head.
    pub fn training_params(&self) -> Vec<ParamId> {
        match self {
            Model::Mrms(m) => m.params().ids().collect(),
            Model::Lmrms(m) => m.main_params(),
        }
    }

    /// Train-mode logits through the training path.
    pub fn forward_train(&mut self, g: &mut Graph, p: &Bound, x: Value, rng: &mut dyn RngCore) -> Result<Value> {
        match self {
            Model::Mrms(m) => m.forward_train(g, p, x, rng),
            Model::Lmrms(m) => m.forward_train(g, p, x, rng),
        }
    }

    /// Logits of the training path with the batch-norm layers normalizing
    /// by batch statistics, without touching running statistics and
    /// without dropout.
    pub fn forward_eval(&self, g: &mut Graph, p: &Bound, x: Value) -> Result<Value> {
        match self {
            Model::Mrms(m) => m.forward_eval(g, p, x),
            Model::Lmrms(m) => m.forward_eval(g, p, x),
        }
    }

    /// Inference; LMRMS-Net gates with its configured threshold.
    pub fn infer(&self, batch: &Tensor) -> Result<InferenceOutcome> {
        match self {
            Model::Mrms(m) => m.infer(batch),
            Model::Lmrms(m) => m.infer(batch),
        }
    }
}

pub(crate) fn check_input(op: &'static str, x: &Tensor, channels: usize, min_len: usize) -> Result<[usize; 3]> {
    let dims = x.dims::<3>(op)?;
    if dims[1] != channels {
        return Err(Error::ChannelMismatch {
            expected: channels,
            found: dims[1],
        });
    }
    if dims[2] < min_len {
        return Err(Error::InputTooShort {
            len: dims[2],
            kernel: min_len,
        });
    }
    Ok(dims)
}

pub(crate) enum Norm<'a> {
    Train(&'a mut BatchNormState),
    /// Batch statistics without updating the running ones.
    Eval,
    Infer(&'a BatchNormState),
}

/// BN -> ReLU -> conv (-> ReLU -> conv ...) -> dropout -> global average
/// pool. Returns `[B, C_last]`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn fused_block(
    g: &mut Graph,
    p: &Bound,
    x: Value,
    affine: Affine,
    norm: Norm<'_>,
    convs: &[Conv],
    dropout_rate: f64,
    rng: Option<&mut dyn RngCore>,
) -> Result<Value> {
    let (gamma, beta) = (p.get(affine.gamma), p.get(affine.beta));
    let mut h = match norm {
        Norm::Train(state) => g.batch_norm(x, gamma, beta, state, Mode::Train)?,
        Norm::Eval => {
            let channels = g.value(x).shape()[1];
            let mut scratch = BatchNormState::new(channels);
            g.batch_norm(x, gamma, beta, &mut scratch, Mode::Train)?
        }
        Norm::Infer(state) => g.batch_norm_infer(x, gamma, beta, state)?,
    };
    h = g.relu(h);
    for (i, conv) in convs.iter().enumerate() {
        if i > 0 {
            h = g.relu(h);
        }
        h = conv.apply(g, p, h)?;
    }
    if let Some(rng) = rng {
        h = g.dropout(h, dropout_rate, Mode::Train, rng)?;
    } else if !(0.0..1.0).contains(&dropout_rate) {
        return Err(Error::InvalidDropout(dropout_rate));
    }
    g.global_avg_pool(h)
}

pub(crate) fn check_kernels(kernels: &[usize]) -> Result<()> {
    if kernels.is_empty() {
        return Err(Error::InvalidConfig("at least one kernel size is required".into()));
    }
    if let Some(&k) = kernels.iter().find(|k| *k % 2 == 0) {
        return Err(Error::EvenKernel(k));
    }
    if kernels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig("kernel sizes must be strictly ascending".into()));
    }
    Ok(())
}

pub(crate) fn check_common(num_classes: usize, dropout_rate: f64, widths: &[usize]) -> Result<()> {
    if num_classes < 2 {
        return Err(Error::InvalidConfig(alloc::format!(
            "num_classes must be at least 2, got {num_classes}"
        )));
    }
    if !(0.0..1.0).contains(&dropout_rate) {
        return Err(Error::InvalidDropout(dropout_rate));
    }
    if widths.is_empty() || widths.contains(&0) {
        return Err(Error::InvalidConfig("layer widths must be non-empty and positive".into()));
    }
    Ok(())
}
