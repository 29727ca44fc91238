use alloc::vec;
use alloc::vec::Vec;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::params::{Affine, Conv, Dense};
use super::{
    check_common, check_input, check_kernels, fused_block, max_probabilities, Bound, InferenceOutcome, Norm, ParamId,
    ParamStore,
};
use crate::kernels::{BatchNormState, Graph, Tensor, Value};
use crate::{Error, Result};

/// How the early-exit decision is taken for a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExitGate {
    /// Each sample exits on its own confidence.
    #[default]
    PerSample,
    /// The whole batch exits when the mean confidence clears the threshold.
    BatchMean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmrmsConfig {
    pub kernel_sizes: Vec<usize>,
    /// Filters per branch; fixed at 16.
    pub branch_filters: usize,
    pub hidden_units: usize,
    pub main_channels: Vec<usize>,
    pub main_kernel: usize,
    pub dropout_rate: f64,
    /// Confidence threshold of the early exit.
    pub tau: f64,
    pub gate: ExitGate,
    pub num_classes: usize,
}

impl LmrmsConfig {
    pub const BRANCH_FILTERS: usize = 16;

    pub fn new(num_classes: usize) -> Self {
        Self {
            kernel_sizes: vec![3, 5],
            branch_filters: Self::BRANCH_FILTERS,
            hidden_units: 64,
            main_channels: vec![64, 128],
            main_kernel: 3,
            dropout_rate: 0.3,
            tau: 0.8,
            gate: ExitGate::PerSample,
            num_classes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_kernels(&self.kernel_sizes)?;
        check_kernels(&[self.main_kernel])?;
        if self.branch_filters != Self::BRANCH_FILTERS {
            return Err(Error::InvalidConfig(alloc::format!(
                "branch_filters is fixed at {}, got {}",
                Self::BRANCH_FILTERS,
                self.branch_filters
            )));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::InvalidConfig(alloc::format!("tau must lie in (0, 1], got {}", self.tau)));
        }
        let mut widths = vec![self.hidden_units];
        widths.extend(&self.main_channels);
        check_common(self.num_classes, self.dropout_rate, &widths)
    }

    pub fn max_kernel(&self) -> usize {
        self.kernel_sizes.iter().copied().max().unwrap_or(1)
    }
}

/// Two shallow branches feeding both a pooled early-exit classifier and a
/// deeper main path. Training only ever runs the main path.
#[derive(Debug, Clone, PartialEq)]
pub struct Lmrms {
    config: LmrmsConfig,
    in_channels: usize,
    params: ParamStore,
    branches: Vec<Conv>,
    affine: Affine,
    norm: BatchNormState,
    main: Vec<Conv>,
    head: Dense,
    early_hidden: Dense,
    early_out: Dense,
}

impl Lmrms {
    pub fn new(config: LmrmsConfig, in_channels: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        if in_channels == 0 {
            return Err(Error::InvalidConfig("in_channels must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::default();
        let f = config.branch_filters;
        let branches = config
            .kernel_sizes
            .iter()
            .map(|&k| Conv::new(&mut params, &alloc::format!("branch{k}"), in_channels, f, k, &mut rng))
            .collect::<Vec<_>>();
        let concat = f * branches.len();
        let affine = Affine::new(&mut params, "main.bn", concat);
        let mut main = Vec::new();
        let mut cin = concat;
        for (i, &cout) in config.main_channels.iter().enumerate() {
            main.push(Conv::new(
                &mut params,
                &alloc::format!("main.conv{}", i + 1),
                cin,
                cout,
                config.main_kernel,
                &mut rng,
            ));
            cin = cout;
        }
        let head = Dense::new(&mut params, "main.head", cin, config.num_classes, &mut rng);
        let early_hidden = Dense::new(&mut params, "early.fc1", concat, config.hidden_units, &mut rng);
        let early_out = Dense::new(&mut params, "early.fc2", config.hidden_units, config.num_classes, &mut rng);
        Ok(Self {
            norm: BatchNormState::new(concat),
            config,
            in_channels,
            params,
            branches,
            affine,
            main,
            head,
            early_hidden,
            early_out,
        })
    }

    pub fn config(&self) -> &LmrmsConfig {
        &self.config
    }

    pub fn config_mut(&mut self) -> &mut LmrmsConfig {
        &mut self.config
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn norm_state(&self) -> &BatchNormState {
        &self.norm
    }

    pub fn norm_state_mut(&mut self) -> &mut BatchNormState {
        &mut self.norm
    }

    pub fn param_count(&self) -> usize {
        self.params.scalar_count()
    }

    pub fn early_head_params(&self) -> Vec<ParamId> {
        let mut ids = self.early_hidden.ids().to_vec();
        ids.extend(self.early_out.ids());
        ids
    }

    /// Everything except the early-exit head.
    pub fn main_params(&self) -> Vec<ParamId> {
        let head = self.early_head_params();
        self.params.ids().filter(|id| !head.contains(id)).collect()
    }

    /// Concatenated branch outputs, `[B, 16 * branches, L]`.
    pub fn features(&self, g: &mut Graph, p: &Bound, x: Value) -> Result<Value> {
        check_input("lmrms", g.value(x), self.in_channels, self.config.max_kernel())?;
        let mut outs = Vec::with_capacity(self.branches.len());
        for conv in &self.branches {
            outs.push(conv.apply(g, p, x)?);
        }
        g.concat_channels(&outs)
    }

    /// Early-exit classifier on `[B, 32]` pooled features.
    pub fn early_head(&self, g: &mut Graph, p: &Bound, pooled: Value) -> Result<Value> {
        let h = self.early_hidden.apply(g, p, pooled)?;
        let h = g.relu(h);
        self.early_out.apply(g, p, h)
    }

    pub fn forward_train(&mut self, g: &mut Graph, p: &Bound, x: Value, rng: &mut dyn RngCore) -> Result<Value> {
        let h = self.features(g, p, x)?;
        let pooled = fused_block(
            g,
            p,
            h,
            self.affine,
            Norm::Train(&mut self.norm),
            &self.main,
            self.config.dropout_rate,
            Some(rng),
        )?;
        self.head.apply(g, p, pooled)
    }

    pub fn forward_eval(&self, g: &mut Graph, p: &Bound, x: Value) -> Result<Value> {
        let h = self.features(g, p, x)?;
        let pooled = fused_block(g, p, h, self.affine, Norm::Eval, &self.main, self.config.dropout_rate, None)?;
        self.head.apply(g, p, pooled)
    }

    fn main_path_infer(&self, g: &mut Graph, p: &Bound, features: Value) -> Result<Value> {
        let pooled = fused_block(
            g,
            p,
            features,
            self.affine,
            Norm::Infer(&self.norm),
            &self.main,
            self.config.dropout_rate,
            None,
        )?;
        self.head.apply(g, p, pooled)
    }

    /// Infer-mode logits of the main path alone, for every sample.
    pub fn main_logits(&self, batch: &Tensor) -> Result<Tensor> {
        let mut g = Graph::new();
        let p = self.params.bind_frozen(&mut g);
        let x = g.constant(batch.clone());
        let f = self.features(&mut g, &p, x)?;
        let y = self.main_path_infer(&mut g, &p, f)?;
        Ok(g.value(y).clone())
    }

    /// Logits of the early-exit head alone, for every sample.
    pub fn early_logits(&self, batch: &Tensor) -> Result<Tensor> {
        let mut g = Graph::new();
        let p = self.params.bind_frozen(&mut g);
        let x = g.constant(batch.clone());
        let f = self.features(&mut g, &p, x)?;
        let pooled = g.global_avg_pool(f)?;
        let y = self.early_head(&mut g, &p, pooled)?;
        Ok(g.value(y).clone())
    }

    /// Pooled branch features `[B, 32]`, the early head's input.
    pub fn pooled_features(&self, batch: &Tensor) -> Result<Tensor> {
        let mut g = Graph::new();
        let p = self.params.bind_frozen(&mut g);
        let x = g.constant(batch.clone());
        let f = self.features(&mut g, &p, x)?;
        let pooled = g.global_avg_pool(f)?;
        Ok(g.value(pooled).clone())
    }

    pub fn infer(&self, batch: &Tensor) -> Result<InferenceOutcome> {
        self.infer_with_threshold(batch, self.config.tau)
    }

    /// Early-exit inference with an explicit threshold (any real; values
    /// above one disable the exit). Samples that stay run the main path
    /// on their own features only.
    pub fn infer_with_threshold(&self, batch: &Tensor, tau: f64) -> Result<InferenceOutcome> {
        let classes = self.config.num_classes;
        let mut g = Graph::new();
        let p = self.params.bind_frozen(&mut g);
        let x = g.constant(batch.clone());
        let features = self.features(&mut g, &p, x)?;
        let pooled = g.global_avg_pool(features)?;
        let early = self.early_head(&mut g, &p, pooled)?;
        let early_logits = g.value(early).data().to_vec();
        let confidence = max_probabilities(&early_logits, classes);
        let b = confidence.len();

        let exited_early: Vec<bool> = match self.config.gate {
            ExitGate::PerSample => confidence.iter().map(|&c| c >= tau).collect(),
            ExitGate::BatchMean => {
                let mean = crate::math::mean(&confidence);
                vec![mean >= tau; b]
            }
        };

        let mut logits = early_logits;
        let stay: Vec<usize> = (0..b).filter(|&i| !exited_early[i]).collect();
        if !stay.is_empty() {
            let ft = g.value(features);
            let [_, c, len] = ft.dims::<3>("lmrms")?;
            let row = c * len;
            let mut subset = Vec::with_capacity(stay.len() * row);
            for &i in &stay {
                subset.extend_from_slice(&ft.data()[i * row..(i + 1) * row]);
            }
            let sub = g.constant(Tensor::new(vec![stay.len(), c, len], subset)?);
            let main = self.main_path_infer(&mut g, &p, sub)?;
            let main_logits = g.value(main).data();
            for (j, &i) in stay.iter().enumerate() {
                logits[i * classes..(i + 1) * classes]
                    .copy_from_slice(&main_logits[j * classes..(j + 1) * classes]);
            }
        }
        Ok(InferenceOutcome {
            logits: Tensor::new(vec![b, classes], logits)?,
            exited_early,
            confidence,
            work: g.work(),
        })
    }
}
