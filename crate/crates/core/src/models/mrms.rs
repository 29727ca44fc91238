use alloc::vec;
use alloc::vec::Vec;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::params::{Affine, Conv, Dense};
use super::{check_common, check_input, check_kernels, fused_block, max_probabilities, Bound, InferenceOutcome, Norm, ParamStore};
use crate::kernels::{BatchNormState, Graph, Tensor, Value};
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct MrmsConfig {
    pub kernel_sizes: Vec<usize>,
    pub branch_filters: usize,
    pub fusion_channels: Vec<usize>,
    /// Kernel size of the fusion convolutions.
    pub fusion_kernel: usize,
    pub dropout_rate: f64,
    pub num_classes: usize,
}

impl MrmsConfig {
    pub fn new(num_classes: usize) -> Self {
        Self {
            kernel_sizes: vec![3, 5, 7],
            branch_filters: 32,
            fusion_channels: vec![128, 128],
            fusion_kernel: 3,
            dropout_rate: 0.3,
            num_classes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_kernels(&self.kernel_sizes)?;
        check_kernels(&[self.fusion_kernel])?;
        let mut widths = vec![self.branch_filters];
        widths.extend(&self.fusion_channels);
        check_common(self.num_classes, self.dropout_rate, &widths)
    }

    pub fn max_kernel(&self) -> usize {
        self.kernel_sizes.iter().copied().max().unwrap_or(1)
    }
}

/// Parallel multi-scale branches (conv + ReLU each), channel concat, one
/// fusion block and a linear classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct Mrms {
    config: MrmsConfig,
    in_channels: usize,
    params: ParamStore,
    branches: Vec<Conv>,
    affine: Affine,
    norm: BatchNormState,
    fusion: Vec<Conv>,
    head: Dense,
}

impl Mrms {
    pub fn new(config: MrmsConfig, in_channels: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        if in_channels == 0 {
            return Err(crate::Error::InvalidConfig("in_channels must be positive".into()));
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
        let affine = Affine::new(&mut params, "fusion.bn", concat);
        let mut fusion = Vec::new();
        let mut cin = concat;
        for (i, &cout) in config.fusion_channels.iter().enumerate() {
            fusion.push(Conv::new(
                &mut params,
                &alloc::format!("fusion.conv{}", i + 1),
                cin,
                cout,
                config.fusion_kernel,
                &mut rng,
            ));
            cin = cout;
        }
        let head = Dense::new(&mut params, "head", cin, config.num_classes, &mut rng);
        Ok(Self {
            norm: BatchNormState::new(concat),
            config,
            in_channels,
            params,
            branches,
            affine,
            fusion,
            head,
        })
    }

    pub fn config(&self) -> &MrmsConfig {
        &self.config
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

    fn branches(&self, g: &mut Graph, p: &Bound, x: Value) -> Result<Value> {
        check_input("mrms", g.value(x), self.in_channels, self.config.max_kernel())?;
        let mut outs = Vec::with_capacity(self.branches.len());
        for conv in &self.branches {
            let h = conv.apply(g, p, x)?;
            outs.push(g.relu(h));
        }
        g.concat_channels(&outs)
    }

    pub fn forward_train(&mut self, g: &mut Graph, p: &Bound, x: Value, rng: &mut dyn RngCore) -> Result<Value> {
        let h = self.branches(g, p, x)?;
        let pooled = fused_block(
            g,
            p,
            h,
            self.affine,
            Norm::Train(&mut self.norm),
            &self.fusion,
            self.config.dropout_rate,
            Some(rng),
        )?;
        self.head.apply(g, p, pooled)
    }

    pub fn forward_eval(&self, g: &mut Graph, p: &Bound, x: Value) -> Result<Value> {
        let h = self.branches(g, p, x)?;
        let pooled = fused_block(g, p, h, self.affine, Norm::Eval, &self.fusion, self.config.dropout_rate, None)?;
        self.head.apply(g, p, pooled)
    }

    pub fn forward_infer(&self, g: &mut Graph, p: &Bound, x: Value) -> Result<Value> {
        let h = self.branches(g, p, x)?;
        let pooled = fused_block(
            g,
            p,
            h,
            self.affine,
            Norm::Infer(&self.norm),
            &self.fusion,
            self.config.dropout_rate,
            None,
        )?;
        self.head.apply(g, p, pooled)
    }

    /// Infer-mode logits, `B x C`.
    pub fn logits(&self, batch: &Tensor) -> Result<Tensor> {
        Ok(self.infer(batch)?.logits)
    }

    pub fn infer(&self, batch: &Tensor) -> Result<InferenceOutcome> {
        let mut g = Graph::new();
        let p = self.params.bind_frozen(&mut g);
        let x = g.constant(batch.clone());
        let y = self.forward_infer(&mut g, &p, x)?;
        let logits = g.value(y).clone();
        let b = logits.shape()[0];
        Ok(InferenceOutcome {
            confidence: max_probabilities(logits.data(), self.config.num_classes),
            logits,
            exited_early: vec![false; b],
            work: g.work(),
        })
    }
}
