//! Tape-based reverse-mode differentiation.
//!
//! Nodes are appended in evaluation order, so the tape is already
//! topologically sorted and [`Graph::backward`] is one reverse sweep.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::Tensor;
use crate::math;
use crate::{Error, Result};

/// Numerical floor inside the batch-norm square root.
pub const BN_EPS: f64 = 1e-5;
/// Weight of the current batch in the running statistics.
pub const BN_MOMENTUM: f64 = 0.1;

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Value(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Per-channel running statistics of a batch-norm layer. The affine
/// parameters live with the other trainable tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormState {
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
}

impl BatchNormState {
    /// Mean 0 and variance 1, which is also what infer mode uses before any
    /// training step.
    pub fn new(channels: usize) -> Self {
        Self {
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            momentum: BN_MOMENTUM,
        }
    }

    pub fn channels(&self) -> usize {
        self.running_mean.len()
    }
}

enum Stats<'a> {
    Batch(&'a mut BatchNormState),
    Running(&'a BatchNormState),
}

#[derive(Debug)]
enum Op {
    Leaf,
    Conv1d {
        input: Value,
        weight: Value,
        bias: Value,
    },
    BatchNorm {
        input: Value,
        gamma: Value,
        beta: Value,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
        batch_stats: bool,
    },
    Relu {
        input: Value,
    },
    Dropout {
        input: Value,
        mask: Vec<f64>,
    },
    AvgPool {
        input: Value,
    },
    Dense {
        input: Value,
        weight: Value,
        bias: Value,
    },
    Concat {
        inputs: Vec<Value>,
    },
    CrossEntropy {
        logits: Value,
        labels: Vec<usize>,
        probs: Vec<f64>,
    },
    WeightedSum {
        input: Value,
        weights: Vec<f64>,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    grad: Option<Vec<f64>>,
    needs_grad: bool,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    work: u64,
}

fn add_into(nodes: &mut [Node], v: Value, delta: &[f64]) {
    let node = &mut nodes[v.0];
    match &mut node.grad {
        Some(g) => {
            for (a, d) in g.iter_mut().zip(delta) {
                *a += d;
            }
        }
        None => node.grad = Some(delta.to_vec()),
    }
}

/// Numerically stable softmax over the rows of a `rows x cols` matrix.
pub fn softmax_rows(logits: &[f64], cols: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(logits.len());
    for row in logits.chunks_exact(cols) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let start = out.len();
        let mut sum = 0.0;
        for &z in row {
            let e = math::exp(z - max);
            sum += e;
            out.push(e);
        }
        for p in &mut out[start..] {
            *p /= sum;
        }
    }
    out
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Multiply-accumulate operations performed so far (forward and
    /// backward); a deterministic proxy for compute time.
    pub fn work(&self) -> u64 {
        self.work
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Value {
        self.nodes.push(Node {
            value,
            grad: None,
            needs_grad,
            op,
        });
        Value(self.nodes.len() - 1)
    }

    fn needs(&self, v: Value) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// A leaf that receives a gradient.
    pub fn param(&mut self, t: Tensor) -> Value {
        self.push(t, Op::Leaf, true)
    }

    /// A leaf excluded from differentiation.
    pub fn constant(&mut self, t: Tensor) -> Value {
        self.push(t, Op::Leaf, false)
    }

    pub fn value(&self, v: Value) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Gradient accumulated by [`Graph::backward`]; `None` when no path
    /// reached the node.
    pub fn grad(&self, v: Value) -> Option<&[f64]> {
        self.nodes[v.0].grad.as_deref()
    }

    /// `[B, Cin, L] * [Cout, Cin, k] + [Cout] -> [B, Cout, L]`, stride 1,
    /// zero "same" padding of `(k - 1) / 2`.
    pub fn conv1d(&mut self, input: Value, weight: Value, bias: Value) -> Result<Value> {
        const OP: &str = "conv1d";
        let [b, cin, len] = self.value(input).dims::<3>(OP)?;
        let [cout, wcin, k] = self.value(weight).dims::<3>(OP)?;
        let [nb] = self.value(bias).dims::<1>(OP)?;
        if wcin != cin {
            return Err(Error::Shape {
                op: OP,
                dimension: "input channels",
                expected: wcin,
                found: cin,
            });
        }
        if nb != cout {
            return Err(Error::Shape {
                op: OP,
                dimension: "bias length",
                expected: cout,
                found: nb,
            });
        }
        if k % 2 == 0 {
            return Err(Error::EvenKernel(k));
        }
        let pad = (k / 2) as isize;
        let x = self.value(input).data();
        let w = self.value(weight).data();
        let bv = self.value(bias).data();
        let mut out = vec![0.0; b * cout * len];
        for bi in 0..b {
            for o in 0..cout {
                let row = &mut out[(bi * cout + o) * len..(bi * cout + o + 1) * len];
                row.fill(bv[o]);
                for c in 0..cin {
                    let xrow = &x[(bi * cin + c) * len..(bi * cin + c + 1) * len];
                    for j in 0..k {
                        let wv = w[(o * cin + c) * k + j];
                        let shift = j as isize - pad;
                        let (t0, t1) = valid_range(len, shift);
                        let src =
                            &xrow[(t0 as isize + shift) as usize..(t1 as isize + shift) as usize];
                        for (dst, s) in row[t0..t1].iter_mut().zip(src) {
                            *dst += wv * s;
                        }
                    }
                }
            }
        }
        self.work += (b * cout * cin * k * len) as u64;
        let needs = self.needs(input) || self.needs(weight) || self.needs(bias);
        let t = Tensor::new(vec![b, cout, len], out)?;
        Ok(self.push(
            t,
            Op::Conv1d {
                input,
                weight,
                bias,
            },
            needs,
        ))
    }

    /// Batch normalization over `(B, L)` per channel of a `[B, C, L]` input.
    /// Train mode normalizes by batch statistics and updates `state`; infer
    /// mode is the fixed affine map given by the running statistics.
    pub fn batch_norm(
        &mut self,
        input: Value,
        gamma: Value,
        beta: Value,
        state: &mut BatchNormState,
        mode: Mode,
    ) -> Result<Value> {
        match mode {
            Mode::Train => self.batch_norm_impl(input, gamma, beta, Stats::Batch(state)),
            Mode::Infer => self.batch_norm_impl(input, gamma, beta, Stats::Running(state)),
        }
    }

    /// Infer-mode batch norm on a shared state.
    pub fn batch_norm_infer(
        &mut self,
        input: Value,
        gamma: Value,
        beta: Value,
        state: &BatchNormState,
    ) -> Result<Value> {
        self.batch_norm_impl(input, gamma, beta, Stats::Running(state))
    }

    fn batch_norm_impl(
        &mut self,
        input: Value,
        gamma: Value,
        beta: Value,
        mut stats: Stats<'_>,
    ) -> Result<Value> {
        const OP: &str = "batch_norm";
        let state_channels = match &stats {
            Stats::Batch(s) => s.channels(),
            Stats::Running(s) => s.channels(),
        };
        let [b, c, len] = self.value(input).dims::<3>(OP)?;
        for (v, dimension) in [(gamma, "gamma length"), (beta, "beta length")] {
            let [n] = self.value(v).dims::<1>(OP)?;
            if n != c {
                return Err(Error::Shape {
                    op: OP,
                    dimension,
                    expected: c,
                    found: n,
                });
            }
        }
        if state_channels != c {
            return Err(Error::Shape {
                op: OP,
                dimension: "running statistics",
                expected: c,
                found: state_channels,
            });
        }
        let m = b * len;
        let batch_stats = matches!(stats, Stats::Batch(_));
        if batch_stats && m < 2 {
            return Err(Error::BatchTooSmall(m));
        }
        let x = self.value(input).data();
        let g = self.value(gamma).data();
        let be = self.value(beta).data();
        let mut xhat = vec![0.0; x.len()];
        let mut inv_std = vec![0.0; c];
        let mut out = vec![0.0; x.len()];
        for ch in 0..c {
            let (mean, var) = match &mut stats {
                Stats::Batch(state) => {
                    let mut sum = 0.0;
                    for bi in 0..b {
                        let base = (bi * c + ch) * len;
                        sum += x[base..base + len].iter().sum::<f64>();
                    }
                    let mean = sum / m as f64;
                    let mut sq = 0.0;
                    for bi in 0..b {
                        let base = (bi * c + ch) * len;
                        sq += x[base..base + len]
                            .iter()
                            .map(|v| (v - mean) * (v - mean))
                            .sum::<f64>();
                    }
                    let var = sq / m as f64;
                    let unbiased = sq / (m - 1) as f64;
                    let mom = state.momentum;
                    state.running_mean[ch] = (1.0 - mom) * state.running_mean[ch] + mom * mean;
                    state.running_var[ch] = (1.0 - mom) * state.running_var[ch] + mom * unbiased;
                    (mean, var)
                }
                Stats::Running(state) => (state.running_mean[ch], state.running_var[ch]),
            };
            let is = 1.0 / math::sqrt(var + BN_EPS);
            inv_std[ch] = is;
            for bi in 0..b {
                let base = (bi * c + ch) * len;
                for t in base..base + len {
                    let h = (x[t] - mean) * is;
                    xhat[t] = h;
                    out[t] = g[ch] * h + be[ch];
                }
            }
        }
        self.work += (2 * x.len()) as u64;
        let needs = self.needs(input) || self.needs(gamma) || self.needs(beta);
        let t = Tensor::new(vec![b, c, len], out)?;
        Ok(self.push(
            t,
            Op::BatchNorm {
                input,
                gamma,
                beta,
                xhat,
                inv_std,
                batch_stats,
            },
            needs,
        ))
    }

    pub fn relu(&mut self, input: Value) -> Value {
        let x = self.value(input);
        let out: Vec<f64> = x.data().iter().map(|v| v.max(0.0)).collect();
        let t = Tensor::new(x.shape().to_vec(), out).expect("same shape");
        let needs = self.needs(input);
        self.push(t, Op::Relu { input }, needs)
    }

    /// Inverted dropout: kept entries are scaled by `1 / (1 - rate)` so infer
    /// mode is the identity (the input handle is returned unchanged).
    pub fn dropout<R: Rng + ?Sized>(
        &mut self,
        input: Value,
        rate: f64,
        mode: Mode,
        rng: &mut R,
    ) -> Result<Value> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidDropout(rate));
        }
        if mode == Mode::Infer || rate == 0.0 {
            return Ok(input);
        }
        let keep = 1.0 / (1.0 - rate);
        let x = self.value(input);
        let mask: Vec<f64> = (0..x.len())
            .map(|_| {
                if rng.random::<f64>() < rate {
                    0.0
                } else {
                    keep
                }
            })
            .collect();
        let out: Vec<f64> = x.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
        let t = Tensor::new(x.shape().to_vec(), out)?;
        let needs = self.needs(input);
        Ok(self.push(t, Op::Dropout { input, mask }, needs))
    }

    /// `[B, C, L] -> [B, C]` mean over the last axis.
    pub fn global_avg_pool(&mut self, input: Value) -> Result<Value> {
        let [b, c, len] = self.value(input).dims::<3>("global_avg_pool")?;
        let x = self.value(input).data();
        let out: Vec<f64> = x
            .chunks_exact(len)
            .map(|row| row.iter().sum::<f64>() / len as f64)
            .collect();
        self.work += x.len() as u64;
        let t = Tensor::new(vec![b, c], out)?;
        let needs = self.needs(input);
        Ok(self.push(t, Op::AvgPool { input }, needs))
    }

    /// `[B, F] x [G, F]^T + [G] -> [B, G]`.
    pub fn dense(&mut self, input: Value, weight: Value, bias: Value) -> Result<Value> {
        const OP: &str = "dense";
        let [b, f] = self.value(input).dims::<2>(OP)?;
        let [g, wf] = self.value(weight).dims::<2>(OP)?;
        let [nb] = self.value(bias).dims::<1>(OP)?;
        if wf != f {
            return Err(Error::Shape {
                op: OP,
                dimension: "input features",
                expected: wf,
                found: f,
            });
        }
        if nb != g {
            return Err(Error::Shape {
                op: OP,
                dimension: "bias length",
                expected: g,
                found: nb,
            });
        }
        let x = self.value(input).data();
        let w = self.value(weight).data();
        let bv = self.value(bias).data();
        let mut out = vec![0.0; b * g];
        for bi in 0..b {
            let xr = &x[bi * f..(bi + 1) * f];
            for gi in 0..g {
                let wr = &w[gi * f..(gi + 1) * f];
                out[bi * g + gi] = bv[gi] + wr.iter().zip(xr).map(|(a, c)| a * c).sum::<f64>();
            }
        }
        self.work += (b * g * f) as u64;
        let needs = self.needs(input) || self.needs(weight) || self.needs(bias);
        let t = Tensor::new(vec![b, g], out)?;
        Ok(self.push(
            t,
            Op::Dense {
                input,
                weight,
                bias,
            },
            needs,
        ))
    }

    /// Concatenates `[B, Ci, L]` inputs along the channel axis.
    pub fn concat_channels(&mut self, inputs: &[Value]) -> Result<Value> {
        const OP: &str = "concat_channels";
        let first = *inputs
            .first()
            .ok_or(Error::InvalidConfig("concat of zero inputs".into()))?;
        let [b, _, len] = self.value(first).dims::<3>(OP)?;
        let mut channels = Vec::with_capacity(inputs.len());
        for &v in inputs {
            let [vb, vc, vl] = self.value(v).dims::<3>(OP)?;
            if vb != b {
                return Err(Error::Shape {
                    op: OP,
                    dimension: "batch",
                    expected: b,
                    found: vb,
                });
            }
            if vl != len {
                return Err(Error::Shape {
                    op: OP,
                    dimension: "length",
                    expected: len,
                    found: vl,
                });
            }
            channels.push(vc);
        }
        let total: usize = channels.iter().sum();
        let mut out = Vec::with_capacity(b * total * len);
        for bi in 0..b {
            for (&v, &c) in inputs.iter().zip(&channels) {
                let x = self.value(v).data();
                out.extend_from_slice(&x[bi * c * len..(bi + 1) * c * len]);
            }
        }
        let needs = inputs.iter().any(|&v| self.needs(v));
        let t = Tensor::new(vec![b, total, len], out)?;
        Ok(self.push(
            t,
            Op::Concat {
                inputs: inputs.to_vec(),
            },
            needs,
        ))
    }

    /// Mean over the batch of `-log softmax(logits)[label]`.
    pub fn softmax_cross_entropy(&mut self, logits: Value, labels: &[usize]) -> Result<Value> {
        const OP: &str = "softmax_cross_entropy";
        let [b, c] = self.value(logits).dims::<2>(OP)?;
        if labels.len() != b {
            return Err(Error::Shape {
                op: OP,
                dimension: "labels",
                expected: b,
                found: labels.len(),
            });
        }
        if c < 2 {
            return Err(Error::InvalidConfig(
                "cross entropy needs at least two classes".into(),
            ));
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= c) {
            return Err(Error::LabelOutOfRange { label, classes: c });
        }
        let z = self.value(logits).data();
        let mut loss = 0.0;
        for (row, &y) in z.chunks_exact(c).zip(labels) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + math::ln(row.iter().map(|v| math::exp(v - max)).sum::<f64>());
            loss += lse - row[y];
        }
        loss /= b as f64;
        let probs = softmax_rows(z, c);
        let needs = self.needs(logits);
        Ok(self.push(
            Tensor::new(vec![1], vec![loss])?,
            Op::CrossEntropy {
                logits,
                labels: labels.to_vec(),
                probs,
            },
            needs,
        ))
    }

    /// `sum_i weights[i] * input[i]`; turns any tensor into a scalar probe
    /// for gradient checks.
    pub fn weighted_sum(&mut self, input: Value, weights: &[f64]) -> Result<Value> {
        let x = self.value(input).data();
        if x.len() != weights.len() {
            return Err(Error::Shape {
                op: "weighted_sum",
                dimension: "element count",
                expected: x.len(),
                found: weights.len(),
            });
        }
        let s: f64 = x.iter().zip(weights).map(|(a, b)| a * b).sum();
        let needs = self.needs(input);
        Ok(self.push(
            Tensor::new(vec![1], vec![s])?,
            Op::WeightedSum {
                input,
                weights: weights.to_vec(),
            },
            needs,
        ))
    }

    /// Back-propagates from a scalar node, accumulating into `grad` of every
    /// node that needs one.
    pub fn backward(&mut self, loss: Value) -> Result<()> {
        let n = self.value(loss).len();
        if n != 1 {
            return Err(Error::Shape {
                op: "backward",
                dimension: "loss element count",
                expected: 1,
                found: n,
            });
        }
        self.nodes[loss.0].grad = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let (before, rest) = self.nodes.split_at_mut(i);
            let node = &rest[0];
            let Some(gout) = node.grad.as_deref() else {
                continue;
            };
            if !node.needs_grad {
                continue;
            }
            self.work += backward_node(before, node, gout);
        }
        Ok(())
    }
}

fn valid_range(len: usize, shift: isize) -> (usize, usize) {
    let t0 = (-shift).max(0) as usize;
    let t1 = (len as isize - shift).clamp(0, len as isize) as usize;
    (t0.min(t1), t1)
}

/// Pushes `gout` (gradient of `node`'s output) to its inputs. Returns the
/// multiply-accumulate count.
fn backward_node(nodes: &mut [Node], node: &Node, gout: &[f64]) -> u64 {
    match &node.op {
        Op::Leaf => 0,
        Op::Conv1d {
            input,
            weight,
            bias,
        } => {
            let [b, cout, len] = node.value.dims::<3>("conv1d").expect("checked");
            let [_, cin, k] = nodes[weight.0].value.dims::<3>("conv1d").expect("checked");
            let pad = (k / 2) as isize;
            let (need_x, need_w, need_b) = (
                nodes[input.0].needs_grad,
                nodes[weight.0].needs_grad,
                nodes[bias.0].needs_grad,
            );
            let x = nodes[input.0].value.data();
            let w = nodes[weight.0].value.data();
            let mut dx = if need_x {
                vec![0.0; x.len()]
            } else {
                Vec::new()
            };
            let mut dw = if need_w {
                vec![0.0; w.len()]
            } else {
                Vec::new()
            };
            let mut db = vec![0.0; cout];
            for bi in 0..b {
                for o in 0..cout {
                    let g = &gout[(bi * cout + o) * len..(bi * cout + o + 1) * len];
                    db[o] += g.iter().sum::<f64>();
                    for c in 0..cin {
                        let xoff = (bi * cin + c) * len;
                        for j in 0..k {
                            let widx = (o * cin + c) * k + j;
                            let shift = j as isize - pad;
                            let (t0, t1) = valid_range(len, shift);
                            let s0 = (t0 as isize + shift) as usize + xoff;
                            let s1 = (t1 as isize + shift) as usize + xoff;
                            if need_w {
                                dw[widx] += g[t0..t1]
                                    .iter()
                                    .zip(&x[s0..s1])
                                    .map(|(a, c)| a * c)
                                    .sum::<f64>();
                            }
                            if need_x {
                                let wv = w[widx];
                                for (d, gv) in dx[s0..s1].iter_mut().zip(&g[t0..t1]) {
                                    *d += wv * gv;
                                }
                            }
                        }
                    }
                }
            }
            if need_x {
                add_into(nodes, *input, &dx);
            }
            if need_w {
                add_into(nodes, *weight, &dw);
            }
            if need_b {
                add_into(nodes, *bias, &db);
            }
            let per = (b * cout * cin * k * len) as u64;
            per * (need_x as u64 + need_w as u64)
        }
        Op::BatchNorm {
            input,
            gamma,
            beta,
            xhat,
            inv_std,
            batch_stats,
        } => {
            let [b, c, len] = node.value.dims::<3>("batch_norm").expect("checked");
            let m = (b * len) as f64;
            let g = nodes[gamma.0].value.data().to_vec();
            let mut dgamma = vec![0.0; c];
            let mut dbeta = vec![0.0; c];
            for bi in 0..b {
                for ch in 0..c {
                    let base = (bi * c + ch) * len;
                    for t in base..base + len {
                        dgamma[ch] += gout[t] * xhat[t];
                        dbeta[ch] += gout[t];
                    }
                }
            }
            if nodes[input.0].needs_grad {
                let mut dx = vec![0.0; gout.len()];
                for bi in 0..b {
                    for ch in 0..c {
                        let base = (bi * c + ch) * len;
                        let scale = g[ch] * inv_std[ch];
                        for t in base..base + len {
                            dx[t] = if *batch_stats {
                                scale / m * (m * gout[t] - dbeta[ch] - xhat[t] * dgamma[ch])
                            } else {
                                scale * gout[t]
                            };
                        }
                    }
                }
                add_into(nodes, *input, &dx);
            }
            if nodes[gamma.0].needs_grad {
                add_into(nodes, *gamma, &dgamma);
            }
            if nodes[beta.0].needs_grad {
                add_into(nodes, *beta, &dbeta);
            }
            3 * gout.len() as u64
        }
        Op::Relu { input } => {
            if nodes[input.0].needs_grad {
                let dx: Vec<f64> = node
                    .value
                    .data()
                    .iter()
                    .zip(gout)
                    .map(|(y, g)| if *y > 0.0 { *g } else { 0.0 })
                    .collect();
                add_into(nodes, *input, &dx);
            }
            0
        }
        Op::Dropout { input, mask } => {
            if nodes[input.0].needs_grad {
                let dx: Vec<f64> = gout.iter().zip(mask).map(|(g, m)| g * m).collect();
                add_into(nodes, *input, &dx);
            }
            0
        }
        Op::AvgPool { input } => {
            if nodes[input.0].needs_grad {
                let [_, _, len] = nodes[input.0]
                    .value
                    .dims::<3>("global_avg_pool")
                    .expect("checked");
                let inv = 1.0 / len as f64;
                let mut dx = Vec::with_capacity(gout.len() * len);
                for g in gout {
                    dx.extend(core::iter::repeat_n(g * inv, len));
                }
                add_into(nodes, *input, &dx);
            }
            gout.len() as u64
        }
        Op::Dense {
            input,
            weight,
            bias,
        } => {
            let [b, g] = node.value.dims::<2>("dense").expect("checked");
            let [_, f] = nodes[weight.0].value.dims::<2>("dense").expect("checked");
            let mut work = 0;
            if nodes[input.0].needs_grad {
                let w = nodes[weight.0].value.data();
                let mut dx = vec![0.0; b * f];
                for bi in 0..b {
                    for gi in 0..g {
                        let go = gout[bi * g + gi];
                        for (d, wv) in dx[bi * f..(bi + 1) * f]
                            .iter_mut()
                            .zip(&w[gi * f..(gi + 1) * f])
                        {
                            *d += go * wv;
                        }
                    }
                }
                add_into(nodes, *input, &dx);
                work += (b * g * f) as u64;
            }
            if nodes[weight.0].needs_grad {
                let x = nodes[input.0].value.data();
                let mut dw = vec![0.0; g * f];
                for bi in 0..b {
                    for gi in 0..g {
                        let go = gout[bi * g + gi];
                        for (d, xv) in dw[gi * f..(gi + 1) * f]
                            .iter_mut()
                            .zip(&x[bi * f..(bi + 1) * f])
                        {
                            *d += go * xv;
                        }
                    }
                }
                add_into(nodes, *weight, &dw);
                work += (b * g * f) as u64;
            }
            if nodes[bias.0].needs_grad {
                let mut db = vec![0.0; g];
                for row in gout.chunks_exact(g) {
                    for (d, v) in db.iter_mut().zip(row) {
                        *d += v;
                    }
                }
                add_into(nodes, *bias, &db);
            }
            work
        }
        Op::Concat { inputs } => {
            let [b, total, len] = node.value.dims::<3>("concat_channels").expect("checked");
            let mut offset = 0;
            for v in inputs {
                let [_, c, _] = nodes[v.0]
                    .value
                    .dims::<3>("concat_channels")
                    .expect("checked");
                if nodes[v.0].needs_grad {
                    let mut dx = Vec::with_capacity(b * c * len);
                    for bi in 0..b {
                        let start = (bi * total + offset) * len;
                        dx.extend_from_slice(&gout[start..start + c * len]);
                    }
                    add_into(nodes, *v, &dx);
                }
                offset += c;
            }
            0
        }
        Op::CrossEntropy {
            logits,
            labels,
            probs,
        } => {
            if nodes[logits.0].needs_grad {
                let b = labels.len();
                let c = probs.len() / b;
                let scale = gout[0] / b as f64;
                let mut dz: Vec<f64> = probs.iter().map(|p| p * scale).collect();
                for (i, &y) in labels.iter().enumerate() {
                    dz[i * c + y] -= scale;
                }
                add_into(nodes, *logits, &dz);
            }
            probs.len() as u64
        }
        Op::WeightedSum { input, weights } => {
            if nodes[input.0].needs_grad {
                let dx: Vec<f64> = weights.iter().map(|w| w * gout[0]).collect();
                add_into(nodes, *input, &dx);
            }
            weights.len() as u64
        }
    }
}
