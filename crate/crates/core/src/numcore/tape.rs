//! Reverse-mode tape over the kernel set in [`super::kernels`].

use rand::Rng;

use super::kernels::{self, SAFE_LOG_FLOOR};
use super::{ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Running batch-norm statistics, updated by exponential moving average.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub initialized: bool,
    pub momentum: f64,
    pub eps: f64,
}

impl RunningStats {
    pub const EPS: f64 = 1e-5;
    pub const MOMENTUM: f64 = 0.1;

    pub fn new(channels: usize) -> Self {
        Self {
            mean: vec![0.0; channels],
            var: vec![1.0; channels],
            initialized: false,
            momentum: Self::MOMENTUM,
            eps: Self::EPS,
        }
    }

    fn update(&mut self, mean: &[f64], var: &[f64]) {
        let m = self.momentum;
        for (r, &v) in self.mean.iter_mut().zip(mean) {
            *r = (1.0 - m) * *r + m * v;
        }
        for (r, &v) in self.var.iter_mut().zip(var) {
            *r = (1.0 - m) * *r + m * v;
        }
        self.initialized = true;
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    ConvTemporal { input: Var, kernel: Var, bias: Option<Var>, stride: usize },
    ConvSpatial { input: Var, kernel: Var, bias: Option<Var>, stride: usize },
    BatchNorm { input: Var, gamma: Var, beta: Var, xhat: Vec<f64>, inv_std: Vec<f64>, batch_stats: bool },
    Elu(Var),
    Square(Var),
    SafeLog(Var),
    MaxPool { input: Var, argmax: Vec<usize> },
    MeanPool { input: Var, len: usize, stride: usize },
    Dense { input: Var, weight: Var, bias: Option<Var> },
    LogSoftmax(Var),
    Nll { input: Var, labels: Vec<usize> },
    Sum(Var),
    Reshape(Var),
    Dropout { input: Var, mask: Vec<f64> },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Gradients of leaves created with [`Tape::input_with_grad`].
#[derive(Debug, Default)]
pub struct LeafGrads(Vec<(Var, Tensor)>);

impl LeafGrads {
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.0.iter().find(|(v, _)| *v == var).map(|(_, t)| t)
    }
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn clear(&mut self) {
        self.nodes.clear();
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn needs_any(&self, vars: &[Option<Var>]) -> bool {
        vars.iter().flatten().any(|&v| self.needs(v))
    }

    /// Constant input; no gradient is propagated into it.
    pub fn input(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Input whose gradient is returned by [`Tape::backward`].
    pub fn input_with_grad(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        self.push(store.get(id).value.clone(), Op::Param(id), true)
    }

    pub fn conv_temporal(&mut self, input: Var, kernel: Var, bias: Option<Var>, stride: usize) -> Result<Var> {
        let out = kernels::conv_temporal(self.value(input), self.value(kernel), bias.map(|b| self.value(b)), stride)?;
        let ng = self.needs_any(&[Some(input), Some(kernel), bias]);
        Ok(self.push(out, Op::ConvTemporal { input, kernel, bias, stride }, ng))
    }

    pub fn conv_spatial(&mut self, input: Var, kernel: Var, bias: Option<Var>, stride: usize) -> Result<Var> {
        let out = kernels::conv_spatial(self.value(input), self.value(kernel), bias.map(|b| self.value(b)), stride)?;
        let ng = self.needs_any(&[Some(input), Some(kernel), bias]);
        Ok(self.push(out, Op::ConvSpatial { input, kernel, bias, stride }, ng))
    }

    /// Per-channel normalization. Train mode uses batch statistics and updates
    /// `stats`; eval mode requires `stats` to have seen a training batch.
    pub fn batch_norm(
        &mut self,
        input: Var,
        gamma: Var,
        beta: Var,
        stats: &mut RunningStats,
        mode: Mode,
    ) -> Result<Var> {
        let (x, g, b) = (self.value(input), self.value(gamma), self.value(beta));
        let (out, xhat, inv_std, batch_stats) = match mode {
            Mode::Train => {
                let r = kernels::batch_norm_train(x, g, b, stats.eps)?;
                stats.update(&r.mean, &r.var_unbiased);
                (r.output, r.xhat, r.inv_std, true)
            }
            Mode::Eval => {
                if !stats.initialized {
                    return Err(Error::UninitializedStatistics);
                }
                let layout = kernels::bn_layout(x)?;
                if layout.1 != stats.mean.len() {
                    return Err(Error::dim("running statistics do not match channel count"));
                }
                let inv_std: Vec<f64> = stats.var.iter().map(|v| 1.0 / (v + stats.eps).sqrt()).collect();
                let (out, xhat) = kernels::affine_normalize(x, layout, g, b, &stats.mean, &inv_std)?;
                (out, xhat, inv_std, false)
            }
        };
        let ng = self.needs_any(&[Some(input), Some(gamma), Some(beta)]);
        Ok(self.push(out, Op::BatchNorm { input, gamma, beta, xhat, inv_std, batch_stats }, ng))
    }

    pub fn elu(&mut self, x: Var) -> Var {
        let out = kernels::elu(self.value(x));
        let ng = self.needs(x);
        self.push(out, Op::Elu(x), ng)
    }

    pub fn square(&mut self, x: Var) -> Var {
        let out = kernels::square(self.value(x));
        let ng = self.needs(x);
        self.push(out, Op::Square(x), ng)
    }

    pub fn safe_log(&mut self, x: Var) -> Var {
        let out = kernels::safe_log(self.value(x), SAFE_LOG_FLOOR);
        let ng = self.needs(x);
        self.push(out, Op::SafeLog(x), ng)
    }

    pub fn max_pool_t(&mut self, x: Var, len: usize, stride: usize) -> Result<Var> {
        let (out, argmax) = kernels::max_pool_t(self.value(x), len, stride)?;
        let ng = self.needs(x);
        Ok(self.push(out, Op::MaxPool { input: x, argmax }, ng))
    }

    pub fn mean_pool_t(&mut self, x: Var, len: usize, stride: usize) -> Result<Var> {
        let out = kernels::mean_pool_t(self.value(x), len, stride)?;
        let ng = self.needs(x);
        Ok(self.push(out, Op::MeanPool { input: x, len, stride }, ng))
    }

    pub fn dense(&mut self, x: Var, weight: Var, bias: Option<Var>) -> Result<Var> {
        let out = kernels::dense(self.value(x), self.value(weight), bias.map(|b| self.value(b)))?;
        let ng = self.needs_any(&[Some(x), Some(weight), bias]);
        Ok(self.push(out, Op::Dense { input: x, weight, bias }, ng))
    }

    pub fn log_softmax(&mut self, x: Var) -> Result<Var> {
        let out = kernels::log_softmax(self.value(x))?;
        let ng = self.needs(x);
        Ok(self.push(out, Op::LogSoftmax(x), ng))
    }

    pub fn nll_loss(&mut self, log_probs: Var, labels: &[usize]) -> Result<Var> {
        let loss = kernels::nll_loss(self.value(log_probs), labels)?;
        let ng = self.needs(log_probs);
        Ok(self.push(Tensor::scalar(loss), Op::Nll { input: log_probs, labels: labels.to_vec() }, ng))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).sum();
        let ng = self.needs(x);
        self.push(Tensor::scalar(s), Op::Sum(x), ng)
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let out = self.value(x).clone().reshaped(shape)?;
        let ng = self.needs(x);
        Ok(self.push(out, Op::Reshape(x), ng))
    }

    /// Inverted dropout: zeroes each element with probability `p` and scales
    /// the survivors by `1/(1-p)`.
    pub fn dropout(&mut self, x: Var, p: f64, rng: &mut impl Rng) -> Var {
        let keep = 1.0 - p;
        let mask: Vec<f64> =
            (0..self.value(x).len()).map(|_| if rng.random::<f64>() < p { 0.0 } else { 1.0 / keep }).collect();
        let v = self.value(x);
        let out = Tensor::from_fn(v.shape(), |i| v.data()[i] * mask[i]);
        let ng = self.needs(x);
        self.push(out, Op::Dropout { input: x, mask }, ng)
    }

    /// Propagates d`loss` back through the tape. Parameter gradients in
    /// `store` are overwritten (zero for parameters not on the tape); the tape
    /// is cleared afterwards.
    pub fn backward(&mut self, loss: Var, store: &mut ParamStore) -> Result<LeafGrads> {
        let result = self.backward_inner(loss, store);
        self.nodes.clear();
        result
    }

    fn backward_inner(&mut self, loss: Var, store: &mut ParamStore) -> Result<LeafGrads> {
        if !self.value(loss).is_scalar() {
            return Err(Error::dim(format!("backward needs a scalar loss, got shape {:?}", self.value(loss).shape())));
        }
        store.zero_grad();
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(1.0));
        let mut leaves = LeafGrads::default();

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let nodes = &self.nodes;
            let mut send = |v: Var, t: Tensor| {
                if nodes[v.0].needs_grad {
                    match &mut grads[v.0] {
                        Some(acc) => acc.add_assign(&t),
                        slot @ None => *slot = Some(t),
                    }
                }
            };
            let val = |v: Var| &nodes[v.0].value;
            match &node.op {
                Op::Leaf => leaves.0.push((Var(i), g)),
                Op::Param(id) => store.get_mut(*id).grad.add_assign(&g),
                Op::ConvTemporal { input, kernel, bias, stride } => {
                    let r = kernels::conv_temporal_backward(
                        val(*input),
                        val(*kernel),
                        &g,
                        *stride,
                        nodes[input.0].needs_grad,
                    )?;
                    if let Some(dx) = r.input {
                        send(*input, dx);
                    }
                    send(*kernel, r.kernel);
                    if let Some(b) = bias {
                        send(*b, r.bias);
                    }
                }
                Op::ConvSpatial { input, kernel, bias, stride } => {
                    let r = kernels::conv_spatial_backward(
                        val(*input),
                        val(*kernel),
                        &g,
                        *stride,
                        nodes[input.0].needs_grad,
                    )?;
                    if let Some(dx) = r.input {
                        send(*input, dx);
                    }
                    send(*kernel, r.kernel);
                    if let Some(b) = bias {
                        send(*b, r.bias);
                    }
                }
                Op::BatchNorm { input, gamma, beta, xhat, inv_std, batch_stats } => {
                    let (dx, dg, db) = kernels::batch_norm_backward(&g, xhat, inv_std, val(*gamma), *batch_stats)?;
                    send(*input, dx);
                    send(*gamma, dg);
                    send(*beta, db);
                }
                Op::Elu(x) => send(*x, kernels::elu_backward(val(*x), &g)),
                Op::Square(x) => {
                    let xv = val(*x);
                    send(*x, Tensor::from_fn(xv.shape(), |j| 2.0 * xv.data()[j] * g.data()[j]));
                }
                Op::SafeLog(x) => send(*x, kernels::safe_log_backward(val(*x), &g, SAFE_LOG_FLOOR)),
                Op::MaxPool { input, argmax } => {
                    send(*input, kernels::max_pool_backward(val(*input).shape(), argmax, &g));
                }
                Op::MeanPool { input, len, stride } => {
                    send(*input, kernels::mean_pool_backward(val(*input).shape(), *len, *stride, &g));
                }
                Op::Dense { input, weight, bias } => {
                    let r = kernels::dense_backward(val(*input), val(*weight), &g, nodes[input.0].needs_grad)?;
                    if let Some(dx) = r.input {
                        send(*input, dx);
                    }
                    send(*weight, r.kernel);
                    if let Some(b) = bias {
                        send(*b, r.bias);
                    }
                }
                Op::LogSoftmax(x) => send(*x, kernels::log_softmax_backward(&node.value, &g)?),
                Op::Nll { input, labels } => {
                    let lp = val(*input);
                    let [batch, classes] = lp.dims2()?;
                    let mut d = Tensor::zeros(lp.shape());
                    let scale = g.item() / batch as f64;
                    for (b, &y) in labels.iter().enumerate() {
                        d.data_mut()[b * classes + y] = -scale;
                    }
                    send(*input, d);
                }
                Op::Sum(x) => send(*x, Tensor::full(val(*x).shape(), g.item())),
                Op::Reshape(x) => send(*x, g.reshaped(val(*x).shape())?),
                Op::Dropout { input, mask } => {
                    send(*input, Tensor::from_fn(g.shape(), |j| g.data()[j] * mask[j]));
                }
            }
        }
        Ok(leaves)
    }
}
