//! Forward and backward kernels on plain tensors.
//!
//! Feature maps use the `[batch, channels, electrodes, time]` layout. The
//! convolutions lower to GEMM. Work is split over fixed-size batch chunks and
//! partial weight gradients are reduced in chunk order, so results do not
//! depend on the size of the rayon pool.

use rayon::prelude::*;

use super::Tensor;
use crate::error::{Error, Result};

/// Batch items per parallel work unit.
const BATCH_CHUNK: usize = 4;

/// Lower bound applied before the logarithm in [`safe_log`].
pub const SAFE_LOG_FLOOR: f64 = 1e-6;

/// `c = a·b + beta·c` over strided row/column views.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
    (rsc, csc): (usize, usize),
) {
    if m == 0 || n == 0 {
        return;
    }
    if k > 0 {
        assert!((m - 1) * rsa + (k - 1) * csa < a.len(), "gemm: lhs out of bounds");
        assert!((k - 1) * rsb + (n - 1) * csb < b.len(), "gemm: rhs out of bounds");
    }
    assert!((m - 1) * rsc + (n - 1) * csc < c.len(), "gemm: output out of bounds");
    // SAFETY: every index touched through the given strides was bounds-checked above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

fn ensure_finite(t: &Tensor, op: &'static str) -> Result<()> {
    if t.all_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(op))
    }
}

fn check_bias(bias: Option<&Tensor>, channels: usize) -> Result<()> {
    match bias {
        Some(b) if b.len() != channels => {
            Err(Error::dim(format!("bias has {} entries for {channels} output channels", b.len())))
        }
        _ => Ok(()),
    }
}

fn batch_chunks(batch: usize) -> Vec<std::ops::Range<usize>> {
    (0..batch).step_by(BATCH_CHUNK).map(|s| s..(s + BATCH_CHUNK).min(batch)).collect()
}

/// Geometry of a temporal convolution.
#[derive(Debug, Clone, Copy)]
struct TemporalGeom {
    batch: usize,
    c_in: usize,
    electrodes: usize,
    time: usize,
    c_out: usize,
    k: usize,
    stride: usize,
    t_out: usize,
}

impl TemporalGeom {
    fn new(input: &Tensor, kernel: &Tensor, stride: usize) -> Result<Self> {
        let [batch, c_in, electrodes, time] = input.dims4()?;
        let [c_out, k_in, k_h, k] = kernel.dims4()?;
        if k_in != c_in || k_h != 1 {
            return Err(Error::dim(format!(
                "temporal kernel {:?} does not fit input {:?}",
                kernel.shape(),
                input.shape()
            )));
        }
        if stride == 0 {
            return Err(Error::dim("stride must be positive"));
        }
        if k > time {
            return Err(Error::InsufficientLength { needed: k, available: time });
        }
        let t_out = (time - k) / stride + 1;
        Ok(Self { batch, c_in, electrodes, time, c_out, k, stride, t_out })
    }

    fn rows(&self) -> usize {
        self.c_in * self.k
    }

    fn cols(&self) -> usize {
        self.electrodes * self.t_out
    }

    /// cols[(i·k + tau), (e·t_out + t)] = x[b, i, e, t·stride + tau]
    fn im2col(&self, x: &[f64], b: usize, cols: &mut [f64]) {
        let width = self.cols();
        for i in 0..self.c_in {
            for tau in 0..self.k {
                let row = &mut cols[(i * self.k + tau) * width..][..width];
                for e in 0..self.electrodes {
                    let src = &x[((b * self.c_in + i) * self.electrodes + e) * self.time + tau..];
                    let dst = &mut row[e * self.t_out..][..self.t_out];
                    if self.stride == 1 {
                        dst.copy_from_slice(&src[..self.t_out]);
                    } else {
                        for (t, d) in dst.iter_mut().enumerate() {
                            *d = src[t * self.stride];
                        }
                    }
                }
            }
        }
    }

    fn col2im_add(&self, cols: &[f64], bi: usize, dx: &mut [f64]) {
        let width = self.cols();
        for i in 0..self.c_in {
            for tau in 0..self.k {
                let row = &cols[(i * self.k + tau) * width..][..width];
                for e in 0..self.electrodes {
                    let dst = &mut dx[((bi * self.c_in + i) * self.electrodes + e) * self.time + tau..];
                    for (t, &g) in row[e * self.t_out..][..self.t_out].iter().enumerate() {
                        dst[t * self.stride] += g;
                    }
                }
            }
        }
    }
}

/// Valid convolution along time with kernels `[c_out, c_in, 1, k]`.
pub fn conv_temporal(input: &Tensor, kernel: &Tensor, bias: Option<&Tensor>, stride: usize) -> Result<Tensor> {
    let g = TemporalGeom::new(input, kernel, stride)?;
    check_bias(bias, g.c_out)?;
    let per_batch = g.c_out * g.cols();
    let mut out = vec![0.0; g.batch * per_batch];
    let x = input.data();
    let w = kernel.data();
    out.par_chunks_mut(per_batch).enumerate().for_each(|(b, ob)| {
        let mut cols = vec![0.0; g.rows() * g.cols()];
        g.im2col(x, b, &mut cols);
        gemm(g.c_out, g.rows(), g.cols(), w, (g.rows(), 1), &cols, (g.cols(), 1), 0.0, ob, (g.cols(), 1));
        if let Some(bias) = bias {
            for (o, row) in ob.chunks_mut(g.cols()).enumerate() {
                let bo = bias.data()[o];
                row.iter_mut().for_each(|v| *v += bo);
            }
        }
    });
    let out = Tensor::new(vec![g.batch, g.c_out, g.electrodes, g.t_out], out)?;
    ensure_finite(&out, "conv_temporal")?;
    Ok(out)
}

/// Gradients of a convolution: input (when requested), kernel and bias.
#[derive(Debug)]
pub struct ConvGrads {
    pub input: Option<Tensor>,
    pub kernel: Tensor,
    pub bias: Tensor,
}

pub fn conv_temporal_backward(
    input: &Tensor,
    kernel: &Tensor,
    grad_out: &Tensor,
    stride: usize,
    need_input: bool,
) -> Result<ConvGrads> {
    let g = TemporalGeom::new(input, kernel, stride)?;
    let x = input.data();
    let w = kernel.data();
    let dy = grad_out.data();
    let per_batch_out = g.c_out * g.cols();
    let per_batch_in = g.c_in * g.electrodes * g.time;

    let partials: Vec<_> = batch_chunks(g.batch)
        .into_par_iter()
        .map(|range| {
            let mut dw = vec![0.0; g.c_out * g.rows()];
            let mut db = vec![0.0; g.c_out];
            let mut dx = need_input.then(|| vec![0.0; range.len() * per_batch_in]);
            let mut cols = vec![0.0; g.rows() * g.cols()];
            for (local, b) in range.clone().enumerate() {
                let dyb = &dy[b * per_batch_out..][..per_batch_out];
                g.im2col(x, b, &mut cols);
                // dW += dY_b · cols_bᵀ
                gemm(
                    g.c_out,
                    g.cols(),
                    g.rows(),
                    dyb,
                    (g.cols(), 1),
                    &cols,
                    (1, g.cols()),
                    1.0,
                    &mut dw,
                    (g.rows(), 1),
                );
                for (o, row) in dyb.chunks(g.cols()).enumerate() {
                    db[o] += row.iter().sum::<f64>();
                }
                if let Some(dx) = dx.as_mut() {
                    // dcols = Wᵀ · dY_b
                    gemm(
                        g.rows(),
                        g.c_out,
                        g.cols(),
                        w,
                        (1, g.rows()),
                        dyb,
                        (g.cols(), 1),
                        0.0,
                        &mut cols,
                        (g.cols(), 1),
                    );
                    g.col2im_add(&cols, local, dx);
                }
            }
            (dw, db, dx)
        })
        .collect();

    let mut dw = vec![0.0; g.c_out * g.rows()];
    let mut db = vec![0.0; g.c_out];
    let mut dx = need_input.then(|| Vec::with_capacity(g.batch * per_batch_in));
    for (pw, pb, px) in partials {
        dw.iter_mut().zip(&pw).for_each(|(a, b)| *a += b);
        db.iter_mut().zip(&pb).for_each(|(a, b)| *a += b);
        if let (Some(dx), Some(px)) = (dx.as_mut(), px) {
            dx.extend_from_slice(&px);
        }
    }
    Ok(ConvGrads {
        input: dx.map(|d| Tensor::new(input.shape().to_vec(), d)).transpose()?,
        kernel: Tensor::new(kernel.shape().to_vec(), dw)?,
        bias: Tensor::new(vec![g.c_out], db)?,
    })
}

#[derive(Debug, Clone, Copy)]
struct SpatialGeom {
    batch: usize,
    depth: usize,
    time: usize,
    c_out: usize,
    stride: usize,
    t_out: usize,
}

impl SpatialGeom {
    fn new(input: &Tensor, kernel: &Tensor, stride: usize) -> Result<Self> {
        let [batch, c_in, electrodes, time] = input.dims4()?;
        let [c_out, k_in, k_e, k_t] = kernel.dims4()?;
        if k_in != c_in || k_e != electrodes || k_t != 1 {
            return Err(Error::dim(format!(
                "spatial kernel {:?} must span all electrodes of input {:?}",
                kernel.shape(),
                input.shape()
            )));
        }
        if stride == 0 {
            return Err(Error::dim("stride must be positive"));
        }
        Ok(Self { batch, depth: c_in * electrodes, time, c_out, stride, t_out: (time - 1) / stride + 1 })
    }
}

/// Convolution with kernels `[c_out, c_in, electrodes, 1]` spanning the whole
/// electrode axis; output has a single electrode row. `stride` subsamples time.
pub fn conv_spatial(input: &Tensor, kernel: &Tensor, bias: Option<&Tensor>, stride: usize) -> Result<Tensor> {
    let g = SpatialGeom::new(input, kernel, stride)?;
    check_bias(bias, g.c_out)?;
    let x = input.data();
    let w = kernel.data();
    let mut out = vec![0.0; g.batch * g.c_out * g.t_out];
    out.par_chunks_mut(g.c_out * g.t_out).enumerate().for_each(|(b, ob)| {
        let xb = &x[b * g.depth * g.time..][..g.depth * g.time];
        gemm(g.c_out, g.depth, g.t_out, w, (g.depth, 1), xb, (g.time, g.stride), 0.0, ob, (g.t_out, 1));
        if let Some(bias) = bias {
            for (o, row) in ob.chunks_mut(g.t_out).enumerate() {
                let bo = bias.data()[o];
                row.iter_mut().for_each(|v| *v += bo);
            }
        }
    });
    let out = Tensor::new(vec![g.batch, g.c_out, 1, g.t_out], out)?;
    ensure_finite(&out, "conv_spatial")?;
    Ok(out)
}

pub fn conv_spatial_backward(
    input: &Tensor,
    kernel: &Tensor,
    grad_out: &Tensor,
    stride: usize,
    need_input: bool,
) -> Result<ConvGrads> {
    let g = SpatialGeom::new(input, kernel, stride)?;
    let x = input.data();
    let w = kernel.data();
    let dy = grad_out.data();
    let per_out = g.c_out * g.t_out;
    let per_in = g.depth * g.time;

    let partials: Vec<_> = batch_chunks(g.batch)
        .into_par_iter()
        .map(|range| {
            let mut dw = vec![0.0; g.c_out * g.depth];
            let mut db = vec![0.0; g.c_out];
            let mut dx = need_input.then(|| vec![0.0; range.len() * per_in]);
            for (local, b) in range.clone().enumerate() {
                let dyb = &dy[b * per_out..][..per_out];
                let xb = &x[b * per_in..][..per_in];
                gemm(g.c_out, g.t_out, g.depth, dyb, (g.t_out, 1), xb, (g.stride, g.time), 1.0, &mut dw, (g.depth, 1));
                for (o, row) in dyb.chunks(g.t_out).enumerate() {
                    db[o] += row.iter().sum::<f64>();
                }
                if let Some(dx) = dx.as_mut() {
                    gemm(
                        g.depth,
                        g.c_out,
                        g.t_out,
                        w,
                        (1, g.depth),
                        dyb,
                        (g.t_out, 1),
                        0.0,
                        &mut dx[local * per_in..][..per_in],
                        (g.time, g.stride),
                    );
                }
            }
            (dw, db, dx)
        })
        .collect();

    let mut dw = vec![0.0; g.c_out * g.depth];
    let mut db = vec![0.0; g.c_out];
    let mut dx = need_input.then(|| Vec::with_capacity(g.batch * per_in));
    for (pw, pb, px) in partials {
        dw.iter_mut().zip(&pw).for_each(|(a, b)| *a += b);
        db.iter_mut().zip(&pb).for_each(|(a, b)| *a += b);
        if let (Some(dx), Some(px)) = (dx.as_mut(), px) {
            dx.extend_from_slice(&px);
        }
    }
    Ok(ConvGrads {
        input: dx.map(|d| Tensor::new(input.shape().to_vec(), d)).transpose()?,
        kernel: Tensor::new(kernel.shape().to_vec(), dw)?,
        bias: Tensor::new(vec![g.c_out], db)?,
    })
}

/// `input [batch, features]`, `weight [out, features]` → `[batch, out]`.
pub fn dense(input: &Tensor, weight: &Tensor, bias: Option<&Tensor>) -> Result<Tensor> {
    let [batch, features] = input.dims2()?;
    let [n_out, w_in] = weight.dims2()?;
    if w_in != features {
        return Err(Error::dim(format!("dense weight {:?} does not match input {:?}", weight.shape(), input.shape())));
    }
    check_bias(bias, n_out)?;
    let mut out = vec![0.0; batch * n_out];
    gemm(batch, features, n_out, input.data(), (features, 1), weight.data(), (1, features), 0.0, &mut out, (n_out, 1));
    if let Some(bias) = bias {
        for row in out.chunks_mut(n_out) {
            row.iter_mut().zip(bias.data()).for_each(|(v, b)| *v += b);
        }
    }
    let out = Tensor::new(vec![batch, n_out], out)?;
    ensure_finite(&out, "dense")?;
    Ok(out)
}

pub fn dense_backward(input: &Tensor, weight: &Tensor, grad_out: &Tensor, need_input: bool) -> Result<ConvGrads> {
    let [batch, features] = input.dims2()?;
    let [n_out, _] = weight.dims2()?;
    let dy = grad_out.data();
    let mut dw = vec![0.0; n_out * features];
    gemm(n_out, batch, features, dy, (1, n_out), input.data(), (features, 1), 0.0, &mut dw, (features, 1));
    let mut db = vec![0.0; n_out];
    for row in dy.chunks(n_out) {
        db.iter_mut().zip(row).for_each(|(a, b)| *a += b);
    }
    let dx = if need_input {
        let mut dx = vec![0.0; batch * features];
        gemm(batch, n_out, features, dy, (n_out, 1), weight.data(), (features, 1), 0.0, &mut dx, (features, 1));
        Some(Tensor::new(vec![batch, features], dx)?)
    } else {
        None
    };
    Ok(ConvGrads { input: dx, kernel: Tensor::new(vec![n_out, features], dw)?, bias: Tensor::new(vec![n_out], db)? })
}

/// Per-channel statistics over every axis except axis 1.
fn channel_layout(x: &Tensor) -> Result<(usize, usize, usize)> {
    let shape = x.shape();
    if shape.len() < 2 {
        return Err(Error::dim(format!("batch norm needs a channel axis, got {shape:?}")));
    }
    let batch = shape[0];
    let channels = shape[1];
    let inner: usize = shape[2..].iter().product();
    Ok((batch, channels, inner))
}

fn for_channel<'a>(
    data: &'a [f64],
    (batch, channels, inner): (usize, usize, usize),
    c: usize,
) -> impl Iterator<Item = &'a [f64]> + 'a {
    (0..batch).map(move |b| &data[(b * channels + c) * inner..][..inner])
}

/// Normalized activations plus what the backward pass needs.
#[derive(Debug, Clone)]
pub struct BatchNormOutput {
    pub output: Tensor,
    pub xhat: Vec<f64>,
    pub inv_std: Vec<f64>,
    pub mean: Vec<f64>,
    /// Unbiased per-channel variance, for the running estimate.
    pub var_unbiased: Vec<f64>,
}

pub fn batch_norm_train(x: &Tensor, gamma: &Tensor, beta: &Tensor, eps: f64) -> Result<BatchNormOutput> {
    let layout @ (batch, channels, inner) = channel_layout(x)?;
    if gamma.len() != channels || beta.len() != channels {
        return Err(Error::dim(format!("batch norm affine parameters must have {channels} entries")));
    }
    let n = (batch * inner) as f64;
    let mut mean = vec![0.0; channels];
    let mut var = vec![0.0; channels];
    let mut var_unbiased = vec![0.0; channels];
    for c in 0..channels {
        let m = for_channel(x.data(), layout, c).flatten().sum::<f64>() / n;
        let ss = for_channel(x.data(), layout, c).flatten().map(|v| (v - m) * (v - m)).sum::<f64>();
        mean[c] = m;
        var[c] = ss / n;
        var_unbiased[c] = if n > 1.0 { ss / (n - 1.0) } else { 0.0 };
    }
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
    let (output, xhat) = affine_normalize(x, layout, gamma, beta, &mean, &inv_std)?;
    Ok(BatchNormOutput { output, xhat, inv_std, mean, var_unbiased })
}

/// Normalizes with fixed statistics; returns `(output, xhat)`.
pub fn affine_normalize(
    x: &Tensor,
    (batch, channels, inner): (usize, usize, usize),
    gamma: &Tensor,
    beta: &Tensor,
    mean: &[f64],
    inv_std: &[f64],
) -> Result<(Tensor, Vec<f64>)> {
    let mut xhat = vec![0.0; x.len()];
    let mut out = vec![0.0; x.len()];
    for b in 0..batch {
        for c in 0..channels {
            let off = (b * channels + c) * inner;
            let (g, bt) = (gamma.data()[c], beta.data()[c]);
            for j in off..off + inner {
                let h = (x.data()[j] - mean[c]) * inv_std[c];
                xhat[j] = h;
                out[j] = g * h + bt;
            }
        }
    }
    let out = Tensor::new(x.shape().to_vec(), out)?;
    ensure_finite(&out, "batch_norm")?;
    Ok((out, xhat))
}

pub(crate) fn bn_layout(x: &Tensor) -> Result<(usize, usize, usize)> {
    channel_layout(x)
}

/// Gradients `(dx, dgamma, dbeta)`. With `batch_stats` the statistics are a
/// function of the batch and contribute to `dx`.
pub fn batch_norm_backward(
    grad_out: &Tensor,
    xhat: &[f64],
    inv_std: &[f64],
    gamma: &Tensor,
    batch_stats: bool,
) -> Result<(Tensor, Tensor, Tensor)> {
    let (batch, channels, inner) = channel_layout(grad_out)?;
    let n = (batch * inner) as f64;
    let dy = grad_out.data();
    let mut dgamma = vec![0.0; channels];
    let mut dbeta = vec![0.0; channels];
    for c in 0..channels {
        for b in 0..batch {
            let off = (b * channels + c) * inner;
            for j in off..off + inner {
                dgamma[c] += dy[j] * xhat[j];
                dbeta[c] += dy[j];
            }
        }
    }
    let mut dx = vec![0.0; dy.len()];
    for c in 0..channels {
        let g = gamma.data()[c];
        // Σ dxhat = γ·Σdy, Σ dxhat·xhat = γ·dγ
        let sum_dxhat = g * dbeta[c];
        let sum_dxhat_xhat = g * dgamma[c];
        for b in 0..batch {
            let off = (b * channels + c) * inner;
            for j in off..off + inner {
                let dxh = dy[j] * g;
                dx[j] = if batch_stats {
                    inv_std[c] / n * (n * dxh - sum_dxhat - xhat[j] * sum_dxhat_xhat)
                } else {
                    dxh * inv_std[c]
                };
            }
        }
    }
    Ok((
        Tensor::new(grad_out.shape().to_vec(), dx)?,
        Tensor::new(vec![channels], dgamma)?,
        Tensor::new(vec![channels], dbeta)?,
    ))
}

pub fn elu(x: &Tensor) -> Tensor {
    x.map(|v| if v > 0.0 { v } else { v.exp_m1() })
}

pub fn elu_backward(x: &Tensor, grad: &Tensor) -> Tensor {
    Tensor::from_fn(x.shape(), |i| {
        let v = x.data()[i];
        grad.data()[i] * if v > 0.0 { 1.0 } else { v.exp() }
    })
}

pub fn square(x: &Tensor) -> Tensor {
    x.map(|v| v * v)
}

pub fn safe_log(x: &Tensor, floor: f64) -> Tensor {
    x.map(|v| v.max(floor).ln())
}

pub fn safe_log_backward(x: &Tensor, grad: &Tensor, floor: f64) -> Tensor {
    Tensor::from_fn(x.shape(), |i| {
        let v = x.data()[i];
        if v > floor {
            grad.data()[i] / v
        } else {
            0.0
        }
    })
}

fn pool_geom(x: &Tensor, len: usize, stride: usize) -> Result<(usize, usize, usize)> {
    let shape = x.shape();
    let time = *shape.last().ok_or_else(|| Error::dim("pooling needs a time axis"))?;
    if len == 0 || stride == 0 {
        return Err(Error::dim("pool length and stride must be positive"));
    }
    if len > time {
        return Err(Error::InsufficientLength { needed: len, available: time });
    }
    let rows = x.len() / time;
    Ok((rows, time, (time - len) / stride + 1))
}

fn pooled_shape(x: &Tensor, t_out: usize) -> Vec<usize> {
    let mut shape = x.shape().to_vec();
    *shape.last_mut().unwrap() = t_out;
    shape
}

/// Max over windows along the last axis. Also returns the flat input index of
/// each selected element (first maximum on ties).
pub fn max_pool_t(x: &Tensor, len: usize, stride: usize) -> Result<(Tensor, Vec<usize>)> {
    let (rows, time, t_out) = pool_geom(x, len, stride)?;
    let mut out = Vec::with_capacity(rows * t_out);
    let mut arg = Vec::with_capacity(rows * t_out);
    for r in 0..rows {
        let row = &x.data()[r * time..][..time];
        for t in 0..t_out {
            let start = t * stride;
            let mut best = start;
            for j in start + 1..start + len {
                if row[j] > row[best] {
                    best = j;
                }
            }
            out.push(row[best]);
            arg.push(r * time + best);
        }
    }
    Ok((Tensor::new(pooled_shape(x, t_out), out)?, arg))
}

pub fn max_pool_backward(input_shape: &[usize], argmax: &[usize], grad: &Tensor) -> Tensor {
    let mut dx = Tensor::zeros(input_shape);
    for (&src, &g) in argmax.iter().zip(grad.data()) {
        dx.data_mut()[src] += g;
    }
    dx
}

pub fn mean_pool_t(x: &Tensor, len: usize, stride: usize) -> Result<Tensor> {
    let (rows, time, t_out) = pool_geom(x, len, stride)?;
    let scale = 1.0 / len as f64;
    let mut out = Vec::with_capacity(rows * t_out);
    for r in 0..rows {
        let row = &x.data()[r * time..][..time];
        for t in 0..t_out {
            out.push(row[t * stride..t * stride + len].iter().sum::<f64>() * scale);
        }
    }
    Tensor::new(pooled_shape(x, t_out), out)
}

pub fn mean_pool_backward(input_shape: &[usize], len: usize, stride: usize, grad: &Tensor) -> Tensor {
    let mut dx = Tensor::zeros(input_shape);
    let time = *input_shape.last().unwrap();
    let t_out = *grad.shape().last().unwrap();
    let scale = 1.0 / len as f64;
    for (r, grow) in grad.data().chunks(t_out).enumerate() {
        let row = &mut dx.data_mut()[r * time..][..time];
        for (t, &g) in grow.iter().enumerate() {
            for v in &mut row[t * stride..t * stride + len] {
                *v += g * scale;
            }
        }
    }
    dx
}

/// Row-wise log-softmax of a `[batch, classes]` tensor.
pub fn log_softmax(x: &Tensor) -> Result<Tensor> {
    let [_, classes] = x.dims2()?;
    let mut out = x.data().to_vec();
    for row in out.chunks_mut(classes) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        row.iter_mut().for_each(|v| *v -= lse);
    }
    let out = Tensor::new(x.shape().to_vec(), out)?;
    ensure_finite(&out, "log_softmax")?;
    Ok(out)
}

pub fn log_softmax_backward(out: &Tensor, grad: &Tensor) -> Result<Tensor> {
    let [_, classes] = out.dims2()?;
    let mut dx = grad.data().to_vec();
    for (row, lp) in dx.chunks_mut(classes).zip(out.data().chunks(classes)) {
        let s: f64 = row.iter().sum();
        for (d, &l) in row.iter_mut().zip(lp) {
            *d -= l.exp() * s;
        }
    }
    Tensor::new(out.shape().to_vec(), dx)
}

/// Mean negative log-likelihood of `labels` under row log-probabilities.
pub fn nll_loss(log_probs: &Tensor, labels: &[usize]) -> Result<f64> {
    let [batch, classes] = log_probs.dims2()?;
    if labels.len() != batch {
        return Err(Error::dim(format!("{} labels for batch of {batch}", labels.len())));
    }
    let mut total = 0.0;
    for (row, &y) in log_probs.data().chunks(classes).zip(labels) {
        if y >= classes {
            return Err(Error::Label { label: y, classes });
        }
        total -= row[y];
    }
    Ok(total / batch as f64)
}
