use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Real, Result, Tensor};

pub const BN_EPS: f64 = 1e-5;
/// Weight kept on the old running statistic at each update.
pub const BN_MOMENTUM: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BnMode {
    /// Normalise with batch statistics and update the running estimates.
    Train,
    /// Normalise with the running estimates only.
    Infer,
}

/// Non-learnable batch-norm state.
#[derive(Debug)]
pub struct BnState<'a, T> {
    pub running_mean: &'a mut [T],
    pub running_var: &'a mut [T],
    pub eps: T,
    pub momentum: T,
}

/// What the backward pass needs from a batch-norm forward.
#[derive(Clone, Debug)]
pub struct BnCache<T> {
    pub mode: BnMode,
    pub x_hat: Tensor<T>,
    pub inv_std: Vec<T>,
    /// Batch mean and unbiased variance (training mode only).
    pub batch_mean: Vec<T>,
    pub batch_var: Vec<T>,
}

fn check_len<T>(name: &str, v: &[T], c: usize) -> Result<()> {
    if v.len() != c {
        return Err(Error::shape("batchnorm", format!("{name} has {} entries for {c} channels", v.len())));
    }
    Ok(())
}

/// Per-channel batch normalisation over `(n, h, w)`.
///
/// In training mode the running estimates in `state` are updated with
/// momentum `state.momentum` (unbiased batch variance).
pub fn batchnorm<T: Real>(
    x: &Tensor<T>,
    gamma: &[T],
    beta: &[T],
    state: BnState<'_, T>,
    mode: BnMode,
) -> Result<(Tensor<T>, BnCache<T>)> {
    let (y, cache) = batchnorm_normalize(x, gamma, beta, state.running_mean, state.running_var, state.eps, mode)?;
    commit_running_stats(&cache, state.running_mean, state.running_var, state.momentum);
    Ok((y, cache))
}

/// Folds the batch statistics recorded in a training-mode `cache` into
/// running estimates. No-op for inference caches.
pub fn commit_running_stats<T: Real>(cache: &BnCache<T>, running_mean: &mut [T], running_var: &mut [T], momentum: T) {
    if cache.mode != BnMode::Train {
        return;
    }
    for ch in 0..running_mean.len() {
        running_mean[ch] = momentum * running_mean[ch] + (T::one() - momentum) * cache.batch_mean[ch];
        running_var[ch] = momentum * running_var[ch] + (T::one() - momentum) * cache.batch_var[ch];
    }
}

/// [`batchnorm`] without touching the running estimates; the batch
/// statistics are returned in the cache instead.
pub fn batchnorm_normalize<T: Real>(
    x: &Tensor<T>,
    gamma: &[T],
    beta: &[T],
    running_mean: &[T],
    running_var: &[T],
    eps: T,
    mode: BnMode,
) -> Result<(Tensor<T>, BnCache<T>)> {
    let s = x.shape();
    let c = s.c;
    check_len("gamma", gamma, c)?;
    check_len("beta", beta, c)?;
    check_len("running_mean", running_mean, c)?;
    check_len("running_var", running_var, c)?;
    if !(eps > T::zero()) && mode == BnMode::Train {
        return Err(Error::Param(format!("batchnorm eps must be positive, got {eps}")));
    }
    if eps < T::zero() {
        return Err(Error::Param(format!("batchnorm eps must be non-negative, got {eps}")));
    }
    let count = s.n * s.plane();
    let mut x_hat = Tensor::zeros(s);
    let mut out = Tensor::zeros(s);
    let mut inv_std = vec![T::zero(); c];
    let (mut batch_mean, mut batch_var) = (Vec::new(), Vec::new());
    for ch in 0..c {
        let (mean, var) = match mode {
            BnMode::Train => {
                let cnt = T::from_usize(count);
                let mut sum = T::zero();
                for n in 0..s.n {
                    sum += x.plane(n, ch).iter().copied().sum::<T>();
                }
                let mean = sum / cnt;
                let mut sq = T::zero();
                for n in 0..s.n {
                    sq += x.plane(n, ch).iter().map(|&v| (v - mean) * (v - mean)).sum::<T>();
                }
                let var = sq / cnt;
                batch_mean.push(mean);
                batch_var.push(if count > 1 { sq / T::from_usize(count - 1) } else { var });
                (mean, var)
            }
            BnMode::Infer => (running_mean[ch], running_var[ch]),
        };
        let denom = var + eps;
        if !denom.is_finite() {
            return Err(Error::NonFinite { layer: format!("batch norm statistics, channel {ch}") });
        }
        if denom <= T::zero() {
            return Err(Error::Numeric(format!("variance + eps = {denom} on channel {ch}")));
        }
        let is = T::one() / denom.sqrt();
        inv_std[ch] = is;
        for n in 0..s.n {
            let src = x.plane(n, ch);
            let xh = x_hat.plane_mut(n, ch);
            for (d, &v) in xh.iter_mut().zip(src) {
                *d = (v - mean) * is;
            }
            let o = out.plane_mut(n, ch);
            for (d, &v) in o.iter_mut().zip(x_hat.plane(n, ch)) {
                *d = gamma[ch] * v + beta[ch];
            }
        }
    }
    Ok((out, BnCache { mode, x_hat, inv_std, batch_mean, batch_var }))
}

/// Returns `(dx, dgamma, dbeta)`.
pub fn batchnorm_backward<T: Real>(
    cache: &BnCache<T>,
    gamma: &[T],
    dy: &Tensor<T>,
) -> Result<(Tensor<T>, Vec<T>, Vec<T>)> {
    let s = cache.x_hat.shape();
    dy.expect_shape(s, "batchnorm_backward")?;
    let c = s.c;
    let count = T::from_usize(s.n * s.plane());
    let mut dx = Tensor::zeros(s);
    let mut dgamma = vec![T::zero(); c];
    let mut dbeta = vec![T::zero(); c];
    for ch in 0..c {
        let mut sum_dy = T::zero();
        let mut sum_dy_xh = T::zero();
        for n in 0..s.n {
            for (&g, &xh) in dy.plane(n, ch).iter().zip(cache.x_hat.plane(n, ch)) {
                sum_dy += g;
                sum_dy_xh += g * xh;
            }
        }
        dgamma[ch] = sum_dy_xh;
        dbeta[ch] = sum_dy;
        let k = gamma[ch] * cache.inv_std[ch];
        for n in 0..s.n {
            let g = dy.plane(n, ch);
            let xh = cache.x_hat.plane(n, ch);
            let d = dx.plane_mut(n, ch);
            match cache.mode {
                BnMode::Infer => {
                    for (o, &gv) in d.iter_mut().zip(g) {
                        *o = k * gv;
                    }
                }
                BnMode::Train => {
                    for ((o, &gv), &xv) in d.iter_mut().zip(g).zip(xh) {
                        *o = k * (gv - sum_dy / count - xv * sum_dy_xh / count);
                    }
                }
            }
        }
    }
    Ok((dx, dgamma, dbeta))
}

/// Absorbs an inference-mode batch norm into the convolution before it.
///
/// Returns the rescaled weight and the new bias.
pub fn fold_bn<T: Real>(
    weight: &Tensor<T>,
    bias: &[T],
    gamma: &[T],
    beta: &[T],
    running_mean: &[T],
    running_var: &[T],
    eps: T,
) -> Result<(Tensor<T>, Vec<T>)> {
    let ws = weight.shape();
    let c_out = ws.n;
    for (name, v) in [("bias", bias), ("gamma", gamma), ("beta", beta), ("running_mean", running_mean), ("running_var", running_var)] {
        if v.len() != c_out {
            return Err(Error::shape("fold_bn", format!("{name} has {} entries for {c_out} outputs", v.len())));
        }
    }
    let per_out = ws.c * ws.h * ws.w;
    let mut w = weight.clone();
    let mut b = vec![T::zero(); c_out];
    for co in 0..c_out {
        let denom = running_var[co] + eps;
        if !(denom > T::zero()) {
            return Err(Error::Numeric(format!("variance + eps = {denom} on output {co}")));
        }
        let k = gamma[co] / denom.sqrt();
        for v in &mut w.data_mut()[co * per_out..(co + 1) * per_out] {
            *v *= k;
        }
        b[co] = k * (bias[co] - running_mean[co]) + beta[co];
    }
    Ok((w, b))
}
