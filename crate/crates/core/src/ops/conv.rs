use alloc::vec::Vec;

use super::MacCounter;
use crate::{Error, Real, Result, Shape, Tensor};

/// Gradients of a convolution with respect to its input and parameters.
#[derive(Debug, Clone)]
pub struct ConvGrads<T> {
    pub dx: Tensor<T>,
    pub dweight: Tensor<T>,
    pub dbias: Vec<T>,
}

fn check<T: Real>(x: &Tensor<T>, weight: &Tensor<T>, bias: Option<&[T]>) -> Result<usize> {
    let ws = weight.shape();
    if ws.h != ws.w || !(ws.h == 1 || ws.h == 3) {
        return Err(Error::UnsupportedKernel(if ws.h != ws.w { ws.h.max(ws.w) } else { ws.h }));
    }
    if x.shape().c != ws.c {
        return Err(Error::shape(
            "conv2d",
            alloc::format!("input has {} channels, weight expects {}", x.shape().c, ws.c),
        ));
    }
    if let Some(b) = bias {
        if b.len() != ws.n {
            return Err(Error::shape(
                "conv2d",
                alloc::format!("bias has {} entries for {} outputs", b.len(), ws.n),
            ));
        }
    }
    Ok(ws.h)
}

/// Column range `x` for which `x + kx - pad` stays inside `0..w`.
#[inline]
fn valid_cols(w: usize, kx: usize, pad: usize) -> (usize, usize) {
    let lo = pad.saturating_sub(kx);
    let hi = (w + pad).saturating_sub(kx).min(w);
    (lo, hi.max(lo))
}

/// 2-D convolution with stride 1 and "same" zero padding.
///
/// `weight` has shape `(c_out, c_in, k, k)` with `k` in {1, 3}.
pub fn conv2d<T: Real>(x: &Tensor<T>, weight: &Tensor<T>, bias: Option<&[T]>) -> Result<Tensor<T>> {
    conv2d_counted(x, weight, bias, &MacCounter::new())
}

pub fn conv2d_counted<T: Real>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&[T]>,
    macs: &MacCounter,
) -> Result<Tensor<T>> {
    let k = check(x, weight, bias)?;
    let s = x.shape();
    let ws = weight.shape();
    let (c_out, c_in) = (ws.n, ws.c);
    let pad = k / 2;
    let (h, w) = (s.h, s.w);
    let mut out = Tensor::zeros(Shape::new(s.n, c_out, h, w));
    let wd = weight.data();
    for n in 0..s.n {
        for co in 0..c_out {
            let plane = out.plane_mut(n, co);
            if let Some(b) = bias {
                plane.iter_mut().for_each(|v| *v = b[co]);
            }
            for ci in 0..c_in {
                let src = x.plane(n, ci);
                for ky in 0..k {
                    for kx in 0..k {
                        let wv = wd[((co * c_in + ci) * k + ky) * k + kx];
                        let (x0, x1) = valid_cols(w, kx, pad);
                        for y in 0..h {
                            let sy = y + ky;
                            if sy < pad || sy - pad >= h {
                                continue;
                            }
                            let sy = sy - pad;
                            let dst = &mut plane[y * w + x0..y * w + x1];
                            let off = sy * w + x0 + kx - pad;
                            let row = &src[off..off + (x1 - x0)];
                            for (d, &v) in dst.iter_mut().zip(row) {
                                *d += wv * v;
                            }
                        }
                    }
                }
            }
        }
    }
    macs.add_conv((s.n * c_out * c_in * k * k * h * w) as u64);
    Ok(out)
}

/// Vector-Jacobian product of [`conv2d`].
pub fn conv2d_backward<T: Real>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    dy: &Tensor<T>,
) -> Result<ConvGrads<T>> {
    let k = check(x, weight, None)?;
    let s = x.shape();
    let ws = weight.shape();
    let (c_out, c_in) = (ws.n, ws.c);
    dy.expect_shape(Shape::new(s.n, c_out, s.h, s.w), "conv2d_backward")?;
    let pad = k / 2;
    let (h, w) = (s.h, s.w);
    let mut dx = Tensor::zeros(s);
    let mut dweight = Tensor::zeros(ws);
    let mut dbias = alloc::vec![T::zero(); c_out];
    let wd = weight.data();
    for n in 0..s.n {
        for (co, db) in dbias.iter_mut().enumerate() {
            let g = dy.plane(n, co);
            *db += g.iter().copied().sum::<T>();
            for ci in 0..c_in {
                let src = x.plane(n, ci);
                for ky in 0..k {
                    for kx in 0..k {
                        let widx = ((co * c_in + ci) * k + ky) * k + kx;
                        let wv = wd[widx];
                        let (x0, x1) = valid_cols(w, kx, pad);
                        let mut acc = T::zero();
                        for y in 0..h {
                            let sy = y + ky;
                            if sy < pad || sy - pad >= h {
                                continue;
                            }
                            let sy = sy - pad;
                            let off = sy * w + x0 + kx - pad;
                            let grow = &g[y * w + x0..y * w + x1];
                            let row = &src[off..off + (x1 - x0)];
                            for (&gv, &v) in grow.iter().zip(row) {
                                acc += gv * v;
                            }
                            if wv != T::zero() {
                                let drow = &mut dx.plane_mut(n, ci)[off..off + (x1 - x0)];
                                for (d, &gv) in drow.iter_mut().zip(grow) {
                                    *d += wv * gv;
                                }
                            }
                        }
                        dweight.data_mut()[widx] += acc;
                    }
                }
            }
        }
    }
    Ok(ConvGrads { dx, dweight, dbias })
}
