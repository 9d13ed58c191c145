//! [`DifferentiableOp`] adapters for the primitives, used by gradient checks.

use alloc::vec;
use alloc::vec::Vec;

use super::*;
use crate::gradcheck::DifferentiableOp;
use crate::{Error, Real, Result, Shape, Tensor};

fn vector<T: Real>(v: Vec<T>) -> Tensor<T> {
    let len = v.len();
    Tensor::from_vec(Shape::vector(len), v).expect("length matches")
}

fn arity<T>(inputs: &[Tensor<T>], n: usize, op: &'static str) -> Result<()> {
    if inputs.len() != n {
        return Err(Error::shape(op, alloc::format!("expected {n} inputs, got {}", inputs.len())));
    }
    Ok(())
}

/// Inputs: `[x, weight, bias]`.
pub struct Conv2dOp;

impl<T: Real> DifferentiableOp<T> for Conv2dOp {
    fn forward(&self, inputs: &[Tensor<T>]) -> Result<Tensor<T>> {
        arity(inputs, 3, "conv2d")?;
        conv2d(&inputs[0], &inputs[1], Some(inputs[2].data()))
    }

    fn vjp(&self, inputs: &[Tensor<T>], _: &Tensor<T>, cot: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        let g = conv2d_backward(&inputs[0], &inputs[1], cot)?;
        Ok(vec![g.dx, g.dweight, vector(g.dbias)])
    }
}

/// Inputs: `[x, gamma, beta]`. In inference mode the running statistics
/// are the fixed `mean`/`var` held here.
pub struct BatchNormOp<T> {
    pub mode: BnMode,
    pub mean: Vec<T>,
    pub var: Vec<T>,
    pub eps: T,
}

impl<T: Real> BatchNormOp<T> {
    fn run(&self, inputs: &[Tensor<T>]) -> Result<(Tensor<T>, BnCache<T>)> {
        arity(inputs, 3, "batchnorm")?;
        let (mut m, mut v) = (self.mean.clone(), self.var.clone());
        let state = BnState { running_mean: &mut m, running_var: &mut v, eps: self.eps, momentum: T::from_f64(BN_MOMENTUM) };
        batchnorm(&inputs[0], inputs[1].data(), inputs[2].data(), state, self.mode)
    }
}

impl<T: Real> DifferentiableOp<T> for BatchNormOp<T> {
    fn forward(&self, inputs: &[Tensor<T>]) -> Result<Tensor<T>> {
        Ok(self.run(inputs)?.0)
    }

    fn vjp(&self, inputs: &[Tensor<T>], _: &Tensor<T>, cot: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        let (_, cache) = self.run(inputs)?;
        let (dx, dg, db) = batchnorm_backward(&cache, inputs[1].data(), cot)?;
        Ok(vec![dx, vector(dg), vector(db)])
    }
}

/// Softmax along the width axis. Inputs: `[x]`.
pub struct SoftmaxOp;

impl<T: Real> DifferentiableOp<T> for SoftmaxOp {
    fn forward(&self, inputs: &[Tensor<T>]) -> Result<Tensor<T>> {
        arity(inputs, 1, "softmax")?;
        Ok(softmax(&inputs[0]))
    }

    fn vjp(&self, _: &[Tensor<T>], output: &Tensor<T>, cot: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        let mut g = cot.clone();
        softmax_rows_backward(output.data(), g.data_mut(), output.shape().w);
        Ok(vec![g])
    }
}

pub struct SwishOp;

impl<T: Real> DifferentiableOp<T> for SwishOp {
    fn forward(&self, inputs: &[Tensor<T>]) -> Result<Tensor<T>> {
        arity(inputs, 1, "swish")?;
        Ok(swish(&inputs[0]))
    }

    fn vjp(&self, inputs: &[Tensor<T>], _: &Tensor<T>, cot: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        Ok(vec![swish_backward(&inputs[0], cot)?])
    }
}

pub struct PixelShuffleOp(pub usize);

impl<T: Real> DifferentiableOp<T> for PixelShuffleOp {
    fn forward(&self, inputs: &[Tensor<T>]) -> Result<Tensor<T>> {
        arity(inputs, 1, "pixel_shuffle")?;
        pixel_shuffle(&inputs[0], self.0)
    }

    fn vjp(&self, _: &[Tensor<T>], _: &Tensor<T>, cot: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        Ok(vec![pixel_unshuffle(cot, self.0)?])
    }
}

/// Inputs: `[x, weight, bias]`.
pub struct ShiftConvOp;

impl<T: Real> DifferentiableOp<T> for ShiftConvOp {
    fn forward(&self, inputs: &[Tensor<T>]) -> Result<Tensor<T>> {
        arity(inputs, 3, "shift_conv")?;
        shift_conv(&inputs[0], &inputs[1], Some(inputs[2].data()), &MacCounter::new())
    }

    fn vjp(&self, inputs: &[Tensor<T>], _: &Tensor<T>, cot: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        let g = shift_conv_backward(&shift5(&inputs[0]), &inputs[1], cot)?;
        Ok(vec![g.dx, g.dweight, vector(g.dbias)])
    }
}

/// Inputs: `[a, b]` as `(batch, 1, rows, cols)` matrices.
pub struct MatmulOp;

impl<T: Real> DifferentiableOp<T> for MatmulOp {
    fn forward(&self, inputs: &[Tensor<T>]) -> Result<Tensor<T>> {
        arity(inputs, 2, "matmul")?;
        matmul(&inputs[0], &inputs[1])
    }

    fn vjp(&self, inputs: &[Tensor<T>], _: &Tensor<T>, cot: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        let (a, b) = (&inputs[0], &inputs[1]);
        let (sa, sb) = (a.shape(), b.shape());
        let (r, k, s) = (sa.h, sa.w, sb.w);
        let mut da = Tensor::zeros(sa);
        let mut db = Tensor::zeros(sb);
        for i in 0..sa.n {
            let g = &cot.data()[i * r * s..(i + 1) * r * s];
            gemm_nt(g, &b.data()[i * k * s..(i + 1) * k * s], &mut da.data_mut()[i * r * k..(i + 1) * r * k], r, s, k);
            gemm_tn(&a.data()[i * r * k..(i + 1) * r * k], g, &mut db.data_mut()[i * k * s..(i + 1) * k * s], k, r, s);
        }
        Ok(vec![da, db])
    }
}
