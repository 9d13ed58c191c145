//! Differentiable primitives. Each forward has a matching `*_backward`
//! (vector-Jacobian product); [`diff`] wraps them behind
//! [`DifferentiableOp`](crate::gradcheck::DifferentiableOp) for gradient
//! checking.

use core::cell::Cell;

mod activation;
mod batchnorm;
mod conv;
pub mod diff;
mod matmul;
mod pixel_shuffle;
mod shift;
mod softmax;

pub use activation::{swish, swish_backward};
pub use batchnorm::{batchnorm, batchnorm_backward, batchnorm_normalize, commit_running_stats, fold_bn, BnCache, BnMode, BnState, BN_EPS, BN_MOMENTUM};
pub use conv::{conv2d, conv2d_backward, conv2d_counted, ConvGrads};
pub use matmul::{gemm_nn, gemm_nt, gemm_tn, matmul, matmul_counted};
pub use pixel_shuffle::{pixel_shuffle, pixel_unshuffle};
pub use shift::{shift5, shift5_adjoint, shift_conv, shift_conv_backward, SHIFT_GROUPS};
pub use softmax::{softmax, softmax_rows_backward, softmax_rows_in_place};

/// Multiply-accumulate tally, split into convolution and attention matmul
/// work. Kernels bump it once per call with the nominal work they perform.
#[derive(Debug, Default)]
pub struct MacCounter {
    conv: Cell<u64>,
    matmul: Cell<u64>,
}

impl MacCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_conv(&self, macs: u64) {
        self.conv.set(self.conv.get() + macs);
    }

    pub fn add_matmul(&self, macs: u64) {
        self.matmul.set(self.matmul.get() + macs);
    }

    pub fn conv(&self) -> u64 {
        self.conv.get()
    }

    pub fn matmul(&self) -> u64 {
        self.matmul.get()
    }

    pub fn total(&self) -> u64 {
        self.conv() + self.matmul()
    }

    pub fn reset(&self) {
        self.conv.set(0);
        self.matmul.set(0);
    }
}
