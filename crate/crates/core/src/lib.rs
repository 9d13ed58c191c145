//! Core of an efficient striped window transformer for lightweight
//! single-image super-resolution.
//!
//! Everything in this crate is pure computation over in-memory buffers and
//! builds with `no_std` + `alloc`: the dense tensor substrate and its
//! hand-written vector-Jacobian products, window partitioning and cyclic
//! shifts, BN-embedded window self-attention in striped and square layouts,
//! the full network with forward and backward passes, the optimiser and the
//! multi-stage flexible-window schedule, the synthetic data pipeline, image
//! quality metrics and the analytic/instrumented complexity counters.
//!
//! File formats, the command line and wall-clock benchmarking live in the
//! `eswt` companion crate.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod attention;
mod error;
pub mod gradcheck;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod ops;
pub mod profile;
mod real;
pub mod rng;
pub mod tensor;
pub mod train;
pub mod window;

pub use error::{Error, Result};
pub use real::Real;
pub use tensor::{Param, Shape, Tensor};
