//! Central finite-difference checking of vector-Jacobian products.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::{rng, Error, Real, Result, Tensor};

/// A forward map with an explicit vector-Jacobian product.
pub trait DifferentiableOp<T: Real> {
    fn forward(&self, inputs: &[Tensor<T>]) -> Result<Tensor<T>>;

    /// Cotangents for every input, in input order.
    fn vjp(&self, inputs: &[Tensor<T>], output: &Tensor<T>, cotangent: &Tensor<T>) -> Result<Vec<Tensor<T>>>;
}

#[derive(Clone, Debug)]
pub struct GradCheckOptions {
    /// Finite-difference step.
    pub step: f64,
    /// Lower bound on the denominator of the relative error, so entries
    /// with vanishing gradient are judged on absolute error.
    pub floor: f64,
    /// Seed for the random output cotangent.
    pub seed: u64,
    /// Inputs excluded from the check (their cotangent is still computed).
    pub skip: Vec<usize>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions { step: 1e-5, floor: 1e-3, seed: 0, skip: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InputReport {
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub inputs: Vec<InputReport>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.inputs.iter().map(|r| r.max_rel_error).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_rel_error() < self.tolerance
    }
}

pub fn grad_check(op: &dyn DifferentiableOp<f64>, inputs: &[Tensor<f64>], tolerance: f64) -> Result<GradCheckReport> {
    grad_check_with(op, inputs, tolerance, &GradCheckOptions::default())
}

/// Compares `op.vjp` against central differences of `<op(x), u>` for a
/// random cotangent `u`, element by element.
pub fn grad_check_with(
    op: &dyn DifferentiableOp<f64>,
    inputs: &[Tensor<f64>],
    tolerance: f64,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport> {
    let out = op.forward(inputs)?;
    let mut r = rng::stream(opts.seed, "gradcheck.cotangent");
    let cot = Tensor::from_fn(out.shape(), |_, _, _, _| r.random_range(-1.0..1.0));
    let grads = op.vjp(inputs, &out, &cot)?;
    if grads.len() != inputs.len() {
        return Err(Error::GradCheck(format!("vjp returned {} cotangents for {} inputs", grads.len(), inputs.len())));
    }
    let mut reports = Vec::with_capacity(inputs.len());
    let mut probe = inputs.to_vec();
    for (i, g) in grads.iter().enumerate() {
        if g.shape() != inputs[i].shape() {
            return Err(Error::GradCheck(format!("cotangent {i} has shape {} for input {}", g.shape(), inputs[i].shape())));
        }
        if let Some(j) = g.data().iter().position(|v| !v.is_finite()) {
            return Err(Error::GradCheck(format!("non-finite gradient for input {i} at element {j}")));
        }
        let mut rep = InputReport { max_rel_error: 0.0, worst_index: 0, analytic: 0.0, numeric: 0.0 };
        if opts.skip.contains(&i) {
            reports.push(rep);
            continue;
        }
        for j in 0..inputs[i].numel() {
            let orig = inputs[i].data()[j];
            probe[i].data_mut()[j] = orig + opts.step;
            let plus = op.forward(&probe)?.dot(&cot)?;
            probe[i].data_mut()[j] = orig - opts.step;
            let minus = op.forward(&probe)?.dot(&cot)?;
            probe[i].data_mut()[j] = orig;
            let numeric = (plus - minus) / (2.0 * opts.step);
            let analytic = g.data()[j];
            if !numeric.is_finite() {
                return Err(Error::GradCheck(format!("non-finite finite difference for input {i} at element {j}")));
            }
            let denom = analytic.abs().max(numeric.abs()).max(opts.floor);
            let rel = (analytic - numeric).abs() / denom;
            if rel > rep.max_rel_error {
                rep = InputReport { max_rel_error: rel, worst_index: j, analytic, numeric };
            }
        }
        reports.push(rep);
    }
    Ok(GradCheckReport { inputs: reports, tolerance })
}
