//! Parameterised layers and the visitor used to walk a parameter tree.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::ops::{self, BnCache, BnMode, MacCounter, BN_EPS, BN_MOMENTUM};
use crate::{Error, Real, Result, Shape, Tensor};
use crate::Param;

/// Execution context threaded through a forward pass.
#[derive(Debug)]
pub struct Ctx {
    pub mode: BnMode,
    /// Keep intermediate values for a backward pass.
    pub record: bool,
    pub macs: MacCounter,
}

impl Ctx {
    pub fn train() -> Self {
        Ctx { mode: BnMode::Train, record: true, macs: MacCounter::new() }
    }

    pub fn infer() -> Self {
        Ctx { mode: BnMode::Infer, record: false, macs: MacCounter::new() }
    }

    /// Inference-mode normalisation with caches kept, for differentiating
    /// the inference graph.
    pub fn infer_recording() -> Self {
        Ctx { mode: BnMode::Infer, record: true, macs: MacCounter::new() }
    }
}

/// One named entry of a parameter tree.
pub enum Entry<'a, T> {
    Param(&'a Param<T>),
    /// Non-learnable state such as running statistics.
    Buffer(&'a [T]),
}

pub enum EntryMut<'a, T> {
    Param(&'a mut Param<T>),
    Buffer(&'a mut Vec<T>),
}

pub trait Module<T: Real> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, Entry<'_, T>));
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, EntryMut<'_, T>));

    fn param_count(&self) -> usize {
        let mut total = 0;
        self.visit("", &mut |_, e| {
            if let Entry::Param(p) = e {
                total += p.numel();
            }
        });
        total
    }

    fn zero_grad(&mut self) {
        self.visit_mut("", &mut |_, e| {
            if let EntryMut::Param(p) = e {
                p.zero_grad();
            }
        });
    }
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        String::from(name)
    } else {
        format!("{prefix}.{name}")
    }
}

/// Convolution with a `1x1` or `3x3` kernel and a bias.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv2d<T> {
    pub weight: Param<T>,
    pub bias: Param<T>,
}

impl<T: Real> Conv2d<T> {
    pub fn zeros(c_out: usize, c_in: usize, k: usize) -> Self {
        Conv2d { weight: Param::zeros(Shape::new(c_out, c_in, k, k)), bias: Param::zeros(Shape::vector(c_out)) }
    }

    /// Weights uniform in `±sqrt(1 / fan_in)`, zero bias.
    pub fn init_uniform<R: Rng>(c_out: usize, c_in: usize, k: usize, rng: &mut R) -> Self {
        let mut conv = Self::zeros(c_out, c_in, k);
        let bound = libm::sqrt(1.0 / (c_in * k * k) as f64);
        for v in conv.weight.value.data_mut() {
            *v = T::from_f64(rng.random_range(-bound..=bound));
        }
        conv
    }

    pub fn c_out(&self) -> usize {
        self.weight.shape().n
    }

    pub fn c_in(&self) -> usize {
        self.weight.shape().c
    }

    pub fn kernel(&self) -> usize {
        self.weight.shape().h
    }

    pub fn forward(&self, x: &Tensor<T>, macs: &MacCounter) -> Result<Tensor<T>> {
        ops::conv2d_counted(x, &self.weight.value, Some(self.bias.value.data()), macs)
    }

    /// Accumulates parameter gradients and returns the input cotangent.
    pub fn backward(&mut self, x: &Tensor<T>, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let g = ops::conv2d_backward(x, &self.weight.value, dy)?;
        self.accumulate(&g)?;
        Ok(g.dx)
    }

    pub(crate) fn accumulate(&mut self, g: &ops::ConvGrads<T>) -> Result<()> {
        self.weight.grad.add_assign(&g.dweight)?;
        for (a, &b) in self.bias.grad.data_mut().iter_mut().zip(&g.dbias) {
            *a += b;
        }
        Ok(())
    }

    pub fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, Entry<'_, T>)) {
        f(&join(prefix, "weight"), Entry::Param(&self.weight));
        f(&join(prefix, "bias"), Entry::Param(&self.bias));
    }

    pub fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, EntryMut<'_, T>)) {
        f(&join(prefix, "weight"), EntryMut::Param(&mut self.weight));
        f(&join(prefix, "bias"), EntryMut::Param(&mut self.bias));
    }

    pub fn cast<U: Real>(&self) -> Conv2d<U> {
        Conv2d { weight: self.weight.cast(), bias: self.bias.cast() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchNorm<T> {
    pub gamma: Param<T>,
    pub beta: Param<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    pub eps: T,
    pub momentum: T,
}

impl<T: Real> BatchNorm<T> {
    /// Identity-initialised: `gamma = 1`, `beta = 0`, unit running variance.
    pub fn new(c: usize) -> Self {
        BatchNorm {
            gamma: Param::new(Tensor::full(Shape::vector(c), T::one())),
            beta: Param::zeros(Shape::vector(c)),
            running_mean: vec![T::zero(); c],
            running_var: vec![T::one(); c],
            eps: T::from_f64(BN_EPS),
            momentum: T::from_f64(BN_MOMENTUM),
        }
    }

    pub fn channels(&self) -> usize {
        self.running_mean.len()
    }

    pub fn forward(&self, x: &Tensor<T>, mode: BnMode) -> Result<(Tensor<T>, BnCache<T>)> {
        ops::batchnorm_normalize(
            x,
            self.gamma.value.data(),
            self.beta.value.data(),
            &self.running_mean,
            &self.running_var,
            self.eps,
            mode,
        )
    }

    /// Accumulates gamma/beta gradients, commits the batch statistics of a
    /// training-mode forward and returns the input cotangent.
    pub fn backward(&mut self, cache: &BnCache<T>, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let (dx, dg, db) = ops::batchnorm_backward(cache, self.gamma.value.data(), dy)?;
        for (a, b) in self.gamma.grad.data_mut().iter_mut().zip(dg) {
            *a += b;
        }
        for (a, b) in self.beta.grad.data_mut().iter_mut().zip(db) {
            *a += b;
        }
        ops::commit_running_stats(cache, &mut self.running_mean, &mut self.running_var, self.momentum);
        Ok(dx)
    }

    /// Channels `start..end` as a standalone batch norm.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start > end || end > self.channels() {
            return Err(Error::shape("batchnorm slice", format!("{start}..{end} of {}", self.channels())));
        }
        let cut = |p: &Param<T>| Param::new(p.value.narrow_channels(start, end).expect("range checked"));
        Ok(BatchNorm {
            gamma: cut(&self.gamma),
            beta: cut(&self.beta),
            running_mean: self.running_mean[start..end].to_vec(),
            running_var: self.running_var[start..end].to_vec(),
            eps: self.eps,
            momentum: self.momentum,
        })
    }

    /// The convolution that computes `bn(conv(x))` in inference mode.
    pub fn fold_into(&self, conv: &Conv2d<T>) -> Result<Conv2d<T>> {
        let (w, b) = ops::fold_bn(
            &conv.weight.value,
            conv.bias.value.data(),
            self.gamma.value.data(),
            self.beta.value.data(),
            &self.running_mean,
            &self.running_var,
            self.eps,
        )?;
        Ok(Conv2d { weight: Param::new(w), bias: Param::new(Tensor::from_vec(Shape::vector(b.len()), b)?) })
    }

    pub fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, Entry<'_, T>)) {
        f(&join(prefix, "gamma"), Entry::Param(&self.gamma));
        f(&join(prefix, "beta"), Entry::Param(&self.beta));
        f(&join(prefix, "running_mean"), Entry::Buffer(&self.running_mean));
        f(&join(prefix, "running_var"), Entry::Buffer(&self.running_var));
    }

    pub fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, EntryMut<'_, T>)) {
        f(&join(prefix, "gamma"), EntryMut::Param(&mut self.gamma));
        f(&join(prefix, "beta"), EntryMut::Param(&mut self.beta));
        f(&join(prefix, "running_mean"), EntryMut::Buffer(&mut self.running_mean));
        f(&join(prefix, "running_var"), EntryMut::Buffer(&mut self.running_var));
    }

    pub fn cast<U: Real>(&self) -> BatchNorm<U> {
        BatchNorm {
            gamma: self.gamma.cast(),
            beta: self.beta.cast(),
            running_mean: self.running_mean.iter().map(|v| U::from_f64(v.as_f64())).collect(),
            running_var: self.running_var.iter().map(|v| U::from_f64(v.as_f64())).collect(),
            eps: U::from_f64(self.eps.as_f64()),
            momentum: U::from_f64(self.momentum.as_f64()),
        }
    }
}

/// Shift convolution: five-way channel-group shift then a 1x1 conv.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftConv<T> {
    pub conv: Conv2d<T>,
}

impl<T: Real> ShiftConv<T> {
    pub fn init_uniform<R: Rng>(c_out: usize, c_in: usize, rng: &mut R) -> Self {
        ShiftConv { conv: Conv2d::init_uniform(c_out, c_in, 1, rng) }
    }

    /// Returns the output and the shifted input needed by backward.
    pub fn forward(&self, x: &Tensor<T>, macs: &MacCounter) -> Result<(Tensor<T>, Tensor<T>)> {
        let shifted = ops::shift5(x);
        let y = self.conv.forward(&shifted, macs)?;
        Ok((y, shifted))
    }

    pub fn backward(&mut self, shifted: &Tensor<T>, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let g = ops::shift_conv_backward(shifted, &self.conv.weight.value, dy)?;
        self.conv.accumulate(&g)?;
        Ok(g.dx)
    }

    pub fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, Entry<'_, T>)) {
        self.conv.visit(prefix, f);
    }

    pub fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, EntryMut<'_, T>)) {
        self.conv.visit_mut(prefix, f);
    }

    pub fn cast<U: Real>(&self) -> ShiftConv<U> {
        ShiftConv { conv: self.conv.cast() }
    }
}

/// Values of every learnable tensor, in visit order.
pub fn param_values<T: Real, M: Module<T> + ?Sized>(m: &M) -> Vec<Tensor<T>> {
    let mut out = Vec::new();
    m.visit("", &mut |_, e| {
        if let Entry::Param(p) = e {
            out.push(p.value.clone());
        }
    });
    out
}

/// Gradients of every learnable tensor, in visit order.
pub fn param_grads<T: Real, M: Module<T> + ?Sized>(m: &M) -> Vec<Tensor<T>> {
    let mut out = Vec::new();
    m.visit("", &mut |_, e| {
        if let Entry::Param(p) = e {
            out.push(p.grad.clone());
        }
    });
    out
}

/// Overwrites learnable values in visit order.
pub fn load_param_values<T: Real, M: Module<T> + ?Sized>(m: &mut M, values: &[Tensor<T>]) -> Result<()> {
    let mut i = 0;
    let mut err = None;
    m.visit_mut("", &mut |name, e| {
        if let EntryMut::Param(p) = e {
            match values.get(i) {
                Some(v) if v.shape() == p.shape() => p.value = v.clone(),
                Some(v) if err.is_none() => {
                    err = Some(Error::shape("load_param_values", format!("{name}: expected {}, got {}", p.shape(), v.shape())));
                }
                None if err.is_none() => err = Some(Error::shape("load_param_values", format!("missing value for {name}"))),
                _ => {}
            }
            i += 1;
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    if i != values.len() {
        return Err(Error::shape("load_param_values", format!("{} values for {i} parameters", values.len())));
    }
    Ok(())
}
