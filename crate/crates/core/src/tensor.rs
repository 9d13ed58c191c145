//! Dense rank-4 tensors in `(n, c, h, w)` row-major order.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::{Error, Real, Result};

/// Extent of a rank-4 tensor: batch, channels, rows, columns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct Shape {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub const fn new(n: usize, c: usize, h: usize, w: usize) -> Self {
        Shape { n, c, h, w }
    }

    /// A flat vector stored as `(1, len, 1, 1)`.
    pub const fn vector(len: usize) -> Self {
        Shape { n: 1, c: len, h: 1, w: 1 }
    }

    pub const fn numel(&self) -> usize {
        self.n * self.c * self.h * self.w
    }

    /// Pixels in one channel plane.
    pub const fn plane(&self) -> usize {
        self.h * self.w
    }

    #[inline]
    pub const fn index(&self, n: usize, c: usize, y: usize, x: usize) -> usize {
        ((n * self.c + c) * self.h + y) * self.w + x
    }

    pub const fn dims(&self) -> [usize; 4] {
        [self.n, self.c, self.h, self.w]
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.n, self.c, self.h, self.w)
    }
}

#[derive(Clone, PartialEq)]
pub struct Tensor<T = f32> {
    shape: Shape,
    data: Vec<T>,
}

impl<T: fmt::Debug> fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let head: Vec<_> = self.data.iter().take(8).collect();
        f.debug_struct("Tensor")
            .field("shape", &self.shape)
            .field("head", &head)
            .finish()
    }
}

impl<T: Real> Tensor<T> {
    pub fn zeros(shape: Shape) -> Self {
        Self::full(shape, T::zero())
    }

    pub fn full(shape: Shape, value: T) -> Self {
        Tensor { shape, data: vec![value; shape.numel()] }
    }

    pub fn from_vec(shape: Shape, data: Vec<T>) -> Result<Self> {
        if data.len() != shape.numel() {
            return Err(Error::shape(
                "tensor",
                alloc::format!("{} values for shape {}", data.len(), shape),
            ));
        }
        Ok(Tensor { shape, data })
    }

    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize, usize, usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(shape.numel());
        for n in 0..shape.n {
            for c in 0..shape.c {
                for y in 0..shape.h {
                    for x in 0..shape.w {
                        data.push(f(n, c, y, x));
                    }
                }
            }
        }
        Tensor { shape, data }
    }

    #[inline]
    pub fn shape(&self) -> Shape {
        self.shape
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn at(&self, n: usize, c: usize, y: usize, x: usize) -> T {
        self.data[self.shape.index(n, c, y, x)]
    }

    #[inline]
    pub fn set(&mut self, n: usize, c: usize, y: usize, x: usize, v: T) {
        let i = self.shape.index(n, c, y, x);
        self.data[i] = v;
    }

    pub fn plane(&self, n: usize, c: usize) -> &[T] {
        let p = self.shape.plane();
        let start = (n * self.shape.c + c) * p;
        &self.data[start..start + p]
    }

    pub fn plane_mut(&mut self, n: usize, c: usize) -> &mut [T] {
        let p = self.shape.plane();
        let start = (n * self.shape.c + c) * p;
        &mut self.data[start..start + p]
    }

    /// Same data under a new shape with equal element count.
    pub fn reshape(self, shape: Shape) -> Result<Self> {
        Self::from_vec(shape, self.data)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor { shape: self.shape, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.expect_shape(other.shape, "zip_map")?;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Tensor { shape: self.shape, data })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.expect_shape(other.shape, "add_assign")?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&self, k: T) -> Self {
        self.map(|v| v * k)
    }

    pub fn fill(&mut self, v: T) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn dot(&self, other: &Self) -> Result<T> {
        self.expect_shape(other.shape, "dot")?;
        Ok(self.data.iter().zip(&other.data).map(|(&a, &b)| a * b).sum())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<T> {
        self.expect_shape(other.shape, "max_abs_diff")?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs())))
    }

    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|&v| U::from_f64(v.as_f64())).collect(),
        }
    }

    /// Copy of channels `start..end`.
    pub fn narrow_channels(&self, start: usize, end: usize) -> Result<Self> {
        let s = self.shape;
        if start > end || end > s.c {
            return Err(Error::shape(
                "narrow_channels",
                alloc::format!("range {start}..{end} of {} channels", s.c),
            ));
        }
        let p = s.plane();
        let out_shape = Shape::new(s.n, end - start, s.h, s.w);
        let mut data = Vec::with_capacity(out_shape.numel());
        for n in 0..s.n {
            let base = (n * s.c + start) * p;
            data.extend_from_slice(&self.data[base..base + (end - start) * p]);
        }
        Ok(Tensor { shape: out_shape, data })
    }

    /// Concatenation along the channel axis.
    pub fn concat_channels(parts: &[&Self]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::shape("concat_channels", "no inputs"))?
            .shape;
        let mut c_total = 0;
        for p in parts {
            let s = p.shape;
            if s.n != first.n || s.h != first.h || s.w != first.w {
                return Err(Error::shape(
                    "concat_channels",
                    alloc::format!("{} does not match {}", s, first),
                ));
            }
            c_total += s.c;
        }
        let out_shape = Shape::new(first.n, c_total, first.h, first.w);
        let plane = first.plane();
        let mut data = Vec::with_capacity(out_shape.numel());
        for n in 0..first.n {
            for p in parts {
                let cs = p.shape.c * plane;
                data.extend_from_slice(&p.data[n * cs..(n + 1) * cs]);
            }
        }
        Ok(Tensor { shape: out_shape, data })
    }

    /// Copy of batch items `start..end`.
    pub fn narrow_batch(&self, start: usize, end: usize) -> Result<Self> {
        let s = self.shape;
        if start > end || end > s.n {
            return Err(Error::shape(
                "narrow_batch",
                alloc::format!("range {start}..{end} of batch {}", s.n),
            ));
        }
        let item = s.c * s.plane();
        Ok(Tensor {
            shape: Shape::new(end - start, s.c, s.h, s.w),
            data: self.data[start * item..end * item].to_vec(),
        })
    }

    pub fn concat_batch(parts: &[Self]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::shape("concat_batch", "no inputs"))?.shape;
        let mut data = Vec::new();
        for p in parts {
            if (p.shape.c, p.shape.h, p.shape.w) != (first.c, first.h, first.w) {
                return Err(Error::shape(
                    "concat_batch",
                    alloc::format!("{} does not match {}", p.shape, first),
                ));
            }
            data.extend_from_slice(&p.data);
        }
        let n = parts.iter().map(|p| p.shape.n).sum();
        Ok(Tensor { shape: Shape::new(n, first.c, first.h, first.w), data })
    }

    pub(crate) fn expect_shape(&self, shape: Shape, op: &'static str) -> Result<()> {
        if self.shape != shape {
            return Err(Error::shape(op, alloc::format!("expected {}, got {}", shape, self.shape)));
        }
        Ok(())
    }
}

/// A learnable tensor with its gradient accumulator and Adam moments.
#[derive(Clone, Debug, PartialEq)]
pub struct Param<T = f32> {
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
    pub m: Tensor<T>,
    pub v: Tensor<T>,
}

impl<T: Real> Param<T> {
    pub fn new(value: Tensor<T>) -> Self {
        let shape = value.shape();
        Param { value, grad: Tensor::zeros(shape), m: Tensor::zeros(shape), v: Tensor::zeros(shape) }
    }

    pub fn zeros(shape: Shape) -> Self {
        Self::new(Tensor::zeros(shape))
    }

    pub fn shape(&self) -> Shape {
        self.value.shape()
    }

    pub fn numel(&self) -> usize {
        self.value.numel()
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(T::zero());
    }

    pub fn reset_moments(&mut self) {
        self.m.fill(T::zero());
        self.v.fill(T::zero());
    }

    pub fn cast<U: Real>(&self) -> Param<U> {
        Param {
            value: self.value.cast(),
            grad: self.grad.cast(),
            m: self.m.cast(),
            v: self.v.cast(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_checks_length() {
        assert!(Tensor::<f32>::from_vec(Shape::new(1, 2, 2, 2), vec![0.0; 7]).is_err());
        let t = Tensor::<f32>::from_vec(Shape::new(1, 2, 2, 2), vec![0.0; 8]).unwrap();
        assert_eq!(t.numel(), 8);
    }

    #[test]
    fn channel_split_and_concat_round_trip() {
        let s = Shape::new(2, 4, 3, 2);
        let t = Tensor::<f32>::from_fn(s, |n, c, y, x| (n * 100 + c * 10 + y * 2 + x) as f32);
        let a = t.narrow_channels(0, 1).unwrap();
        let b = t.narrow_channels(1, 4).unwrap();
        assert_eq!(b.at(1, 0, 2, 1), t.at(1, 1, 2, 1));
        let back = Tensor::concat_channels(&[&a, &b]).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn batch_split_and_concat_round_trip() {
        let s = Shape::new(3, 2, 2, 2);
        let t = Tensor::<f64>::from_fn(s, |n, c, y, x| (n * 8 + c * 4 + y * 2 + x) as f64);
        let parts = [t.narrow_batch(0, 1).unwrap(), t.narrow_batch(1, 3).unwrap()];
        assert_eq!(Tensor::concat_batch(&parts).unwrap(), t);
    }
}
