use crate::{Real, Result, Tensor};

#[inline]
fn sigmoid<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// `x * sigmoid(x)`, elementwise.
pub fn swish<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| v * sigmoid(v))
}

pub fn swish_backward<T: Real>(x: &Tensor<T>, dy: &Tensor<T>) -> Result<Tensor<T>> {
    x.zip_map(dy, |v, g| {
        let s = sigmoid(v);
        g * (s + v * s * (T::one() - s))
    })
}
