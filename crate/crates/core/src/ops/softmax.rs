use crate::{Real, Tensor};

/// Row-wise softmax over contiguous rows of length `row`, with max
/// subtraction.
pub fn softmax_rows_in_place<T: Real>(data: &mut [T], row: usize) {
    if row == 0 {
        return;
    }
    for r in data.chunks_exact_mut(row) {
        let max = r.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for v in r.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        let inv = T::one() / sum;
        for v in r.iter_mut() {
            *v *= inv;
        }
    }
}

/// Softmax along the last (width) axis.
pub fn softmax<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    let mut out = x.clone();
    let w = x.shape().w;
    softmax_rows_in_place(out.data_mut(), w);
    out
}

/// Overwrites `dy` with the input cotangent given softmax outputs `y`.
pub fn softmax_rows_backward<T: Real>(y: &[T], dy: &mut [T], row: usize) {
    if row == 0 {
        return;
    }
    for (yr, gr) in y.chunks_exact(row).zip(dy.chunks_exact_mut(row)) {
        let dot: T = yr.iter().zip(gr.iter()).map(|(&a, &b)| a * b).sum();
        for (g, &a) in gr.iter_mut().zip(yr) {
            *g = a * (*g - dot);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Shape;

    #[test]
    fn uniform_logits() {
        let x = Tensor::<f64>::full(Shape::new(1, 1, 2, 5), 0.3);
        let y = softmax(&x);
        assert!(y.data().iter().all(|&v| (v - 0.2).abs() < 1e-15));
    }

    #[test]
    fn ln2_case() {
        let x = Tensor::<f64>::from_vec(Shape::new(1, 1, 1, 2), alloc::vec![0.0, 2f64.ln()]).unwrap();
        let y = softmax(&x);
        assert!((y.data()[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((y.data()[1] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn large_logits_are_stable() {
        let x = Tensor::<f32>::from_vec(Shape::new(1, 1, 1, 3), alloc::vec![1000.0, 1001.0, 999.0]).unwrap();
        let y = softmax(&x);
        assert!(y.is_finite());
        assert!((y.sum() - 1.0).abs() < 1e-6);
    }
}
