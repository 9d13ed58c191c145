use crate::{Real, Result, Tensor};

/// Mean absolute error and its gradient with respect to `pred`.
///
/// The subgradient at zero difference is taken as zero.
pub fn l1_loss<T: Real>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<(f64, Tensor<T>)> {
    let diff = pred.sub(target)?;
    let n = diff.numel().max(1);
    let loss = diff.data().iter().map(|d| d.as_f64().abs()).sum::<f64>() / n as f64;
    let inv = T::one() / T::from_usize(n);
    let grad = diff.map(|d| {
        if d > T::zero() {
            inv
        } else if d < T::zero() {
            -inv
        } else {
            T::zero()
        }
    });
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use crate::Shape;

    #[test]
    fn closed_forms() {
        let s = Shape::new(1, 1, 1, 2);
        let t = Tensor::<f64>::from_vec(s, vec![1.0, 1.0]).unwrap();
        assert_eq!(l1_loss(&t, &t).unwrap().0, 0.0);
        assert_eq!(l1_loss(&t.map(|v| v + 0.25), &t).unwrap().0, 0.25);
        let p = Tensor::<f64>::from_vec(s, vec![0.0, 1.0]).unwrap();
        let (l, g) = l1_loss(&p, &t).unwrap();
        assert_eq!(l, 0.5);
        assert_eq!(g.data(), &[-0.5, 0.0]);
    }
}
