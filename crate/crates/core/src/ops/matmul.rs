use super::MacCounter;
use crate::{Error, Real, Result, Shape, Tensor};

/// `out (r x s) += a (r x k) * b (k x s)`.
pub fn gemm_nn<T: Real>(a: &[T], b: &[T], out: &mut [T], r: usize, k: usize, s: usize) {
    for i in 0..r {
        let orow = &mut out[i * s..(i + 1) * s];
        for p in 0..k {
            let av = a[i * k + p];
            let brow = &b[p * s..(p + 1) * s];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

/// `out (r x s) += a (r x k) * b^T` where `b` is `s x k`.
pub fn gemm_nt<T: Real>(a: &[T], b: &[T], out: &mut [T], r: usize, k: usize, s: usize) {
    for i in 0..r {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..s {
            let brow = &b[j * k..(j + 1) * k];
            out[i * s + j] += arow.iter().zip(brow).map(|(&x, &y)| x * y).sum::<T>();
        }
    }
}

/// `out (r x s) += a^T * b` where `a` is `k x r` and `b` is `k x s`.
pub fn gemm_tn<T: Real>(a: &[T], b: &[T], out: &mut [T], r: usize, k: usize, s: usize) {
    for p in 0..k {
        let arow = &a[p * r..(p + 1) * r];
        let brow = &b[p * s..(p + 1) * s];
        for (i, &av) in arow.iter().enumerate() {
            let orow = &mut out[i * s..(i + 1) * s];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

/// Batched matrix product. Matrices are stored as `(batch, 1, rows, cols)`.
pub fn matmul<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    matmul_counted(a, b, &MacCounter::new())
}

pub fn matmul_counted<T: Real>(a: &Tensor<T>, b: &Tensor<T>, macs: &MacCounter) -> Result<Tensor<T>> {
    let (sa, sb) = (a.shape(), b.shape());
    if sa.c != 1 || sb.c != 1 || sa.n != sb.n || sa.w != sb.h {
        return Err(Error::shape("matmul", alloc::format!("cannot multiply {sa} by {sb}")));
    }
    let (r, k, s) = (sa.h, sa.w, sb.w);
    let mut out = Tensor::zeros(Shape::new(sa.n, 1, r, s));
    for i in 0..sa.n {
        let (ad, bd) = (&a.data()[i * r * k..(i + 1) * r * k], &b.data()[i * k * s..(i + 1) * k * s]);
        gemm_nn(ad, bd, &mut out.data_mut()[i * r * s..(i + 1) * r * s], r, k, s);
    }
    macs.add_matmul((sa.n * r * k * s) as u64);
    Ok(out)
}
