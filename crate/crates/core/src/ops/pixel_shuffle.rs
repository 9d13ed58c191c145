use crate::{Error, Real, Result, Shape, Tensor};

/// Rearranges `(n, c*s*s, h, w)` into `(n, c, h*s, w*s)`; input channel
/// `c*s*s + dy*s + dx` lands at offset `(dy, dx)` of each output cell.
pub fn pixel_shuffle<T: Real>(x: &Tensor<T>, s: usize) -> Result<Tensor<T>> {
    let sh = x.shape();
    if s == 0 || !sh.c.is_multiple_of(s * s) {
        return Err(Error::shape(
            "pixel_shuffle",
            alloc::format!("{} channels not divisible by scale^2 = {}", sh.c, s * s),
        ));
    }
    let c = sh.c / (s * s);
    let out_shape = Shape::new(sh.n, c, sh.h * s, sh.w * s);
    let mut out = Tensor::zeros(out_shape);
    for n in 0..sh.n {
        for co in 0..c {
            for dy in 0..s {
                for dx in 0..s {
                    let src = x.plane(n, co * s * s + dy * s + dx);
                    let dst = out.plane_mut(n, co);
                    for y in 0..sh.h {
                        for xx in 0..sh.w {
                            dst[(y * s + dy) * sh.w * s + xx * s + dx] = src[y * sh.w + xx];
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Inverse of [`pixel_shuffle`]; also its vector-Jacobian product.
pub fn pixel_unshuffle<T: Real>(x: &Tensor<T>, s: usize) -> Result<Tensor<T>> {
    let sh = x.shape();
    if s == 0 || !sh.h.is_multiple_of(s) || !sh.w.is_multiple_of(s) {
        return Err(Error::shape(
            "pixel_unshuffle",
            alloc::format!("spatial {}x{} not divisible by {s}", sh.h, sh.w),
        ));
    }
    let (h, w) = (sh.h / s, sh.w / s);
    let mut out = Tensor::zeros(Shape::new(sh.n, sh.c * s * s, h, w));
    for n in 0..sh.n {
        for c in 0..sh.c {
            let src = x.plane(n, c);
            for dy in 0..s {
                for dx in 0..s {
                    let dst = out.plane_mut(n, c * s * s + dy * s + dx);
                    for y in 0..h {
                        for xx in 0..w {
                            dst[y * w + xx] = src[(y * s + dy) * sh.w + xx * s + dx];
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn definition_instance() {
        let x = Tensor::<f32>::from_vec(Shape::new(1, 4, 1, 1), alloc::vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let y = pixel_shuffle(&x, 2).unwrap();
        assert_eq!(y.shape(), Shape::new(1, 1, 2, 2));
        assert_eq!(y.data(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn scale_one_is_identity_and_round_trip() {
        let x = Tensor::<f32>::from_fn(Shape::new(2, 8, 3, 2), |n, c, y, x| (n * 97 + c * 13 + y * 5 + x) as f32);
        assert_eq!(pixel_shuffle(&x, 1).unwrap(), x);
        let up = pixel_shuffle(&x, 2).unwrap();
        assert_eq!(pixel_unshuffle(&up, 2).unwrap(), x);
    }

    #[test]
    fn rejects_indivisible_channels() {
        let x = Tensor::<f32>::zeros(Shape::new(1, 6, 2, 2));
        assert!(pixel_shuffle(&x, 2).is_err());
    }
}
