//! Luma-channel PSNR and SSIM on the 0–255 scale.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Real, Result, Shape, Tensor};

/// Stand-in written to logs for an infinite PSNR.
pub const PSNR_SENTINEL: f64 = 99.0;

/// BT.601 studio-swing luma of an RGB image in `[0, 1]`, returned on the
/// 0–255 scale as a single channel.
pub fn rgb_to_y<T: Real>(img: &Tensor<T>) -> Result<Tensor<f64>> {
    let s = img.shape();
    if s.c != 3 {
        return Err(Error::shape("rgb_to_y", format!("expected 3 channels, got {}", s.c)));
    }
    Ok(Tensor::from_fn(Shape::new(s.n, 1, s.h, s.w), |n, _, y, x| {
        let (r, g, b) = (img.at(n, 0, y, x).as_f64(), img.at(n, 1, y, x).as_f64(), img.at(n, 2, y, x).as_f64());
        (65_481.0 * r + 128_553.0 * g + 24_966.0 * b) / 1000.0 + 16.0
    }))
}

/// Rounds to the nearest 8-bit level, as images are stored.
pub fn quantize<T: Real>(img: &Tensor<T>) -> Tensor<T> {
    let k = T::from_f64(255.0);
    img.map(|v| (v.max(T::zero()).min(T::one()) * k).round() / k)
}

/// Removes `k` pixels from every side.
pub fn crop_border(x: &Tensor<f64>, k: usize) -> Result<Tensor<f64>> {
    let s = x.shape();
    if 2 * k >= s.h || 2 * k >= s.w {
        return Err(Error::shape("crop_border", format!("border {k} leaves nothing of {}x{}", s.h, s.w)));
    }
    Ok(Tensor::from_fn(Shape::new(s.n, s.c, s.h - 2 * k, s.w - 2 * k), |n, c, y, xx| x.at(n, c, y + k, xx + k)))
}

/// `10 log10(255² / MSE)` after cropping `crop` border pixels; `+inf`
/// when the images agree exactly.
pub fn psnr(a: &Tensor<f64>, b: &Tensor<f64>, crop: usize) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::shape("psnr", format!("{} vs {}", a.shape(), b.shape())));
    }
    let (a, b) = (crop_border(a, crop)?, crop_border(b, crop)?);
    let mse = a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.numel() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * libm::log10(255.0 * 255.0 / mse))
}

/// Finite value for logging plus whether the sentinel was substituted.
pub fn psnr_for_log(v: f64) -> (f64, bool) {
    if v.is_finite() {
        (v, false)
    } else {
        (PSNR_SENTINEL, true)
    }
}

fn gaussian_window() -> [f64; 11] {
    let mut g = [0.0; 11];
    for (i, v) in g.iter_mut().enumerate() {
        let d = i as f64 - 5.0;
        *v = libm::exp(-d * d / (2.0 * 1.5 * 1.5));
    }
    let s: f64 = g.iter().sum();
    g.iter_mut().for_each(|v| *v /= s);
    g
}

/// Valid-mode separable filtering of one plane with the 11-tap window.
fn filter_valid(src: &[f64], h: usize, w: usize, g: &[f64; 11]) -> Vec<f64> {
    let (oh, ow) = (h - 10, w - 10);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = (0..11).map(|k| g[k] * src[y * w + x + k]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..11).map(|k| g[k] * rows[(y + k) * ow + x]).sum();
        }
    }
    out
}

/// Mean SSIM over all valid 11x11 Gaussian-window positions (σ = 1.5,
/// `K1 = 0.01`, `K2 = 0.03`, `L = 255`), averaged across planes.
pub fn ssim(a: &Tensor<f64>, b: &Tensor<f64>) -> Result<f64> {
    let s = a.shape();
    if s != b.shape() {
        return Err(Error::shape("ssim", format!("{} vs {}", s, b.shape())));
    }
    if s.h < 11 || s.w < 11 {
        return Err(Error::shape("ssim", format!("images must be at least 11x11, got {}x{}", s.h, s.w)));
    }
    let c1 = (0.01f64 * 255.0) * (0.01 * 255.0);
    let c2 = (0.03f64 * 255.0) * (0.03 * 255.0);
    let g = gaussian_window();
    let mut total = 0.0;
    let mut count = 0usize;
    for n in 0..s.n {
        for c in 0..s.c {
            let (pa, pb) = (a.plane(n, c), b.plane(n, c));
            let aa: Vec<f64> = pa.iter().map(|v| v * v).collect();
            let bb: Vec<f64> = pb.iter().map(|v| v * v).collect();
            let ab: Vec<f64> = pa.iter().zip(pb).map(|(x, y)| x * y).collect();
            let f = |p: &[f64]| filter_valid(p, s.h, s.w, &g);
            let (ma, mb, saa, sbb, sab) = (f(pa), f(pb), f(&aa), f(&bb), f(&ab));
            for i in 0..ma.len() {
                let (mx, my) = (ma[i], mb[i]);
                let vx = saa[i] - mx * mx;
                let vy = sbb[i] - my * my;
                let cov = sab[i] - mx * my;
                total += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            }
            count += ma.len();
        }
    }
    Ok(total / count as f64)
}


/// Quality of one reconstructed image next to the bicubic baseline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalRow {
    pub index: usize,
    pub psnr: f64,
    pub ssim: f64,
    pub bicubic_psnr: f64,
    pub bicubic_ssim: f64,
}

/// Trims `hr` so both sides are multiples of `s`.
pub fn mod_crop<T: Real>(hr: &Tensor<T>, s: usize) -> Tensor<T> {
    let sh = hr.shape();
    let (h, w) = (sh.h - sh.h % s, sh.w - sh.w % s);
    Tensor::from_fn(Shape::new(sh.n, sh.c, h, w), |n, c, y, x| hr.at(n, c, y, x))
}

/// Degrades each HR image, reconstructs it with `model` and with bicubic
/// upsampling, and scores both on 8-bit quantised luma.
pub fn evaluate(
    model: &crate::model::EswtModel<f32>,
    images: &[Tensor<f32>],
    crop: usize,
) -> Result<Vec<EvalRow>> {
    let s = model.config.sr_scale;
    let score = |out: &Tensor<f32>, y_hr: &Tensor<f64>| -> Result<(f64, f64)> {
        let y = rgb_to_y(&quantize(out))?;
        let (a, b) = (crop_border(&y, crop)?, crop_border(y_hr, crop)?);
        Ok((psnr(&y, y_hr, crop)?, ssim(&a, &b)?))
    };
    images
        .iter()
        .enumerate()
        .map(|(index, hr)| {
            let hr = mod_crop(hr, s);
            let lr = quantize(&crate::train::data::degrade_bicubic(&hr, s)?);
            let y_hr = rgb_to_y(&quantize(&hr))?;
            let (psnr, ssim) = score(&model.infer(&lr)?, &y_hr)?;
            let (bicubic_psnr, bicubic_ssim) = score(&crate::train::data::upsample_bicubic(&lr, s)?, &y_hr)?;
            Ok(EvalRow { index, psnr, ssim, bicubic_psnr, bicubic_ssim })
        })
        .collect()
}
