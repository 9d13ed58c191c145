//! Bicubic degradation, paired patch sampling with dihedral augmentation,
//! and a synthetic stand-in corpus.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::{rng, Error, Real, Result, Shape, Tensor};

const CUBIC_A: f64 = -0.5;

/// Keys cubic convolution kernel with `a = -0.5`.
pub fn cubic(x: f64) -> f64 {
    let x = x.abs();
    let a = CUBIC_A;
    if x <= 1.0 {
        ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a
    } else {
        0.0
    }
}

/// Per output sample, the contributing `(input index, weight)` pairs.
/// Downscaling widens the kernel by the scale factor; indices past the
/// border are clamped and weights renormalised.
pub fn resample_taps(in_len: usize, out_len: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = out_len as f64 / in_len as f64;
    let (ks, width) = if scale < 1.0 { (scale, 4.0 / scale) } else { (1.0, 4.0) };
    let taps = libm::ceil(width) as isize + 2;
    (0..out_len)
        .map(|i| {
            let u = (i as f64 + 0.5) / scale - 0.5;
            let left = libm::floor(u - width / 2.0) as isize;
            let mut row: Vec<(usize, f64)> = Vec::with_capacity(taps as usize);
            let mut total = 0.0;
            for j in 0..taps {
                let idx = left + j;
                let w = ks * cubic(ks * (u - idx as f64));
                if w == 0.0 {
                    continue;
                }
                let clamped = idx.clamp(0, in_len as isize - 1) as usize;
                match row.iter_mut().find(|(k, _)| *k == clamped) {
                    Some(e) => e.1 += w,
                    None => row.push((clamped, w)),
                }
                total += w;
            }
            row.iter_mut().for_each(|e| e.1 /= total);
            row
        })
        .collect()
}

/// Separable bicubic resize of every plane to `out_h x out_w`.
pub fn resize_bicubic<T: Real>(x: &Tensor<T>, out_h: usize, out_w: usize) -> Result<Tensor<T>> {
    let s = x.shape();
    if s.h == 0 || s.w == 0 || out_h == 0 || out_w == 0 {
        return Err(Error::shape("resize_bicubic", format!("cannot resize {s} to {out_h}x{out_w}")));
    }
    let ty = resample_taps(s.h, out_h);
    let tx = resample_taps(s.w, out_w);
    let mut out = Tensor::zeros(Shape::new(s.n, s.c, out_h, out_w));
    let mut rows = alloc::vec![0.0f64; s.h * out_w];
    for n in 0..s.n {
        for c in 0..s.c {
            let src = x.plane(n, c);
            for y in 0..s.h {
                for (ox, taps) in tx.iter().enumerate() {
                    rows[y * out_w + ox] = taps.iter().map(|&(i, w)| w * src[y * s.w + i].as_f64()).sum();
                }
            }
            let dst = out.plane_mut(n, c);
            for (oy, taps) in ty.iter().enumerate() {
                for ox in 0..out_w {
                    let v: f64 = taps.iter().map(|&(i, w)| w * rows[i * out_w + ox]).sum();
                    dst[oy * out_w + ox] = T::from_f64(v);
                }
            }
        }
    }
    Ok(out)
}

fn clamp_unit<T: Real>(t: Tensor<T>) -> Tensor<T> {
    t.map(|v| v.max(T::zero()).min(T::one()))
}

/// Antialiased bicubic downscale by an integer factor, clamped to `[0, 1]`.
pub fn degrade_bicubic<T: Real>(hr: &Tensor<T>, s: usize) -> Result<Tensor<T>> {
    let sh = hr.shape();
    if s == 0 || !sh.h.is_multiple_of(s) || !sh.w.is_multiple_of(s) {
        return Err(Error::shape("degrade_bicubic", format!("{}x{} is not divisible by scale {s}", sh.h, sh.w)));
    }
    Ok(clamp_unit(resize_bicubic(hr, sh.h / s, sh.w / s)?))
}

/// Bicubic upscale by an integer factor, clamped to `[0, 1]`.
pub fn upsample_bicubic<T: Real>(lr: &Tensor<T>, s: usize) -> Result<Tensor<T>> {
    let sh = lr.shape();
    if s == 0 {
        return Err(Error::shape("upsample_bicubic", "scale must be positive"));
    }
    Ok(clamp_unit(resize_bicubic(lr, sh.h * s, sh.w * s)?))
}

/// A dihedral transform: optional horizontal flip, then `rot` quarter
/// turns counter-clockwise.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Augment {
    pub rot: u8,
    pub hflip: bool,
}

impl Augment {
    pub fn random<R: Rng>(rng: &mut R) -> Self {
        Augment { rot: rng.random_range(0..4), hflip: rng.random_bool(0.5) }
    }

    pub fn apply<T: Real>(&self, x: &Tensor<T>) -> Tensor<T> {
        let mut out = if self.hflip { hflip(x) } else { x.clone() };
        for _ in 0..self.rot % 4 {
            out = rot90(&out);
        }
        out
    }
}

pub fn hflip<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    let s = x.shape();
    Tensor::from_fn(s, |n, c, y, xx| x.at(n, c, y, s.w - 1 - xx))
}

/// Quarter turn counter-clockwise; `(h, w)` becomes `(w, h)`.
pub fn rot90<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    let s = x.shape();
    Tensor::from_fn(Shape::new(s.n, s.c, s.w, s.h), |n, c, y, xx| x.at(n, c, xx, s.w - 1 - y))
}

/// High-resolution RGB images, each `(1, 3, H, W)` with values in `[0, 1]`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub images: Vec<Tensor<f32>>,
}

impl Dataset {
    pub fn new(images: Vec<Tensor<f32>>) -> Result<Self> {
        for (i, im) in images.iter().enumerate() {
            let s = im.shape();
            if s.n != 1 || s.c != 3 {
                return Err(Error::Data(format!("image {i} has shape {s}, expected (1, 3, H, W)")));
            }
        }
        Ok(Dataset { images })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}

/// `batch` random HR crops of side `lr_patch * scale`, each paired with
/// its bicubic degradation, with an identical random dihedral transform
/// applied to both halves of a pair when `augment` is set.
pub fn sample_batch<R: Rng>(
    data: &Dataset,
    batch: usize,
    lr_patch: usize,
    scale: usize,
    augment: bool,
    rng: &mut R,
) -> Result<(Tensor<f32>, Tensor<f32>)> {
    let hp = lr_patch * scale;
    let eligible: Vec<&Tensor<f32>> = data.images.iter().filter(|im| im.shape().h >= hp && im.shape().w >= hp).collect();
    if eligible.len() < data.len() {
        log::warn!("skipping {} images smaller than {hp}x{hp}", data.len() - eligible.len());
    }
    if eligible.is_empty() {
        return Err(Error::Data(format!("no image is at least {hp}x{hp}")));
    }
    let mut lrs = Vec::with_capacity(batch);
    let mut hrs = Vec::with_capacity(batch);
    for _ in 0..batch {
        let im = eligible[rng.random_range(0..eligible.len())];
        let s = im.shape();
        let (y0, x0) = (rng.random_range(0..=s.h - hp), rng.random_range(0..=s.w - hp));
        let aug = Augment::random(rng);
        let hr = Tensor::from_fn(Shape::new(1, 3, hp, hp), |_, c, y, x| im.at(0, c, y0 + y, x0 + x));
        let lr = degrade_bicubic(&hr, scale)?;
        if augment {
            lrs.push(aug.apply(&lr));
            hrs.push(aug.apply(&hr));
        } else {
            lrs.push(lr);
            hrs.push(hr);
        }
    }
    Ok((Tensor::concat_batch(&lrs)?, Tensor::concat_batch(&hrs)?))
}

/// Fraction of a pixel's 4x4 subsamples for which `inside` holds.
fn coverage(y: usize, x: usize, inside: impl Fn(f64, f64) -> bool) -> f64 {
    let mut hit = 0;
    for sy in 0..4 {
        for sx in 0..4 {
            if inside(y as f64 + (sy as f64 + 0.5) / 4.0, x as f64 + (sx as f64 + 0.5) / 4.0) {
                hit += 1;
            }
        }
    }
    hit as f64 / 16.0
}

fn color<R: Rng>(rng: &mut R) -> [f64; 3] {
    [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)]
}

/// One synthetic image: a smooth colour gradient overlaid with sinusoidal
/// gratings, anti-aliased rectangles and discs, and a checkerboard patch.
pub fn synth_image<R: Rng>(rng: &mut R, h: usize, w: usize) -> Tensor<f32> {
    let mut img = [alloc::vec![0.0f64; h * w], alloc::vec![0.0f64; h * w], alloc::vec![0.0f64; h * w]];
    let corners = [color(rng), color(rng), color(rng), color(rng)];
    for y in 0..h {
        for x in 0..w {
            let (v, u) = (y as f64 / h.max(2) as f64, x as f64 / w.max(2) as f64);
            for c in 0..3 {
                let top = corners[0][c] * (1.0 - u) + corners[1][c] * u;
                let bot = corners[2][c] * (1.0 - u) + corners[3][c] * u;
                img[c][y * w + x] = top * (1.0 - v) + bot * v;
            }
        }
    }
    for _ in 0..rng.random_range(1..=2) {
        let freq = rng.random_range(0.03..0.18) * core::f64::consts::TAU;
        let theta = rng.random_range(0.0..core::f64::consts::PI);
        let phase = rng.random_range(0.0..core::f64::consts::TAU);
        let amp = rng.random_range(0.05..0.2);
        let tint = color(rng);
        let (fy, fx) = (freq * libm::sin(theta), freq * libm::cos(theta));
        for y in 0..h {
            for x in 0..w {
                let s = amp * libm::sin(fy * y as f64 + fx * x as f64 + phase);
                for c in 0..3 {
                    img[c][y * w + x] += s * (0.5 + tint[c]);
                }
            }
        }
    }
    let paint = |img: &mut [Vec<f64>; 3], col: [f64; 3], cov: &dyn Fn(usize, usize) -> f64| {
        for y in 0..h {
            for x in 0..w {
                let a = cov(y, x);
                if a > 0.0 {
                    for c in 0..3 {
                        let p = &mut img[c][y * w + x];
                        *p = *p * (1.0 - a) + col[c] * a;
                    }
                }
            }
        }
    };
    let (hf, wf) = (h as f64, w as f64);
    for _ in 0..rng.random_range(2..=4) {
        let (y0, x0) = (rng.random_range(0.0..hf), rng.random_range(0.0..wf));
        let (rh, rw) = (rng.random_range(3.0..hf / 2.0 + 4.0), rng.random_range(3.0..wf / 2.0 + 4.0));
        let col = color(rng);
        paint(&mut img, col, &|y, x| coverage(y, x, |py, px| py >= y0 && py < y0 + rh && px >= x0 && px < x0 + rw));
    }
    for _ in 0..rng.random_range(1..=2) {
        let (cy, cx) = (rng.random_range(0.0..hf), rng.random_range(0.0..wf));
        let r = rng.random_range(3.0..hf.min(wf) / 4.0 + 4.0);
        let col = color(rng);
        paint(&mut img, col, &|y, x| coverage(y, x, |py, px| (py - cy) * (py - cy) + (px - cx) * (px - cx) < r * r));
    }
    {
        let cell = rng.random_range(3.0..9.0);
        let (y0, x0) = (rng.random_range(0.0..hf * 0.6), rng.random_range(0.0..wf * 0.6));
        let (ph, pw) = (rng.random_range(hf * 0.2..hf * 0.5), rng.random_range(wf * 0.2..wf * 0.5));
        let (a, b) = (color(rng), color(rng));
        let inside = |py: f64, px: f64| py >= y0 && py < y0 + ph && px >= x0 && px < x0 + pw;
        let odd = |py: f64, px: f64| ((libm::floor((py - y0) / cell) + libm::floor((px - x0) / cell)) as i64).rem_euclid(2) == 1;
        paint(&mut img, a, &|y, x| coverage(y, x, |py, px| inside(py, px) && !odd(py, px)));
        paint(&mut img, b, &|y, x| coverage(y, x, |py, px| inside(py, px) && odd(py, px)));
    }
    Tensor::from_fn(Shape::new(1, 3, h, w), |_, c, y, x| img[c][y * w + x].clamp(0.0, 1.0) as f32)
}

/// `count` synthetic `size x size` images, deterministic in `seed`.
pub fn synth_dataset(seed: u64, count: usize, size: usize) -> Dataset {
    let images = (0..count)
        .map(|i| synth_image(&mut rng::indexed_stream(seed, "synth.image", i as u64), size, size))
        .collect();
    Dataset { images }
}
