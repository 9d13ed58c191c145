//! Rectangular and striped window partitioning, cyclic shifts and padding.

use alloc::format;
use alloc::vec::Vec;

use crate::{Error, Real, Result, Shape, Tensor};

/// Window geometry plus the cyclic offset a shifted layer rolls by.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct WindowSpec {
    pub h: usize,
    pub w: usize,
    pub shift_y: usize,
    pub shift_x: usize,
}

impl WindowSpec {
    /// An `h x w` window whose shifted variant rolls by half a window.
    pub fn new(h: usize, w: usize) -> Result<Self> {
        Self::with_shift(h, w, h / 2, w / 2)
    }

    pub fn with_shift(h: usize, w: usize, shift_y: usize, shift_x: usize) -> Result<Self> {
        if h == 0 || w == 0 {
            return Err(Error::Config(format!("window {h}x{w} must have positive sides")));
        }
        if shift_y >= h || shift_x >= w {
            return Err(Error::Config(format!("shift ({shift_y}, {shift_x}) must be smaller than window {h}x{w}")));
        }
        Ok(WindowSpec { h, w, shift_y, shift_x })
    }

    /// Pixels per window.
    pub fn pixels(&self) -> usize {
        self.h * self.w
    }

    /// The `w x h` orientation with offsets swapped to match.
    pub fn transposed(&self) -> Self {
        WindowSpec { h: self.w, w: self.h, shift_y: self.shift_x, shift_x: self.shift_y }
    }

    pub fn is_square(&self) -> bool {
        self.h == self.w
    }
}

impl core::fmt::Display for WindowSpec {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "({}, {})", self.h, self.w)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PadMode {
    Reflect,
    Replicate,
}

/// How a tensor was padded, enough to crop it back exactly.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PadRecord {
    pub orig_h: usize,
    pub orig_w: usize,
    pub bottom: usize,
    pub right: usize,
    pub mode_y: PadMode,
    pub mode_x: PadMode,
}

impl PadRecord {
    pub fn is_empty(&self) -> bool {
        self.bottom == 0 && self.right == 0
    }

    pub fn padded_h(&self) -> usize {
        self.orig_h + self.bottom
    }

    pub fn padded_w(&self) -> usize {
        self.orig_w + self.right
    }
}

fn pad_mode(pad: usize, dim: usize) -> PadMode {
    if pad < dim {
        PadMode::Reflect
    } else {
        PadMode::Replicate
    }
}

/// Source index for padded position `i` of an axis of length `dim`.
fn source_index(i: usize, dim: usize, mode: PadMode) -> usize {
    if i < dim {
        return i;
    }
    match mode {
        PadMode::Reflect => 2 * (dim - 1) - i,
        PadMode::Replicate => dim - 1,
    }
}

/// Padded extent of `dim` rounded up to a multiple of `m`.
pub fn padded_len(dim: usize, m: usize) -> usize {
    dim.div_ceil(m) * m
}

/// Pads bottom/right so the spatial dims become multiples of `(h, w)`.
///
/// Reflection is used when the pad is shorter than the axis, replication
/// otherwise.
pub fn pad_to_multiple<T: Real>(x: &Tensor<T>, h: usize, w: usize) -> Result<(Tensor<T>, PadRecord)> {
    if h == 0 || w == 0 {
        return Err(Error::Config(format!("pad multiple {h}x{w} must be positive")));
    }
    let s = x.shape();
    let (ph, pw) = (padded_len(s.h, h), padded_len(s.w, w));
    let rec = PadRecord {
        orig_h: s.h,
        orig_w: s.w,
        bottom: ph - s.h,
        right: pw - s.w,
        mode_y: pad_mode(ph - s.h, s.h),
        mode_x: pad_mode(pw - s.w, s.w),
    };
    if rec.is_empty() {
        return Ok((x.clone(), rec));
    }
    if s.h == 0 || s.w == 0 {
        return Err(Error::shape("pad_to_multiple", "cannot pad an empty plane"));
    }
    let cols: Vec<usize> = (0..pw).map(|i| source_index(i, s.w, rec.mode_x)).collect();
    let mut out = Tensor::zeros(Shape::new(s.n, s.c, ph, pw));
    for n in 0..s.n {
        for c in 0..s.c {
            let src = x.plane(n, c);
            let dst = out.plane_mut(n, c);
            for y in 0..ph {
                let sy = source_index(y, s.h, rec.mode_y);
                for (xx, &sx) in cols.iter().enumerate() {
                    dst[y * pw + xx] = src[sy * s.w + sx];
                }
            }
        }
    }
    Ok((out, rec))
}

/// Removes the padding described by `rec`.
pub fn crop<T: Real>(x: &Tensor<T>, rec: &PadRecord) -> Result<Tensor<T>> {
    let s = x.shape();
    if s.h != rec.padded_h() || s.w != rec.padded_w() {
        return Err(Error::shape("crop", format!("tensor {s} does not match pad record {rec:?}")));
    }
    if rec.is_empty() {
        return Ok(x.clone());
    }
    let mut out = Tensor::zeros(Shape::new(s.n, s.c, rec.orig_h, rec.orig_w));
    for n in 0..s.n {
        for c in 0..s.c {
            let src = x.plane(n, c);
            let dst = out.plane_mut(n, c);
            for y in 0..rec.orig_h {
                dst[y * rec.orig_w..(y + 1) * rec.orig_w].copy_from_slice(&src[y * s.w..y * s.w + rec.orig_w]);
            }
        }
    }
    Ok(out)
}

/// Transpose of [`pad_to_multiple`]: folds padded cotangents back onto
/// their source pixels.
pub fn pad_adjoint<T: Real>(dy: &Tensor<T>, rec: &PadRecord) -> Result<Tensor<T>> {
    let s = dy.shape();
    if s.h != rec.padded_h() || s.w != rec.padded_w() {
        return Err(Error::shape("pad_adjoint", format!("tensor {s} does not match pad record {rec:?}")));
    }
    if rec.is_empty() {
        return Ok(dy.clone());
    }
    let (h, w) = (rec.orig_h, rec.orig_w);
    let mut out = Tensor::zeros(Shape::new(s.n, s.c, h, w));
    for n in 0..s.n {
        for c in 0..s.c {
            let src = dy.plane(n, c);
            let dst = out.plane_mut(n, c);
            for y in 0..s.h {
                let sy = source_index(y, h, rec.mode_y);
                for x in 0..s.w {
                    let sx = source_index(x, w, rec.mode_x);
                    dst[sy * w + sx] += src[y * s.w + x];
                }
            }
        }
    }
    Ok(out)
}

/// Non-overlapping windows stacked along the batch axis, in row-major
/// window order per batch item.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowedTensor<T = f32> {
    pub windows: Tensor<T>,
    /// Shape of the tensor that was partitioned.
    pub origin: Shape,
    pub spec: WindowSpec,
}

impl<T: Real> WindowedTensor<T> {
    pub fn windows_per_item(&self) -> usize {
        (self.origin.h / self.spec.h) * (self.origin.w / self.spec.w)
    }
}

pub fn partition<T: Real>(x: &Tensor<T>, spec: WindowSpec) -> Result<WindowedTensor<T>> {
    let s = x.shape();
    if !s.h.is_multiple_of(spec.h) || !s.w.is_multiple_of(spec.w) {
        return Err(Error::shape(
            "partition",
            format!("spatial {}x{} is not a multiple of window {spec}", s.h, s.w),
        ));
    }
    let (nh, nw) = (s.h / spec.h, s.w / spec.w);
    let win_plane = spec.pixels();
    let mut data = Vec::with_capacity(s.numel());
    for n in 0..s.n {
        for i in 0..nh {
            for j in 0..nw {
                for c in 0..s.c {
                    let src = x.plane(n, c);
                    for y in 0..spec.h {
                        let row = (i * spec.h + y) * s.w + j * spec.w;
                        data.extend_from_slice(&src[row..row + spec.w]);
                    }
                }
            }
        }
    }
    debug_assert_eq!(data.len(), s.n * nh * nw * s.c * win_plane);
    let windows = Tensor::from_vec(Shape::new(s.n * nh * nw, s.c, spec.h, spec.w), data)?;
    Ok(WindowedTensor { windows, origin: s, spec })
}

/// Exact inverse of [`partition`].
pub fn reverse<T: Real>(wt: &WindowedTensor<T>) -> Result<Tensor<T>> {
    let s = wt.origin;
    let spec = wt.spec;
    let ws = wt.windows.shape();
    if !s.h.is_multiple_of(spec.h) || !s.w.is_multiple_of(spec.w) {
        return Err(Error::shape("reverse", format!("origin {s} is not a multiple of window {spec}")));
    }
    let (nh, nw) = (s.h / spec.h, s.w / spec.w);
    if ws != Shape::new(s.n * nh * nw, s.c, spec.h, spec.w) {
        return Err(Error::shape("reverse", format!("windows {ws} inconsistent with origin {s} and window {spec}")));
    }
    let mut out = Tensor::zeros(s);
    for n in 0..s.n {
        for i in 0..nh {
            for j in 0..nw {
                let widx = (n * nh + i) * nw + j;
                for c in 0..s.c {
                    let src = wt.windows.plane(widx, c);
                    let dst = out.plane_mut(n, c);
                    for y in 0..spec.h {
                        let row = (i * spec.h + y) * s.w + j * spec.w;
                        dst[row..row + spec.w].copy_from_slice(&src[y * spec.w..(y + 1) * spec.w]);
                    }
                }
            }
        }
    }
    Ok(out)
}

fn roll<T: Real>(x: &Tensor<T>, dy: usize, dx: usize, forward: bool) -> Tensor<T> {
    let s = x.shape();
    if s.h == 0 || s.w == 0 {
        return x.clone();
    }
    let (dy, dx) = (dy % s.h, dx % s.w);
    if dy == 0 && dx == 0 {
        return x.clone();
    }
    // forward: out[y][x] = in[(y + dy) % h][(x + dx) % w]
    let (oy, ox) = if forward { (dy, dx) } else { (s.h - dy, s.w - dx) };
    let mut out = Tensor::zeros(s);
    for n in 0..s.n {
        for c in 0..s.c {
            let src = x.plane(n, c);
            let dst = out.plane_mut(n, c);
            for y in 0..s.h {
                let sy = (y + oy) % s.h;
                let srow = &src[sy * s.w..(sy + 1) * s.w];
                let drow = &mut dst[y * s.w..(y + 1) * s.w];
                let split = s.w - (ox % s.w);
                drow[..split].copy_from_slice(&srow[ox % s.w..]);
                drow[split..].copy_from_slice(&srow[..ox % s.w]);
            }
        }
    }
    out
}

/// Torus roll by `(-dy, -dx)`: the pixel at `(dy, dx)` moves to the origin.
pub fn cyclic_shift<T: Real>(x: &Tensor<T>, dy: usize, dx: usize) -> Tensor<T> {
    roll(x, dy, dx, true)
}

/// Undoes [`cyclic_shift`] with the same offsets.
pub fn inverse_shift<T: Real>(x: &Tensor<T>, dy: usize, dx: usize) -> Tensor<T> {
    roll(x, dy, dx, false)
}
