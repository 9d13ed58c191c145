use super::{conv2d_backward, conv2d_counted, ConvGrads, MacCounter};
use crate::{Error, Real, Result, Tensor};

/// Number of channel groups in a shift convolution: up, down, left, right
/// and an unshifted group. Channels beyond `5 * (c / 5)` stay unshifted.
pub const SHIFT_GROUPS: usize = 5;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Dir {
    Up,
    Down,
    Left,
    Right,
    Still,
}

impl Dir {
    fn of_channel(c: usize, channels: usize) -> Dir {
        let g = channels / SHIFT_GROUPS;
        if g == 0 {
            return Dir::Still;
        }
        match c / g {
            0 => Dir::Up,
            1 => Dir::Down,
            2 => Dir::Left,
            3 => Dir::Right,
            _ => Dir::Still,
        }
    }

    fn opposite(self) -> Dir {
        match self {
            Dir::Up => Dir::Down,
            Dir::Down => Dir::Up,
            Dir::Left => Dir::Right,
            Dir::Right => Dir::Left,
            Dir::Still => Dir::Still,
        }
    }
}

/// Moves plane content one pixel in `dir`, zero filling the vacated edge.
fn shift_plane<T: Real>(src: &[T], dst: &mut [T], h: usize, w: usize, dir: Dir) {
    dst.iter_mut().for_each(|v| *v = T::zero());
    match dir {
        Dir::Still => dst.copy_from_slice(src),
        Dir::Up if h > 1 => dst[..(h - 1) * w].copy_from_slice(&src[w..]),
        Dir::Down if h > 1 => dst[w..].copy_from_slice(&src[..(h - 1) * w]),
        Dir::Left if w > 1 => {
            for y in 0..h {
                dst[y * w..y * w + w - 1].copy_from_slice(&src[y * w + 1..(y + 1) * w]);
            }
        }
        Dir::Right if w > 1 => {
            for y in 0..h {
                dst[y * w + 1..(y + 1) * w].copy_from_slice(&src[y * w..(y + 1) * w - 1]);
            }
        }
        _ => {}
    }
}

fn apply<T: Real>(x: &Tensor<T>, adjoint: bool) -> Tensor<T> {
    let s = x.shape();
    let mut out = Tensor::zeros(s);
    for n in 0..s.n {
        for c in 0..s.c {
            let dir = Dir::of_channel(c, s.c);
            let dir = if adjoint { dir.opposite() } else { dir };
            let src = x.plane(n, c).to_vec();
            shift_plane(&src, out.plane_mut(n, c), s.h, s.w, dir);
        }
    }
    out
}

/// Five-way one-pixel channel-group shift.
pub fn shift5<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    apply(x, false)
}

/// Transpose of [`shift5`].
pub fn shift5_adjoint<T: Real>(dy: &Tensor<T>) -> Tensor<T> {
    apply(dy, true)
}

/// [`shift5`] followed by a 1x1 convolution.
pub fn shift_conv<T: Real>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&[T]>,
    macs: &MacCounter,
) -> Result<Tensor<T>> {
    if weight.shape().h != 1 || weight.shape().w != 1 {
        return Err(Error::shape("shift_conv", "shift convolution weights must be 1x1"));
    }
    conv2d_counted(&shift5(x), weight, bias, macs)
}

/// Gradients of [`shift_conv`]; `shifted` is `shift5(x)` from the forward.
pub fn shift_conv_backward<T: Real>(
    shifted: &Tensor<T>,
    weight: &Tensor<T>,
    dy: &Tensor<T>,
) -> Result<ConvGrads<T>> {
    let mut g = conv2d_backward(shifted, weight, dy)?;
    g.dx = shift5_adjoint(&g.dx);
    Ok(g)
}
