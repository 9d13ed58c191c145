//! BN-embedded window self-attention without a key projection.
//!
//! Queries and values come from 1x1 convolutions followed by batch norm.
//! Inside each window the logits are `Q Qᵀ`, so the attention map is
//! symmetric before normalisation. The striped arrangement splits channels
//! into two halves that attend over `h x w` and `w x h` windows
//! respectively; a shared 1x1 tail convolution blends the halves.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::nn::{join, BatchNorm, Conv2d, Ctx, Entry, EntryMut};
use crate::ops::{gemm_nn, gemm_nt, gemm_tn, softmax_rows_backward, softmax_rows_in_place, BnCache, BnMode, MacCounter};
use crate::window::{self, crop, cyclic_shift, inverse_shift, pad_adjoint, pad_to_multiple, PadRecord, WindowSpec};
use crate::{Error, Real, Result, Shape, Tensor};

/// How the query/value projections see the channel halves.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum ProjectionLayout {
    /// One `C -> C` projection each for Q and V; its output channels are
    /// then split between the halves. Every half sees all input channels.
    #[default]
    Shared,
    /// Independent `C/2 -> C/2` projections per half.
    PerHalf,
}

/// Where the temperature enters the attention.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum ScalePlacement {
    /// `softmax(Q Qᵀ / scale) V`: rows stay normalised.
    #[default]
    PreSoftmax,
    /// `softmax(Q Qᵀ) / scale · V`, the formula read literally.
    Literal,
}

/// Channel grouping for window attention.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Arrangement {
    /// Two halves over `h x w` and `w x h` windows.
    Striped,
    /// All channels over one window geometry.
    Full,
}

type Projected<T> = (Tensor<T>, Tensor<T>, Option<BnCache<T>>, Option<BnCache<T>>);

#[derive(Clone, Debug, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Projection<T> {
    Shared(Conv2d<T>),
    PerHalf([Conv2d<T>; 2]),
}

impl<T: Real> Projection<T> {
    pub fn init<R: Rng>(layout: ProjectionLayout, c: usize, rng: &mut R) -> Self {
        match layout {
            ProjectionLayout::Shared => Projection::Shared(Conv2d::init_uniform(c, c, 1, rng)),
            ProjectionLayout::PerHalf => {
                let a = Conv2d::init_uniform(c / 2, c / 2, 1, rng);
                let b = Conv2d::init_uniform(c / 2, c / 2, 1, rng);
                Projection::PerHalf([a, b])
            }
        }
    }

    pub fn layout(&self) -> ProjectionLayout {
        match self {
            Projection::Shared(_) => ProjectionLayout::Shared,
            Projection::PerHalf(_) => ProjectionLayout::PerHalf,
        }
    }

    pub fn channels(&self) -> usize {
        match self {
            Projection::Shared(c) => c.c_out(),
            Projection::PerHalf([a, b]) => a.c_out() + b.c_out(),
        }
    }

    pub fn forward(&self, x: &Tensor<T>, macs: &MacCounter) -> Result<Tensor<T>> {
        match self {
            Projection::Shared(conv) => conv.forward(x, macs),
            Projection::PerHalf([a, b]) => {
                let half = a.c_in();
                let lo = a.forward(&x.narrow_channels(0, half)?, macs)?;
                let hi = b.forward(&x.narrow_channels(half, x.shape().c)?, macs)?;
                Tensor::concat_channels(&[&lo, &hi])
            }
        }
    }

    pub fn backward(&mut self, x: &Tensor<T>, dy: &Tensor<T>) -> Result<Tensor<T>> {
        match self {
            Projection::Shared(conv) => conv.backward(x, dy),
            Projection::PerHalf([a, b]) => {
                let (half, c) = (a.c_in(), x.shape().c);
                let out_half = a.c_out();
                let dlo = a.backward(&x.narrow_channels(0, half)?, &dy.narrow_channels(0, out_half)?)?;
                let dhi = b.backward(&x.narrow_channels(half, c)?, &dy.narrow_channels(out_half, dy.shape().c)?)?;
                Tensor::concat_channels(&[&dlo, &dhi])
            }
        }
    }

    /// Absorbs `bn` (over all output channels) into the projection.
    pub fn fold(&self, bn: &BatchNorm<T>) -> Result<Self> {
        Ok(match self {
            Projection::Shared(conv) => Projection::Shared(bn.fold_into(conv)?),
            Projection::PerHalf([a, b]) => {
                let h = a.c_out();
                Projection::PerHalf([bn.slice(0, h)?.fold_into(a)?, bn.slice(h, bn.channels())?.fold_into(b)?])
            }
        })
    }

    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, Entry<'_, T>)) {
        match self {
            Projection::Shared(c) => c.visit(prefix, f),
            Projection::PerHalf([a, b]) => {
                a.visit(&join(prefix, "0"), f);
                b.visit(&join(prefix, "1"), f);
            }
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, EntryMut<'_, T>)) {
        match self {
            Projection::Shared(c) => c.visit_mut(prefix, f),
            Projection::PerHalf([a, b]) => {
                a.visit_mut(&join(prefix, "0"), f);
                b.visit_mut(&join(prefix, "1"), f);
            }
        }
    }

    pub fn cast<U: Real>(&self) -> Projection<U> {
        match self {
            Projection::Shared(c) => Projection::Shared(c.cast()),
            Projection::PerHalf([a, b]) => Projection::PerHalf([a.cast(), b.cast()]),
        }
    }
}

/// Learnable state of one BN-embedded window self-attention.
///
/// `bn_q`/`bn_v` are `None` once folded into the projections.
#[derive(Clone, Debug, PartialEq)]
pub struct BwsaParams<T> {
    pub q: Projection<T>,
    pub v: Projection<T>,
    pub bn_q: Option<BatchNorm<T>>,
    pub bn_v: Option<BatchNorm<T>>,
    pub tail: Conv2d<T>,
    pub placement: ScalePlacement,
}

/// Intermediate values of one channel group, for backward.
#[derive(Clone, Debug)]
struct GroupCache<T> {
    spec: WindowSpec,
    shifted: bool,
    pad: PadRecord,
    padded: Shape,
    q_windows: Tensor<T>,
    v_windows: Tensor<T>,
    /// Normalised attention per window, `N x N` each.
    attn: Vec<T>,
}

#[derive(Clone, Debug)]
pub struct BwsaCache<T> {
    x: Tensor<T>,
    q_bn: Option<BnCache<T>>,
    v_bn: Option<BnCache<T>>,
    groups: Vec<(usize, usize, GroupCache<T>)>,
    blended: Tensor<T>,
}

/// The temperature for windows of `n` pixels.
pub fn default_scale(n: usize) -> f64 {
    libm::sqrt(n as f64)
}

fn groups_for(c: usize, spec: WindowSpec, arrangement: Arrangement) -> Result<Vec<(usize, usize, WindowSpec)>> {
    match arrangement {
        Arrangement::Full => Ok(vec![(0, c, spec)]),
        Arrangement::Striped => {
            if !c.is_multiple_of(2) {
                return Err(Error::Config(format!("striped attention needs an even channel count, got {c}")));
            }
            Ok(vec![(0, c / 2, spec), (c / 2, c, spec.transposed())])
        }
    }
}

/// Attention inside stacked windows of shape `(m, c, h, w)` given already
/// projected queries and values. Returns outputs and, if requested, the
/// attention maps.
fn attend_windows<T: Real>(
    qw: &Tensor<T>,
    vw: &Tensor<T>,
    placement: ScalePlacement,
    keep_attn: bool,
    macs: &MacCounter,
) -> (Tensor<T>, Vec<T>) {
    let s = qw.shape();
    let (c, n) = (s.c, s.plane());
    let scale = T::from_f64(default_scale(n));
    let inv = T::one() / scale;
    let mut out = Tensor::zeros(s);
    let mut kept = if keep_attn { Vec::with_capacity(s.n * n * n) } else { Vec::new() };
    let mut logits = vec![T::zero(); n * n];
    for b in 0..s.n {
        let q = &qw.data()[b * c * n..(b + 1) * c * n];
        let v = &vw.data()[b * c * n..(b + 1) * c * n];
        logits.iter_mut().for_each(|x| *x = T::zero());
        gemm_tn(q, q, &mut logits, n, c, n);
        if placement == ScalePlacement::PreSoftmax {
            logits.iter_mut().for_each(|x| *x *= inv);
        }
        softmax_rows_in_place(&mut logits, n);
        if placement == ScalePlacement::Literal {
            logits.iter_mut().for_each(|x| *x *= inv);
        }
        gemm_nt(v, &logits, &mut out.data_mut()[b * c * n..(b + 1) * c * n], c, n, n);
        if keep_attn {
            kept.extend_from_slice(&logits);
        }
    }
    macs.add_matmul((2 * s.n * c * n * n) as u64);
    (out, kept)
}

fn group_forward<T: Real>(
    q: &Tensor<T>,
    v: &Tensor<T>,
    spec: WindowSpec,
    shifted: bool,
    placement: ScalePlacement,
    ctx: &Ctx,
) -> Result<(Tensor<T>, Option<GroupCache<T>>)> {
    let (qp, pad) = pad_to_multiple(q, spec.h, spec.w)?;
    let (vp, _) = pad_to_multiple(v, spec.h, spec.w)?;
    let (qp, vp) = if shifted {
        (cyclic_shift(&qp, spec.shift_y, spec.shift_x), cyclic_shift(&vp, spec.shift_y, spec.shift_x))
    } else {
        (qp, vp)
    };
    let padded = qp.shape();
    let qw = window::partition(&qp, spec)?;
    let vw = window::partition(&vp, spec)?;
    let (ow, attn) = attend_windows(&qw.windows, &vw.windows, placement, ctx.record, &ctx.macs);
    let out = window::reverse(&window::WindowedTensor { windows: ow, origin: padded, spec })?;
    let out = if shifted { inverse_shift(&out, spec.shift_y, spec.shift_x) } else { out };
    let out = crop(&out, &pad)?;
    let cache = ctx.record.then_some(GroupCache {
        spec,
        shifted,
        pad,
        padded,
        q_windows: qw.windows,
        v_windows: vw.windows,
        attn,
    });
    Ok((out, cache))
}

/// Zero-extends a cropped cotangent back to the padded extent.
fn uncrop<T: Real>(dy: &Tensor<T>, rec: &PadRecord) -> Tensor<T> {
    if rec.is_empty() {
        return dy.clone();
    }
    let s = dy.shape();
    let (ph, pw) = (rec.padded_h(), rec.padded_w());
    let mut out = Tensor::zeros(Shape::new(s.n, s.c, ph, pw));
    for n in 0..s.n {
        for c in 0..s.c {
            let src = dy.plane(n, c);
            let dst = out.plane_mut(n, c);
            for y in 0..s.h {
                dst[y * pw..y * pw + s.w].copy_from_slice(&src[y * s.w..(y + 1) * s.w]);
            }
        }
    }
    out
}

fn group_backward<T: Real>(
    cache: &GroupCache<T>,
    dy: &Tensor<T>,
    placement: ScalePlacement,
) -> Result<(Tensor<T>, Tensor<T>)> {
    let spec = cache.spec;
    let d = uncrop(dy, &cache.pad);
    let d = if cache.shifted { cyclic_shift(&d, spec.shift_y, spec.shift_x) } else { d };
    let dw = window::partition(&d, spec)?.windows;
    let s = dw.shape();
    let (c, n) = (s.c, s.plane());
    let inv = T::one() / T::from_f64(default_scale(n));
    let mut dq = Tensor::zeros(s);
    let mut dv = Tensor::zeros(s);
    let mut da = vec![T::zero(); n * n];
    let mut sym = vec![T::zero(); n * n];
    for b in 0..s.n {
        let range = b * c * n..(b + 1) * c * n;
        let a = &cache.attn[b * n * n..(b + 1) * n * n];
        let g = &dw.data()[range.clone()];
        let q = &cache.q_windows.data()[range.clone()];
        let v = &cache.v_windows.data()[range.clone()];
        // out = V Aᵀ, so dV = dO A and dA = dOᵀ V
        gemm_nn(g, a, &mut dv.data_mut()[range.clone()], c, n, n);
        da.iter_mut().for_each(|x| *x = T::zero());
        gemm_tn(g, v, &mut da, n, c, n);
        match placement {
            ScalePlacement::PreSoftmax => {
                softmax_rows_backward(a, &mut da, n);
                da.iter_mut().for_each(|x| *x *= inv);
            }
            ScalePlacement::Literal => {
                // `a` holds softmax / scale
                let probs: Vec<T> = a.iter().map(|&x| x / inv).collect();
                da.iter_mut().for_each(|x| *x *= inv);
                softmax_rows_backward(&probs, &mut da, n);
            }
        }
        for i in 0..n {
            for j in 0..n {
                sym[i * n + j] = da[i * n + j] + da[j * n + i];
            }
        }
        gemm_nn(q, &sym, &mut dq.data_mut()[range], c, n, n);
    }
    let back = |t: Tensor<T>| -> Result<Tensor<T>> {
        let full = window::reverse(&window::WindowedTensor { windows: t, origin: cache.padded, spec })?;
        let full = if cache.shifted { inverse_shift(&full, spec.shift_y, spec.shift_x) } else { full };
        pad_adjoint(&full, &cache.pad)
    };
    Ok((back(dq)?, back(dv)?))
}

impl<T: Real> BwsaParams<T> {
    pub fn init<R: Rng>(c: usize, layout: ProjectionLayout, placement: ScalePlacement, rng: &mut R) -> Result<Self> {
        if !c.is_multiple_of(2) {
            return Err(Error::Config(format!("attention channels must be even, got {c}")));
        }
        Ok(BwsaParams {
            q: Projection::init(layout, c, rng),
            v: Projection::init(layout, c, rng),
            bn_q: Some(BatchNorm::new(c)),
            bn_v: Some(BatchNorm::new(c)),
            tail: Conv2d::init_uniform(c, c, 1, rng),
            placement,
        })
    }

    pub fn channels(&self) -> usize {
        self.tail.c_out()
    }

    /// Projected and normalised queries and values over the whole map.
    fn project(&self, x: &Tensor<T>, ctx: &Ctx) -> Result<Projected<T>> {
        let qf = self.q.forward(x, &ctx.macs)?;
        let vf = self.v.forward(x, &ctx.macs)?;
        let (q, qc) = match &self.bn_q {
            Some(bn) => {
                let (y, c) = bn.forward(&qf, ctx.mode)?;
                (y, Some(c))
            }
            None => (qf, None),
        };
        let (v, vc) = match &self.bn_v {
            Some(bn) => {
                let (y, c) = bn.forward(&vf, ctx.mode)?;
                (y, Some(c))
            }
            None => (vf, None),
        };
        Ok((q, v, qc, vc))
    }

    pub fn forward(
        &self,
        x: &Tensor<T>,
        spec: WindowSpec,
        shifted: bool,
        arrangement: Arrangement,
        ctx: &Ctx,
    ) -> Result<(Tensor<T>, Option<BwsaCache<T>>)> {
        let c = x.shape().c;
        if c != self.channels() {
            return Err(Error::shape("bwsa", format!("input has {c} channels, attention expects {}", self.channels())));
        }
        let groups = groups_for(c, spec, arrangement)?;
        let (q, v, q_bn, v_bn) = self.project(x, ctx)?;
        let mut outs = Vec::with_capacity(groups.len());
        let mut caches = Vec::with_capacity(groups.len());
        for &(lo, hi, gspec) in &groups {
            let (o, gc) = group_forward(
                &q.narrow_channels(lo, hi)?,
                &v.narrow_channels(lo, hi)?,
                gspec,
                shifted,
                self.placement,
                ctx,
            )?;
            outs.push(o);
            if let Some(gc) = gc {
                caches.push((lo, hi, gc));
            }
        }
        let refs: Vec<&Tensor<T>> = outs.iter().collect();
        let blended = Tensor::concat_channels(&refs)?;
        let y = self.tail.forward(&blended, &ctx.macs)?;
        let cache = ctx.record.then(|| BwsaCache { x: x.clone(), q_bn, v_bn, groups: caches, blended });
        Ok((y, cache))
    }

    pub fn backward(&mut self, cache: &BwsaCache<T>, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let d_blend = self.tail.backward(&cache.blended, dy)?;
        let mut dq_parts = Vec::new();
        let mut dv_parts = Vec::new();
        for (lo, hi, gc) in &cache.groups {
            let (dq, dv) = group_backward(gc, &d_blend.narrow_channels(*lo, *hi)?, self.placement)?;
            dq_parts.push(dq);
            dv_parts.push(dv);
        }
        let mut dq = Tensor::concat_channels(&dq_parts.iter().collect::<Vec<_>>())?;
        let mut dv = Tensor::concat_channels(&dv_parts.iter().collect::<Vec<_>>())?;
        if let (Some(bn), Some(c)) = (&mut self.bn_q, &cache.q_bn) {
            dq = bn.backward(c, &dq)?;
        }
        if let (Some(bn), Some(c)) = (&mut self.bn_v, &cache.v_bn) {
            dv = bn.backward(c, &dv)?;
        }
        let mut dx = self.q.backward(&cache.x, &dq)?;
        dx.add_assign(&self.v.backward(&cache.x, &dv)?)?;
        Ok(dx)
    }

    /// Copy with both batch norms absorbed into the projections.
    pub fn folded(&self) -> Result<Self> {
        let mut out = self.clone();
        if let Some(bn) = out.bn_q.take() {
            out.q = out.q.fold(&bn)?;
        }
        if let Some(bn) = out.bn_v.take() {
            out.v = out.v.fold(&bn)?;
        }
        Ok(out)
    }

    pub fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, Entry<'_, T>)) {
        self.q.visit(&join(prefix, "q"), f);
        self.v.visit(&join(prefix, "v"), f);
        if let Some(bn) = &self.bn_q {
            bn.visit(&join(prefix, "bn_q"), f);
        }
        if let Some(bn) = &self.bn_v {
            bn.visit(&join(prefix, "bn_v"), f);
        }
        self.tail.visit(&join(prefix, "tail"), f);
    }

    pub fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, EntryMut<'_, T>)) {
        self.q.visit_mut(&join(prefix, "q"), f);
        self.v.visit_mut(&join(prefix, "v"), f);
        if let Some(bn) = &mut self.bn_q {
            bn.visit_mut(&join(prefix, "bn_q"), f);
        }
        if let Some(bn) = &mut self.bn_v {
            bn.visit_mut(&join(prefix, "bn_v"), f);
        }
        self.tail.visit_mut(&join(prefix, "tail"), f);
    }

    pub fn cast<U: Real>(&self) -> BwsaParams<U> {
        BwsaParams {
            q: self.q.cast(),
            v: self.v.cast(),
            bn_q: self.bn_q.as_ref().map(BatchNorm::cast),
            bn_v: self.bn_v.as_ref().map(BatchNorm::cast),
            tail: self.tail.cast(),
            placement: self.placement,
        }
    }
}

/// Striped attention: halves over `spec` and its transpose, blended by the
/// shared tail convolution. Shifted layers roll each half by its own
/// window offsets.
pub fn striped_bwsa<T: Real>(
    x: &Tensor<T>,
    params: &BwsaParams<T>,
    spec: WindowSpec,
    shifted: bool,
    ctx: &Ctx,
) -> Result<Tensor<T>> {
    Ok(params.forward(x, spec, shifted, Arrangement::Striped, ctx)?.0)
}

/// Attention inside each window of `win` (shape `(m, c, h, w)`), with the
/// query/value projections applied per window and batch norm in
/// inference mode. The tail convolution is left to the caller.
pub fn bwsa_window<T: Real>(
    win: &Tensor<T>,
    q: (&Conv2d<T>, Option<&BatchNorm<T>>),
    v: (&Conv2d<T>, Option<&BatchNorm<T>>),
    placement: ScalePlacement,
    macs: &MacCounter,
) -> Result<Tensor<T>> {
    let project = |(conv, bn): (&Conv2d<T>, Option<&BatchNorm<T>>)| -> Result<Tensor<T>> {
        let y = conv.forward(win, macs)?;
        match bn {
            None => Ok(y),
            Some(bn) => Ok(bn.forward(&y, BnMode::Infer)?.0),
        }
    };
    let qy = project(q)?;
    let vy = project(v)?;
    if qy.shape() != vy.shape() {
        return Err(Error::shape("bwsa_window", format!("queries {} and values {} differ", qy.shape(), vy.shape())));
    }
    Ok(attend_windows(&qy, &vy, placement, false, macs).0)
}

/// Operation count of attention in one `h x w` window with `c` channels:
/// two projections, the tail and the two `N x N` products.
pub fn complexity_bwsa(c: u64, h: u64, w: u64) -> u64 {
    3 * c * c * h * w + 2 * c * (h * w) * (h * w)
}

/// Two successive full-channel attentions over `k x k` windows (plain then
/// shifted), on a `C x H x W` map.
pub fn complexity_shift(c: u64, h: u64, w: u64, k: u64) -> u64 {
    (6 * c + 4 * k * k) * c * h * w
}

/// Striped attention with per-half projections and a shared tail.
pub fn complexity_strip(c: u64, big_h: u64, big_w: u64, h: u64, w: u64) -> u64 {
    (2 * c + 2 * h * w) * c * big_h * big_w
}

/// Striped attention with shared `C -> C` query and value projections.
pub fn complexity_strip_shared(c: u64, big_h: u64, big_w: u64, h: u64, w: u64) -> u64 {
    (3 * c + 2 * h * w) * c * big_h * big_w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn params(c: usize, layout: ProjectionLayout) -> BwsaParams<f64> {
        let mut r = rng::stream(11, "attn");
        BwsaParams::init(c, layout, ScalePlacement::PreSoftmax, &mut r).unwrap()
    }

    fn input(s: Shape, seed: u64) -> Tensor<f64> {
        let mut r = rng::stream(seed, "x");
        Tensor::from_fn(s, |_, _, _, _| r.random_range(-1.0..1.0))
    }

    #[test]
    fn single_pixel_window_returns_values() {
        let p = params(4, ProjectionLayout::Shared);
        let Projection::Shared(qc) = &p.q else { unreachable!() };
        let Projection::Shared(vc) = &p.v else { unreachable!() };
        let win = input(Shape::new(3, 4, 1, 1), 1);
        let out = bwsa_window(&win, (qc, None), (vc, None), ScalePlacement::PreSoftmax, &MacCounter::new()).unwrap();
        let v = vc.forward(&win, &MacCounter::new()).unwrap();
        assert!(out.max_abs_diff(&v).unwrap() < 1e-12);
    }

    #[test]
    fn zero_queries_average_values() {
        let p = params(4, ProjectionLayout::Shared);
        let Projection::Shared(vc) = &p.v else { unreachable!() };
        let zero_q = Conv2d::<f64>::zeros(4, 4, 1);
        let win = input(Shape::new(2, 4, 2, 3), 2);
        let out = bwsa_window(&win, (&zero_q, None), (vc, None), ScalePlacement::PreSoftmax, &MacCounter::new()).unwrap();
        let v = vc.forward(&win, &MacCounter::new()).unwrap();
        for b in 0..2 {
            for c in 0..4 {
                let mean = v.plane(b, c).iter().sum::<f64>() / 6.0;
                assert!(out.plane(b, c).iter().all(|&o| (o - mean).abs() < 1e-12));
            }
        }
    }

    #[test]
    fn shape_contract_and_odd_channels() {
        let p = params(6, ProjectionLayout::PerHalf);
        let x = input(Shape::new(2, 6, 6, 5), 3);
        let spec = WindowSpec::new(3, 1).unwrap();
        for shifted in [false, true] {
            let y = striped_bwsa(&x, &p, spec, shifted, &Ctx::infer()).unwrap();
            assert_eq!(y.shape(), x.shape());
            assert!(y.is_finite());
        }
        let mut r = rng::stream(0, "odd");
        assert!(BwsaParams::<f64>::init(5, ProjectionLayout::Shared, ScalePlacement::PreSoftmax, &mut r).is_err());
    }

    #[test]
    fn folding_preserves_inference() {
        let mut p = params(8, ProjectionLayout::PerHalf);
        let x = input(Shape::new(1, 8, 4, 4), 4);
        // move running stats away from identity
        let (y, cache) = p.forward(&x, WindowSpec::new(2, 2).unwrap(), false, Arrangement::Striped, &Ctx::train()).unwrap();
        p.backward(&cache.unwrap(), &y).unwrap();
        assert!(p.bn_q.as_ref().unwrap().running_mean.iter().any(|&m| m != 0.0));
        let want = striped_bwsa(&x, &p, WindowSpec::new(2, 2).unwrap(), true, &Ctx::infer()).unwrap();
        let f = p.folded().unwrap();
        assert!(f.bn_q.is_none());
        let got = striped_bwsa(&x, &f, WindowSpec::new(2, 2).unwrap(), true, &Ctx::infer()).unwrap();
        assert!(got.max_abs_diff(&want).unwrap() < 1e-12);
    }

    #[test]
    fn closed_forms() {
        assert_eq!(complexity_bwsa(2, 1, 4), 112);
        assert_eq!(complexity_bwsa(1, 1, 1), 5);
        assert_eq!(complexity_shift(60, 72, 72, 12), 291_133_440);
        assert_eq!(complexity_shift(1, 1, 1, 1), 10);
        assert_eq!(complexity_strip(60, 72, 72, 24, 6), 126_904_320);
    }
}
