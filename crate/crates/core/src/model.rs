//! The full network: shallow conv, stacked transformer blocks, and the
//! pixel-shuffle reconstruction head.
//!
//! ```text
//! F_s  = sfem(I_LR)
//! F_d  = ETB_n(... ETB_1(F_s))
//! I_SR = srrm(F_s + F_d)
//! ```

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::attention::{Arrangement, BwsaCache, BwsaParams, ProjectionLayout, ScalePlacement};
use crate::gradcheck::DifferentiableOp;
use crate::nn::{self, join, Conv2d, Ctx, Entry, EntryMut, Module, ShiftConv};
use crate::ops::{self, BnMode, SHIFT_GROUPS};
use crate::window::WindowSpec;
use crate::{rng, Error, Real, Result, Shape, Tensor};

/// Which ETLs inside a block use cyclically shifted windows.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum ShiftPattern {
    /// Even layer index plain, odd index shifted.
    #[default]
    Alternate,
    Never,
    Always,
}

impl ShiftPattern {
    pub fn shifted(self, layer: usize) -> bool {
        match self {
            ShiftPattern::Alternate => layer % 2 == 1,
            ShiftPattern::Never => false,
            ShiftPattern::Always => true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelConfig {
    pub c_in: usize,
    pub channels: usize,
    pub n_blocks: usize,
    pub m_layers: usize,
    pub sr_scale: usize,
    pub window: WindowSpec,
    pub mlp_ratio: f64,
    pub shift_pattern: ShiftPattern,
    pub projection: ProjectionLayout,
    pub placement: ScalePlacement,
    /// Add the block input to each block's tail-conv output.
    pub block_residual: bool,
    /// Per-channel offset subtracted from the input and added back to the
    /// output.
    pub rgb_mean: [f64; 3],
}

/// Mean colour of the DIV2K training images.
pub const DIV2K_MEAN: [f64; 3] = [0.4488, 0.4371, 0.4040];

impl ModelConfig {
    /// The published lightweight configuration at scale `s`.
    pub fn paper(sr_scale: usize) -> Self {
        ModelConfig {
            c_in: 3,
            channels: 60,
            n_blocks: 3,
            m_layers: 6,
            sr_scale,
            window: WindowSpec::new(24, 6).expect("valid window"),
            mlp_ratio: 2.0,
            shift_pattern: ShiftPattern::Alternate,
            projection: ProjectionLayout::Shared,
            placement: ScalePlacement::PreSoftmax,
            block_residual: false,
            rgb_mean: DIV2K_MEAN,
        }
    }

    pub fn paper_x4() -> Self {
        Self::paper(4)
    }

    /// Laptop-sized model used for the training smoke runs.
    pub fn desk() -> Self {
        ModelConfig {
            channels: 16,
            n_blocks: 1,
            m_layers: 2,
            sr_scale: 2,
            window: WindowSpec::new(8, 2).expect("valid window"),
            ..Self::paper(2)
        }
    }

    /// Smallest configuration exercised by the gradient checks.
    pub fn tiny() -> Self {
        ModelConfig {
            channels: 10,
            n_blocks: 1,
            m_layers: 1,
            sr_scale: 2,
            window: WindowSpec::new(2, 2).expect("valid window"),
            ..Self::paper(2)
        }
    }

    pub fn with_window(self, window: WindowSpec) -> Self {
        ModelConfig { window, ..self }
    }

    /// Hidden width of the MLP, rounded up to whole shift groups.
    pub fn hidden(&self) -> usize {
        let raw = libm::ceil(self.channels as f64 * self.mlp_ratio) as usize;
        raw.div_ceil(SHIFT_GROUPS) * SHIFT_GROUPS
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.c_in == 0 {
            return bad(String::from("c_in must be at least 1"));
        }
        if self.channels < 2 || !self.channels.is_multiple_of(2) {
            return bad(format!("channels must be even and at least 2, got {}", self.channels));
        }
        if self.n_blocks == 0 || self.m_layers == 0 {
            return bad(format!("need at least one block and one layer, got n={} m={}", self.n_blocks, self.m_layers));
        }
        if self.sr_scale == 0 || self.sr_scale > 8 {
            return bad(format!("sr_scale must be in 1..=8, got {}", self.sr_scale));
        }
        if !(self.mlp_ratio > 0.0) || !self.mlp_ratio.is_finite() {
            return bad(format!("mlp_ratio must be positive, got {}", self.mlp_ratio));
        }
        if self.c_in > 3 && self.rgb_mean.iter().any(|&m| m != 0.0) {
            return bad(format!("a mean offset is only defined for up to 3 channels, got {}", self.c_in));
        }
        Ok(())
    }
}

/// Stops the forward pass at the first layer that produced a NaN or inf.
fn check_finite<T: Real>(t: &Tensor<T>, layer: impl FnOnce() -> String) -> Result<()> {
    if t.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { layer: layer() })
    }
}

/// One transformer layer: striped attention then a shift-conv MLP, each
/// with a residual connection. No layer normalisation.
#[derive(Clone, Debug, PartialEq)]
pub struct Etl<T> {
    pub attn: BwsaParams<T>,
    pub mlp_in: ShiftConv<T>,
    pub mlp_out: ShiftConv<T>,
}

#[derive(Clone, Debug)]
pub struct EtlCache<T> {
    attn: BwsaCache<T>,
    in_shifted: Tensor<T>,
    pre_act: Tensor<T>,
    out_shifted: Tensor<T>,
}

impl<T: Real> Etl<T> {
    pub fn init<R: rand::Rng>(config: &ModelConfig, rng: &mut R) -> Result<Self> {
        let (c, hidden) = (config.channels, config.hidden());
        Ok(Etl {
            attn: BwsaParams::init(c, config.projection, config.placement, rng)?,
            mlp_in: ShiftConv::init_uniform(hidden, c, rng),
            mlp_out: ShiftConv::init_uniform(c, hidden, rng),
        })
    }

    pub fn forward(&self, x: &Tensor<T>, spec: WindowSpec, shifted: bool, ctx: &Ctx) -> Result<(Tensor<T>, Option<EtlCache<T>>)> {
        let (a, attn) = self.attn.forward(x, spec, shifted, Arrangement::Striped, ctx)?;
        let y = x.add(&a)?;
        let (pre_act, in_shifted) = self.mlp_in.forward(&y, &ctx.macs)?;
        let (m, out_shifted) = self.mlp_out.forward(&ops::swish(&pre_act), &ctx.macs)?;
        let out = y.add(&m)?;
        let cache = match attn {
            Some(attn) => Some(EtlCache { attn, in_shifted, pre_act, out_shifted }),
            None => None,
        };
        Ok((out, cache))
    }

    pub fn backward(&mut self, cache: &EtlCache<T>, dout: &Tensor<T>) -> Result<Tensor<T>> {
        let dact = self.mlp_out.backward(&cache.out_shifted, dout)?;
        let dpre = ops::swish_backward(&cache.pre_act, &dact)?;
        let mut dy = self.mlp_in.backward(&cache.in_shifted, &dpre)?;
        dy.add_assign(dout)?;
        let mut dx = self.attn.backward(&cache.attn, &dy)?;
        dx.add_assign(&dy)?;
        Ok(dx)
    }

    pub fn folded(&self) -> Result<Self> {
        Ok(Etl { attn: self.attn.folded()?, ..self.clone() })
    }

    pub fn cast<U: Real>(&self) -> Etl<U> {
        Etl { attn: self.attn.cast(), mlp_in: self.mlp_in.cast(), mlp_out: self.mlp_out.cast() }
    }
}

impl<T: Real> Module<T> for Etl<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, Entry<'_, T>)) {
        self.attn.visit(&join(prefix, "attn"), f);
        self.mlp_in.visit(&join(prefix, "mlp_in"), f);
        self.mlp_out.visit(&join(prefix, "mlp_out"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, EntryMut<'_, T>)) {
        self.attn.visit_mut(&join(prefix, "attn"), f);
        self.mlp_in.visit_mut(&join(prefix, "mlp_in"), f);
        self.mlp_out.visit_mut(&join(prefix, "mlp_out"), f);
    }
}

/// `m` transformer layers followed by a 3x3 convolution.
#[derive(Clone, Debug, PartialEq)]
pub struct Etb<T> {
    pub layers: Vec<Etl<T>>,
    pub tail: Conv2d<T>,
}

#[derive(Clone, Debug)]
pub struct EtbCache<T> {
    layers: Vec<EtlCache<T>>,
    tail_in: Tensor<T>,
}

impl<T: Real> Etb<T> {
    pub fn init<R: rand::Rng>(config: &ModelConfig, rng: &mut R) -> Result<Self> {
        let layers = (0..config.m_layers).map(|_| Etl::init(config, rng)).collect::<Result<Vec<_>>>()?;
        Ok(Etb { layers, tail: Conv2d::init_uniform(config.channels, config.channels, 3, rng) })
    }

    pub fn forward(
        &self,
        x: &Tensor<T>,
        config: &ModelConfig,
        ctx: &Ctx,
        name: &str,
    ) -> Result<(Tensor<T>, Option<EtbCache<T>>)> {
        let mut h = x.clone();
        let mut caches = Vec::new();
        for (j, layer) in self.layers.iter().enumerate() {
            let (out, c) = layer.forward(&h, config.window, config.shift_pattern.shifted(j), ctx)?;
            check_finite(&out, || format!("{name}.layers.{j}"))?;
            caches.extend(c);
            h = out;
        }
        let mut out = self.tail.forward(&h, &ctx.macs)?;
        if config.block_residual {
            out.add_assign(x)?;
        }
        check_finite(&out, || format!("{name}.tail"))?;
        let cache = ctx.record.then_some(EtbCache { layers: caches, tail_in: h });
        Ok((out, cache))
    }

    pub fn backward(&mut self, cache: &EtbCache<T>, dout: &Tensor<T>, block_residual: bool) -> Result<Tensor<T>> {
        let mut d = self.tail.backward(&cache.tail_in, dout)?;
        for (layer, c) in self.layers.iter_mut().zip(&cache.layers).rev() {
            d = layer.backward(c, &d)?;
        }
        if block_residual {
            d.add_assign(dout)?;
        }
        Ok(d)
    }

    pub fn cast<U: Real>(&self) -> Etb<U> {
        Etb { layers: self.layers.iter().map(Etl::cast).collect(), tail: self.tail.cast() }
    }
}

impl<T: Real> Module<T> for Etb<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, Entry<'_, T>)) {
        for (j, l) in self.layers.iter().enumerate() {
            l.visit(&join(prefix, &format!("layers.{j}")), f);
        }
        self.tail.visit(&join(prefix, "tail"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, EntryMut<'_, T>)) {
        for (j, l) in self.layers.iter_mut().enumerate() {
            l.visit_mut(&join(prefix, &format!("layers.{j}")), f);
        }
        self.tail.visit_mut(&join(prefix, "tail"), f);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EswtModel<T = f32> {
    pub config: ModelConfig,
    pub sfem: Conv2d<T>,
    pub blocks: Vec<Etb<T>>,
    /// `C -> c_in·s²` conv ahead of the pixel shuffle.
    pub srrm_conv: Conv2d<T>,
    /// `c_in -> c_in` conv after the pixel shuffle.
    pub srrm_out: Conv2d<T>,
}

#[derive(Clone, Debug)]
pub struct ModelCache<T> {
    input: Tensor<T>,
    blocks: Vec<(Tensor<T>, EtbCache<T>)>,
    merged: Tensor<T>,
    shuffled: Tensor<T>,
}

impl<T: Real> EswtModel<T> {
    /// Deterministic initialisation from `seed`.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut r = rng::stream(seed, "model.init");
        let c = config.channels;
        let sfem = Conv2d::init_uniform(c, config.c_in, 3, &mut r);
        let blocks = (0..config.n_blocks).map(|_| Etb::init(&config, &mut r)).collect::<Result<Vec<_>>>()?;
        let s2 = config.sr_scale * config.sr_scale;
        let srrm_conv = Conv2d::init_uniform(config.c_in * s2, c, 3, &mut r);
        let srrm_out = Conv2d::init_uniform(config.c_in, config.c_in, 3, &mut r);
        Ok(EswtModel { config, sfem, blocks, srrm_conv, srrm_out })
    }

    pub fn window(&self) -> WindowSpec {
        self.config.window
    }

    /// Switches the active window; parameters are untouched.
    pub fn set_window(&mut self, window: WindowSpec) {
        self.config.window = window;
    }

    pub fn forward(&self, x: &Tensor<T>, ctx: &Ctx) -> Result<(Tensor<T>, Option<ModelCache<T>>)> {
        let cfg = &self.config;
        if x.shape().c != cfg.c_in {
            return Err(Error::shape("forward", format!("input has {} channels, model expects {}", x.shape().c, cfg.c_in)));
        }
        let fs = self.sfem.forward(&self.shift_mean(x, -1.0), &ctx.macs)?;
        check_finite(&fs, || String::from("sfem"))?;
        let mut h = fs.clone();
        let mut caches = Vec::new();
        for (i, block) in self.blocks.iter().enumerate() {
            let (out, c) = block.forward(&h, cfg, ctx, &format!("blocks.{i}"))?;
            if let Some(c) = c {
                caches.push((h, c));
            }
            h = out;
        }
        h.add_assign(&fs)?;
        let up = self.srrm_conv.forward(&h, &ctx.macs)?;
        let shuffled = ops::pixel_shuffle(&up, cfg.sr_scale)?;
        let out = self.shift_mean(&self.srrm_out.forward(&shuffled, &ctx.macs)?, 1.0);
        check_finite(&out, || String::from("srrm"))?;
        let cache = ctx.record.then(|| ModelCache { input: x.clone(), blocks: caches, merged: h, shuffled });
        Ok((out, cache))
    }

    /// Inference-mode forward without caches.
    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.forward(x, &Ctx::infer())?.0)
    }

    /// Accumulates all parameter gradients, commits batch statistics of a
    /// training forward and returns the input cotangent.
    pub fn backward(&mut self, cache: &ModelCache<T>, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let residual = self.config.block_residual;
        let d_shuf = self.srrm_out.backward(&cache.shuffled, dy)?;
        let d_up = ops::pixel_unshuffle(&d_shuf, self.config.sr_scale)?;
        let d_merged = self.srrm_conv.backward(&cache.merged, &d_up)?;
        let mut d = d_merged.clone();
        for (block, (_, c)) in self.blocks.iter_mut().zip(&cache.blocks).rev() {
            d = block.backward(c, &d, residual)?;
        }
        d.add_assign(&d_merged)?;
        self.sfem.backward(&self.shift_mean(&cache.input, -1.0), &d)
    }

    fn shift_mean(&self, x: &Tensor<T>, sign: f64) -> Tensor<T> {
        let mean = self.config.rgb_mean;
        if mean.iter().all(|&m| m == 0.0) {
            return x.clone();
        }
        let mut out = x.clone();
        let s = x.shape();
        for n in 0..s.n {
            for (c, &m) in mean.iter().enumerate().take(s.c) {
                let k = T::from_f64(sign * m);
                out.plane_mut(n, c).iter_mut().for_each(|v| *v += k);
            }
        }
        out
    }

    /// Copy with every attention batch norm absorbed into its projection.
    pub fn fold_bn(&self) -> Result<Self> {
        let mut out = self.clone();
        for block in &mut out.blocks {
            for layer in &mut block.layers {
                *layer = layer.folded()?;
            }
        }
        Ok(out)
    }

    pub fn is_folded(&self) -> bool {
        self.blocks.iter().flat_map(|b| &b.layers).all(|l| l.attn.bn_q.is_none() && l.attn.bn_v.is_none())
    }

    pub fn cast<U: Real>(&self) -> EswtModel<U> {
        EswtModel {
            config: self.config,
            sfem: self.sfem.cast(),
            blocks: self.blocks.iter().map(Etb::cast).collect(),
            srrm_conv: self.srrm_conv.cast(),
            srrm_out: self.srrm_out.cast(),
        }
    }

    /// `(name, shape)` of every stored tensor, learnable or not, in visit
    /// order. Buffers are reported as vectors.
    pub fn manifest(&self) -> Vec<(String, Shape)> {
        let mut out = Vec::new();
        self.visit("", &mut |name, e| {
            let shape = match e {
                Entry::Param(p) => p.shape(),
                Entry::Buffer(b) => Shape::vector(b.len()),
            };
            out.push((String::from(name), shape));
        });
        out
    }
}

impl<T: Real> Module<T> for EswtModel<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, Entry<'_, T>)) {
        self.sfem.visit(&join(prefix, "sfem"), f);
        for (i, b) in self.blocks.iter().enumerate() {
            b.visit(&join(prefix, &format!("blocks.{i}")), f);
        }
        self.srrm_conv.visit(&join(prefix, "srrm.conv"), f);
        self.srrm_out.visit(&join(prefix, "srrm.out"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, EntryMut<'_, T>)) {
        self.sfem.visit_mut(&join(prefix, "sfem"), f);
        for (i, b) in self.blocks.iter_mut().enumerate() {
            b.visit_mut(&join(prefix, &format!("blocks.{i}")), f);
        }
        self.srrm_conv.visit_mut(&join(prefix, "srrm.conv"), f);
        self.srrm_out.visit_mut(&join(prefix, "srrm.out"), f);
    }
}

fn ctx_for(mode: BnMode) -> Ctx {
    Ctx { mode, record: true, macs: ops::MacCounter::new() }
}

/// A single ETL as a differentiable map of `[x, params...]`, parameters in
/// visit order.
pub struct EtlOp<T> {
    pub layer: Etl<T>,
    pub spec: WindowSpec,
    pub shifted: bool,
    pub mode: BnMode,
}

impl<T: Real> EtlOp<T> {
    fn loaded(&self, inputs: &[Tensor<T>]) -> Result<Etl<T>> {
        let mut layer = self.layer.clone();
        nn::load_param_values(&mut layer, inputs.get(1..).unwrap_or(&[]))?;
        Ok(layer)
    }

    pub fn inputs(&self, x: Tensor<T>) -> Vec<Tensor<T>> {
        core::iter::once(x).chain(nn::param_values(&self.layer)).collect()
    }
}

impl<T: Real> DifferentiableOp<T> for EtlOp<T> {
    fn forward(&self, inputs: &[Tensor<T>]) -> Result<Tensor<T>> {
        let layer = self.loaded(inputs)?;
        let ctx = Ctx { record: false, ..ctx_for(self.mode) };
        Ok(layer.forward(&inputs[0], self.spec, self.shifted, &ctx)?.0)
    }

    fn vjp(&self, inputs: &[Tensor<T>], _: &Tensor<T>, cot: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        let mut layer = self.loaded(inputs)?;
        let (_, cache) = layer.forward(&inputs[0], self.spec, self.shifted, &ctx_for(self.mode))?;
        layer.zero_grad();
        let dx = layer.backward(&cache.expect("recording"), cot)?;
        Ok(core::iter::once(dx).chain(nn::param_grads(&layer)).collect())
    }
}

/// The whole network as a differentiable map of `[x, params...]`.
pub struct ModelOp<T> {
    pub model: EswtModel<T>,
    pub mode: BnMode,
}

impl<T: Real> ModelOp<T> {
    fn loaded(&self, inputs: &[Tensor<T>]) -> Result<EswtModel<T>> {
        let mut model = self.model.clone();
        nn::load_param_values(&mut model, inputs.get(1..).unwrap_or(&[]))?;
        Ok(model)
    }

    pub fn inputs(&self, x: Tensor<T>) -> Vec<Tensor<T>> {
        core::iter::once(x).chain(nn::param_values(&self.model)).collect()
    }
}

impl<T: Real> DifferentiableOp<T> for ModelOp<T> {
    fn forward(&self, inputs: &[Tensor<T>]) -> Result<Tensor<T>> {
        let model = self.loaded(inputs)?;
        let ctx = Ctx { record: false, ..ctx_for(self.mode) };
        Ok(model.forward(&inputs[0], &ctx)?.0)
    }

    fn vjp(&self, inputs: &[Tensor<T>], _: &Tensor<T>, cot: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        let mut model = self.loaded(inputs)?;
        let (_, cache) = model.forward(&inputs[0], &ctx_for(self.mode))?;
        model.zero_grad();
        let dx = model.backward(&cache.expect("recording"), cot)?;
        Ok(core::iter::once(dx).chain(nn::param_grads(&model)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn input(s: Shape, seed: u64) -> Tensor<f64> {
        let mut r = rng::stream(seed, "x");
        Tensor::from_fn(s, |_, _, _, _| r.random_range(0.0..1.0))
    }

    #[test]
    fn hidden_width_rounds_to_shift_groups() {
        assert_eq!(ModelConfig::paper_x4().hidden(), 120);
        assert_eq!(ModelConfig::desk().hidden(), 35);
        assert_eq!(ModelConfig::tiny().hidden(), 20);
    }

    #[test]
    fn shape_contract() {
        let m = EswtModel::<f64>::init(ModelConfig::desk(), 1).unwrap();
        let y = m.infer(&input(Shape::new(1, 3, 18, 24), 2)).unwrap();
        assert_eq!(y.shape(), Shape::new(1, 3, 36, 48));
        assert!(y.is_finite());
    }

    #[test]
    fn zeroed_branches_make_etl_identity() {
        let cfg = ModelConfig { channels: 10, ..ModelConfig::tiny() };
        let mut r = rng::stream(0, "etl");
        let mut etl = Etl::<f64>::init(&cfg, &mut r).unwrap();
        etl.attn.tail = Conv2d::zeros(10, 10, 1);
        etl.mlp_out.conv = Conv2d::zeros(10, 20, 1);
        let x = input(Shape::new(1, 10, 4, 6), 3);
        let (y, _) = etl.forward(&x, cfg.window, true, &Ctx::train()).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn zero_block_tails_leave_global_skip() {
        let mut m = EswtModel::<f64>::init(ModelConfig { n_blocks: 2, ..ModelConfig::tiny() }, 4).unwrap();
        for b in &mut m.blocks {
            b.tail = Conv2d::zeros(10, 10, 3);
        }
        let x = input(Shape::new(1, 3, 4, 4), 5);
        let y = m.infer(&x).unwrap();
        let macs = ops::MacCounter::new();
        let fs = m.sfem.forward(&m.shift_mean(&x, -1.0), &macs).unwrap();
        let up = ops::pixel_shuffle(&m.srrm_conv.forward(&fs, &macs).unwrap(), 2).unwrap();
        let want = m.shift_mean(&m.srrm_out.forward(&up, &macs).unwrap(), 1.0);
        assert!(y.max_abs_diff(&want).unwrap() < 1e-12);
    }

    #[test]
    fn init_is_deterministic_and_seeded() {
        let a = EswtModel::<f32>::init(ModelConfig::desk(), 7).unwrap();
        let b = EswtModel::<f32>::init(ModelConfig::desk(), 7).unwrap();
        let c = EswtModel::<f32>::init(ModelConfig::desk(), 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn parameter_shapes_ignore_the_window() {
        let base = EswtModel::<f32>::init(ModelConfig::desk(), 1).unwrap().manifest();
        for (h, w) in [(4, 4), (16, 1), (3, 5)] {
            let cfg = ModelConfig::desk().with_window(WindowSpec::new(h, w).unwrap());
            assert_eq!(EswtModel::<f32>::init(cfg, 1).unwrap().manifest(), base);
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for cfg in [
            ModelConfig { channels: 7, ..ModelConfig::desk() },
            ModelConfig { n_blocks: 0, ..ModelConfig::desk() },
            ModelConfig { sr_scale: 0, ..ModelConfig::desk() },
            ModelConfig { mlp_ratio: 0.0, ..ModelConfig::desk() },
        ] {
            assert!(matches!(EswtModel::<f32>::init(cfg, 0), Err(Error::Config(_))));
        }
    }

    #[test]
    fn non_finite_input_names_a_layer() {
        let m = EswtModel::<f32>::init(ModelConfig::tiny(), 0).unwrap();
        let mut x = Tensor::<f32>::zeros(Shape::new(1, 3, 4, 4));
        x.set(0, 0, 1, 1, f32::NAN);
        match m.infer(&x) {
            Err(Error::NonFinite { layer }) => assert_eq!(layer, "sfem"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
