//! Parameter and multiply-accumulate accounting.
//!
//! Two independent paths: [`analyze`] derives every layer's cost from the
//! configuration alone, while [`instrumented_macs`] runs the network and
//! tallies what the kernels actually executed. The headline `flops`
//! figure counts MACs of the parameterised layers (convolutions and
//! projections) and reports the attention matrix products separately.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::attention::{Arrangement, BwsaParams, ProjectionLayout, ScalePlacement};
use crate::model::{EswtModel, ModelConfig};
use crate::nn::{Ctx, Module};
use crate::window::{padded_len, WindowSpec};
use crate::{rng, Real, Result, Shape, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LayerKind {
    Conv,
    ShiftConv,
    BatchNorm,
    /// `Q Qᵀ` and the value product inside windows; no parameters.
    AttentionMatmul,
}

impl LayerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LayerKind::Conv => "conv",
            LayerKind::ShiftConv => "shift_conv",
            LayerKind::BatchNorm => "batchnorm",
            LayerKind::AttentionMatmul => "attention_matmul",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerCost {
    pub name: String,
    pub kind: LayerKind,
    pub params: u64,
    pub macs: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Latency {
    pub mean_s: f64,
    pub stddev_s: f64,
    pub trials: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexityReport {
    /// Low-resolution input the MAC counts refer to.
    pub input: Shape,
    pub params: u64,
    /// MACs of parameterised layers.
    pub flops: u64,
    pub attention_macs: u64,
    pub total_macs: u64,
    pub breakdown: Vec<LayerCost>,
    pub latency: Option<Latency>,
    pub peak_alloc: Option<u64>,
}

impl ComplexityReport {
    fn from_breakdown(input: Shape, breakdown: Vec<LayerCost>) -> Self {
        let params = breakdown.iter().map(|l| l.params).sum();
        let attention_macs = breakdown.iter().filter(|l| l.kind == LayerKind::AttentionMatmul).map(|l| l.macs).sum();
        let flops = breakdown.iter().filter(|l| l.kind != LayerKind::AttentionMatmul).map(|l| l.macs).sum();
        ComplexityReport {
            input,
            params,
            flops,
            attention_macs,
            total_macs: flops + attention_macs,
            breakdown,
            latency: None,
            peak_alloc: None,
        }
    }
}

struct Builder {
    out: Vec<LayerCost>,
}

impl Builder {
    fn conv(&mut self, name: String, c_out: usize, c_in: usize, k: usize, pixels: usize) {
        let w = (c_out * c_in * k * k) as u64;
        self.out.push(LayerCost { name, kind: LayerKind::Conv, params: w + c_out as u64, macs: w * pixels as u64 });
    }

    fn shift_conv(&mut self, name: String, c_out: usize, c_in: usize, pixels: usize) {
        let w = (c_out * c_in) as u64;
        self.out.push(LayerCost { name, kind: LayerKind::ShiftConv, params: w + c_out as u64, macs: w * pixels as u64 });
    }

    fn projection(&mut self, name: String, layout: ProjectionLayout, c: usize, pixels: usize) {
        match layout {
            ProjectionLayout::Shared => self.conv(name, c, c, 1, pixels),
            ProjectionLayout::PerHalf => {
                self.conv(format!("{name}.0"), c / 2, c / 2, 1, pixels);
                self.conv(format!("{name}.1"), c / 2, c / 2, 1, pixels);
            }
        }
    }

    fn bn(&mut self, name: String, c: usize) {
        self.out.push(LayerCost { name, kind: LayerKind::BatchNorm, params: 2 * c as u64, macs: 0 });
    }

    fn window_matmul(&mut self, name: String, c: usize, h: usize, w: usize, spec: WindowSpec) {
        let windows = (padded_len(h, spec.h) / spec.h) * (padded_len(w, spec.w) / spec.w);
        let n = spec.pixels() as u64;
        let macs = 2 * windows as u64 * c as u64 * n * n;
        self.out.push(LayerCost { name, kind: LayerKind::AttentionMatmul, params: 0, macs });
    }
}

/// Analytic per-layer parameters and MACs of `config` for a single
/// `h x w` low-resolution input.
pub fn analyze(config: &ModelConfig, h: usize, w: usize) -> Result<ComplexityReport> {
    config.validate()?;
    let (c, px) = (config.channels, h * w);
    let hidden = config.hidden();
    let mut b = Builder { out: Vec::new() };
    b.conv(String::from("sfem"), c, config.c_in, 3, px);
    for i in 0..config.n_blocks {
        for j in 0..config.m_layers {
            let p = format!("blocks.{i}.layers.{j}");
            b.projection(format!("{p}.attn.q"), config.projection, c, px);
            b.projection(format!("{p}.attn.v"), config.projection, c, px);
            b.bn(format!("{p}.attn.bn_q"), c);
            b.bn(format!("{p}.attn.bn_v"), c);
            b.window_matmul(format!("{p}.attn.windows.0"), c / 2, h, w, config.window);
            b.window_matmul(format!("{p}.attn.windows.1"), c / 2, h, w, config.window.transposed());
            b.conv(format!("{p}.attn.tail"), c, c, 1, px);
            b.shift_conv(format!("{p}.mlp_in"), hidden, c, px);
            b.shift_conv(format!("{p}.mlp_out"), c, hidden, px);
        }
        b.conv(format!("blocks.{i}.tail"), c, c, 3, px);
    }
    let s = config.sr_scale;
    b.conv(String::from("srrm.conv"), config.c_in * s * s, c, 3, px);
    b.conv(String::from("srrm.out"), config.c_in, config.c_in, 3, px * s * s);
    Ok(ComplexityReport::from_breakdown(Shape::new(1, config.c_in, h, w), b.out))
}

/// Learnable elements of a model (running statistics excluded).
pub fn count_params<T: Real, M: Module<T> + ?Sized>(model: &M) -> u64 {
    model.param_count() as u64
}

/// The analytic report for `model`'s configuration.
pub fn count_flops<T: Real>(model: &EswtModel<T>, h: usize, w: usize) -> Result<ComplexityReport> {
    analyze(&model.config, h, w)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MacTally {
    pub conv: u64,
    pub matmul: u64,
}

impl MacTally {
    pub fn total(&self) -> u64 {
        self.conv + self.matmul
    }

    fn from_ctx(ctx: &Ctx) -> Self {
        MacTally { conv: ctx.macs.conv(), matmul: ctx.macs.matmul() }
    }
}

/// MACs executed by an inference forward pass on an `h x w` input.
pub fn instrumented_macs<T: Real>(model: &EswtModel<T>, h: usize, w: usize) -> Result<MacTally> {
    let ctx = Ctx::infer();
    let x = Tensor::<T>::zeros(Shape::new(1, model.config.c_in, h, w));
    model.forward(&x, &ctx)?;
    Ok(MacTally::from_ctx(&ctx))
}

fn attention_params(c: usize, layout: ProjectionLayout) -> Result<BwsaParams<f32>> {
    BwsaParams::init(c, layout, ScalePlacement::PreSoftmax, &mut rng::stream(0, "profile.attention"))
}

/// Executed MACs of one full-width attention inside a single `h x w`
/// window with `c` channels.
pub fn instrumented_bwsa(c: usize, h: usize, w: usize) -> Result<u64> {
    let p = attention_params(c, ProjectionLayout::Shared)?;
    let ctx = Ctx::infer();
    p.forward(&Tensor::zeros(Shape::new(1, c, h, w)), WindowSpec::new(h, w)?, false, Arrangement::Full, &ctx)?;
    Ok(ctx.macs.total())
}

/// Executed MACs of a plain then a shifted full-width attention over
/// `k x k` windows of a `c x big_h x big_w` map.
pub fn instrumented_shift(c: usize, big_h: usize, big_w: usize, k: usize) -> Result<u64> {
    let p = attention_params(c, ProjectionLayout::Shared)?;
    let ctx = Ctx::infer();
    let x = Tensor::zeros(Shape::new(1, c, big_h, big_w));
    let spec = WindowSpec::new(k, k)?;
    let (y, _) = p.forward(&x, spec, false, Arrangement::Full, &ctx)?;
    p.forward(&y, spec, true, Arrangement::Full, &ctx)?;
    Ok(ctx.macs.total())
}

/// Executed MACs of one striped attention with per-half projections.
pub fn instrumented_strip(c: usize, big_h: usize, big_w: usize, h: usize, w: usize) -> Result<u64> {
    let p = attention_params(c, ProjectionLayout::PerHalf)?;
    let ctx = Ctx::infer();
    let x = Tensor::zeros(Shape::new(1, c, big_h, big_w));
    p.forward(&x, WindowSpec::new(h, w)?, false, Arrangement::Striped, &ctx)?;
    Ok(ctx.macs.total())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attention::{complexity_bwsa, complexity_shift, complexity_strip};

    #[test]
    fn paper_model_totals() {
        let r = analyze(&ModelConfig::paper_x4(), 256, 256).unwrap();
        assert_eq!(r.params, 589_512);
        let gflops = r.flops as f64 / 1e9;
        assert!((gflops - 38.20).abs() / 38.20 < 0.05, "{gflops}");
        assert_eq!(r.total_macs, r.breakdown.iter().map(|l| l.macs).sum::<u64>());
    }

    #[test]
    fn analytic_matches_executed_on_tiny_models() {
        for (cfg, h, w) in [(ModelConfig::tiny(), 4, 4), (ModelConfig::desk(), 12, 10)] {
            let m = EswtModel::<f32>::init(cfg, 0).unwrap();
            let r = count_flops(&m, h, w).unwrap();
            let t = instrumented_macs(&m, h, w).unwrap();
            assert_eq!((r.flops, r.attention_macs), (t.conv, t.matmul));
            assert_eq!(r.params, count_params(&m));
        }
    }

    #[test]
    fn closed_forms_match_execution() {
        assert_eq!(instrumented_bwsa(4, 2, 3).unwrap(), complexity_bwsa(4, 2, 3));
        assert_eq!(instrumented_shift(4, 8, 8, 2).unwrap(), complexity_shift(4, 8, 8, 2));
        assert_eq!(instrumented_strip(8, 16, 16, 8, 2).unwrap(), complexity_strip(8, 16, 16, 8, 2));
    }
}
