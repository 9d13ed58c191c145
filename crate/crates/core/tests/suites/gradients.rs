#![allow(dead_code)]

//! Finite-difference checks shared by the core tests and the acceptance
//! harness. Each case returns the worst relative error it saw.

use eswt_core::gradcheck::{grad_check_with, DifferentiableOp, GradCheckOptions};
use eswt_core::model::{EswtModel, Etl, EtlOp, ModelConfig, ModelOp};
use eswt_core::ops::diff::{BatchNormOp, Conv2dOp, MatmulOp, PixelShuffleOp, ShiftConvOp, SoftmaxOp, SwishOp};
use eswt_core::ops::BnMode;
use eswt_core::window::WindowSpec;
use eswt_core::{rng, Shape, Tensor};
use rand::Rng;

pub const PRIMITIVE_TOL: f64 = 1e-6;
pub const COMPOSITE_TOL: f64 = 1e-4;
const SEEDS: u64 = 10;

fn random(s: Shape, seed: u64, name: &str) -> Tensor<f64> {
    let mut r = rng::stream(seed, name);
    Tensor::from_fn(s, |_, _, _, _| r.random_range(-1.0..1.0))
}

fn over_seeds(op: &dyn DifferentiableOp<f64>, make: impl Fn(u64) -> Vec<Tensor<f64>>) -> f64 {
    (0..SEEDS)
        .map(|seed| {
            let opts = GradCheckOptions { seed, ..Default::default() };
            grad_check_with(op, &make(seed), PRIMITIVE_TOL, &opts).unwrap().max_rel_error()
        })
        .fold(0.0, f64::max)
}

pub fn conv_1x1() -> f64 {
    over_seeds(&Conv2dOp, |s| {
        vec![random(Shape::new(1, 4, 3, 3), s, "x"), random(Shape::new(4, 4, 1, 1), s, "w"), random(Shape::vector(4), s, "b")]
    })
}

pub fn conv_3x3() -> f64 {
    over_seeds(&Conv2dOp, |s| {
        vec![random(Shape::new(2, 3, 4, 5), s, "x"), random(Shape::new(2, 3, 3, 3), s, "w"), random(Shape::vector(2), s, "b")]
    })
}

pub fn batchnorm() -> f64 {
    let train = BatchNormOp { mode: BnMode::Train, mean: vec![0.0; 3], var: vec![1.0; 3], eps: 1e-5 };
    let infer = BatchNormOp { mode: BnMode::Infer, mean: vec![0.1, -0.3, 0.2], var: vec![0.5, 1.5, 2.0], eps: 1e-5 };
    [&train, &infer]
        .into_iter()
        .map(|op| {
            over_seeds(op, |s| {
                vec![random(Shape::new(2, 3, 3, 2), s, "x"), random(Shape::vector(3), s, "g"), random(Shape::vector(3), s, "b")]
            })
        })
        .fold(0.0, f64::max)
}

pub fn softmax() -> f64 {
    let a = over_seeds(&SoftmaxOp, |s| vec![random(Shape::new(1, 1, 1, 8), s, "x").scale(3.0)]);
    a.max(over_seeds(&SoftmaxOp, |s| vec![random(Shape::new(2, 2, 3, 5), s, "x")]))
}

pub fn swish() -> f64 {
    over_seeds(&SwishOp, |s| vec![random(Shape::new(1, 3, 4, 4), s, "x").scale(4.0)])
}

pub fn pixel_shuffle() -> f64 {
    let a = over_seeds(&PixelShuffleOp(2), |s| vec![random(Shape::new(1, 8, 2, 3), s, "x")]);
    a.max(over_seeds(&PixelShuffleOp(3), |s| vec![random(Shape::new(1, 9, 2, 2), s, "x")]))
}

pub fn shift_conv() -> f64 {
    over_seeds(&ShiftConvOp, |s| {
        vec![random(Shape::new(1, 10, 4, 4), s, "x"), random(Shape::new(6, 10, 1, 1), s, "w"), random(Shape::vector(6), s, "b")]
    })
}

pub fn matmul() -> f64 {
    over_seeds(&MatmulOp, |s| vec![random(Shape::new(3, 1, 4, 5), s, "a"), random(Shape::new(3, 1, 5, 2), s, "b")])
}

pub fn primitives() -> Vec<(&'static str, f64)> {
    vec![
        ("conv 1x1", conv_1x1()),
        ("conv 3x3", conv_3x3()),
        ("batch norm", batchnorm()),
        ("softmax", softmax()),
        ("swish", swish()),
        ("pixel shuffle", pixel_shuffle()),
        ("shift conv", shift_conv()),
        ("matmul", matmul()),
    ]
}

fn etl(seed: u64, spec: WindowSpec, shifted: bool, mode: BnMode) -> f64 {
    let cfg = ModelConfig::tiny();
    let layer = Etl::<f64>::init(&cfg, &mut rng::stream(seed, "etl.init")).unwrap();
    let op = EtlOp { layer, spec, shifted, mode };
    let inputs = op.inputs(random(Shape::new(1, 10, 4, 4), seed, "x"));
    grad_check_with(&op, &inputs, COMPOSITE_TOL, &GradCheckOptions { seed, ..Default::default() }).unwrap().max_rel_error()
}

pub fn etl_plain_and_shifted() -> f64 {
    let spec = WindowSpec::new(2, 2).unwrap();
    let mut worst = etl(9, spec, true, BnMode::Infer);
    for seed in 0..3 {
        for shifted in [false, true] {
            worst = worst.max(etl(seed, spec, shifted, BnMode::Train));
        }
    }
    worst
}

/// A 4x4 map under a (3, 1) stripe, which needs reflect padding in both
/// halves.
pub fn etl_padded_stripe() -> f64 {
    etl(4, WindowSpec::new(3, 1).unwrap(), true, BnMode::Train)
}

pub fn full_tiny_model() -> f64 {
    let model = EswtModel::<f64>::init(ModelConfig::tiny(), 21).unwrap();
    let op = ModelOp { model, mode: BnMode::Train };
    let x = random(Shape::new(1, 3, 4, 4), 3, "x").map(|v| 0.5 + 0.5 * v);
    let inputs = op.inputs(x);
    grad_check_with(&op, &inputs, COMPOSITE_TOL, &GradCheckOptions::default()).unwrap().max_rel_error()
}

pub fn composites() -> Vec<(&'static str, f64)> {
    vec![
        ("ETL", etl_plain_and_shifted()),
        ("ETL padded stripe", etl_padded_stripe()),
        ("tiny ESWT", full_tiny_model()),
    ]
}
