#[path = "suites/oracle.rs"]
mod oracle;

use eswt_core::attention::{
    complexity_bwsa, complexity_shift, complexity_strip, striped_bwsa, BwsaParams, Projection, ProjectionLayout,
    ScalePlacement,
};
use eswt_core::nn::{Conv2d, Ctx};
use eswt_core::profile::{instrumented_bwsa, instrumented_shift, instrumented_strip};
use eswt_core::window::WindowSpec;
use eswt_core::{rng, Shape, Tensor};
use rand::Rng;

#[test]
fn striped_attention_matches_dense_oracle() {
    let worst = oracle::max_error(50);
    assert!(worst < 1e-5, "max abs error {worst}");
}

#[test]
fn constant_values_pass_through_every_window() {
    // rows of each attention map sum to one, so constant values survive
    let mut r = rng::stream(5, "rows");
    let mut p = BwsaParams::<f32>::init(8, ProjectionLayout::Shared, ScalePlacement::PreSoftmax, &mut r).unwrap();
    if let Projection::Shared(v) = &mut p.v {
        v.weight.value.fill(0.0);
        for (i, b) in v.bias.value.data_mut().iter_mut().enumerate() {
            *b = i as f32 - 3.0;
        }
    }
    p.bn_v = None;
    p.tail = Conv2d::zeros(8, 8, 1);
    for i in 0..8 {
        p.tail.weight.value.set(i, i, 0, 0, 1.0);
    }
    let x = Tensor::from_fn(Shape::new(1, 8, 8, 8), |_, _, _, _| r.random_range(-2.0..2.0));
    for (spec, shifted) in [((4, 2), false), ((4, 2), true), ((8, 1), true)] {
        let y = striped_bwsa(&x, &p, WindowSpec::new(spec.0, spec.1).unwrap(), shifted, &Ctx::infer()).unwrap();
        for c in 0..8 {
            assert!(y.plane(0, c).iter().all(|v| (v - (c as f32 - 3.0)).abs() < 1e-6));
        }
    }
}

#[test]
fn complexity_formulas_equal_executed_macs() {
    let mut points = 0;
    for c in [4usize, 8] {
        for (h, w) in [(2usize, 2usize), (4, 1), (8, 2)] {
            for big in [8usize, 16] {
                let k = (h * w).isqrt();
                assert_eq!(k * k, h * w);
                let (cu, hu, wu, bu) = (c as u64, h as u64, w as u64, big as u64);
                assert_eq!(complexity_bwsa(cu, hu, wu), instrumented_bwsa(c, h, w).unwrap());
                let shift = complexity_shift(cu, bu, bu, k as u64);
                let strip = complexity_strip(cu, bu, bu, hu, wu);
                assert_eq!(shift, instrumented_shift(c, big, big, k).unwrap());
                assert_eq!(strip, instrumented_strip(c, big, big, h, w).unwrap());
                assert!(strip < shift, "C={c} {h}x{w} H=W={big}");
                points += 1;
            }
        }
    }
    assert_eq!(points, 12);
}

#[test]
fn striped_coefficient_is_below_shifted_everywhere() {
    for c in 1..=64u64 {
        for n in 1..=256u64 {
            assert!(2 * c + 2 * n < 6 * c + 4 * n);
        }
    }
}
