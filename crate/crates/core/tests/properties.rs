use eswt_core::metrics::{psnr, ssim};
use eswt_core::ops::{conv2d, fold_bn, matmul, pixel_shuffle, shift_conv, softmax, BnMode, BnState, MacCounter};
use eswt_core::train::data::rot90;
use eswt_core::train::{FlexibleSchedule, StageSpec};
use eswt_core::window::{crop, cyclic_shift, inverse_shift, pad_to_multiple, partition, reverse, WindowSpec};
use eswt_core::{ops, Shape, Tensor};
use proptest::prelude::*;

fn tensor(s: Shape, seed: u64) -> Tensor<f64> {
    let mut r = eswt_core::rng::stream(seed, "prop");
    use rand::Rng;
    Tensor::from_fn(s, |_, _, _, _| r.random_range(-1.0..1.0))
}

fn close(a: &Tensor<f64>, b: &Tensor<f64>, tol: f64) -> bool {
    a.max_abs_diff(b).unwrap() <= tol
}

fn window_case() -> impl Strategy<Value = (Shape, WindowSpec, bool)> {
    // striped windows in both orientations, including h >> w and w >> h
    (1usize..=8, 1usize..=8, 1usize..=2, 1usize..=3, 1usize..=3, 1usize..=3, any::<bool>()).prop_map(
        |(h, w, n, c, ry, rx, shifted)| (Shape::new(n, c, h * ry, w * rx), WindowSpec::new(h, w).unwrap(), shifted),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn partition_reverse_is_exact((s, spec, shifted) in window_case(), seed in any::<u64>()) {
        let x = tensor(s, seed);
        let x = if shifted { cyclic_shift(&x, spec.shift_y, spec.shift_x) } else { x };
        let wt = partition(&x, spec).unwrap();
        prop_assert_eq!(wt.windows.shape(), Shape::new(s.n * (s.h / spec.h) * (s.w / spec.w), s.c, spec.h, spec.w));
        prop_assert_eq!(reverse(&wt).unwrap(), x);
    }

    #[test]
    fn cyclic_shift_round_trips_and_permutes((s, spec, _) in window_case(), seed in any::<u64>()) {
        let x = tensor(s, seed);
        let y = cyclic_shift(&x, spec.shift_y % s.h, spec.shift_x % s.w);
        prop_assert_eq!(&inverse_shift(&y, spec.shift_y % s.h, spec.shift_x % s.w), &x);
        let sorted = |t: &Tensor<f64>| { let mut v = t.data().to_vec(); v.sort_by(f64::total_cmp); v };
        prop_assert_eq!(sorted(&x), sorted(&y));
    }

    #[test]
    fn pad_then_crop_is_identity(h in 1usize..=12, w in 1usize..=12, mh in 1usize..=9, mw in 1usize..=9, seed in any::<u64>()) {
        let x = tensor(Shape::new(1, 2, h, w), seed);
        let (p, rec) = pad_to_multiple(&x, mh, mw).unwrap();
        prop_assert_eq!(p.shape().h % mh, 0);
        prop_assert_eq!(p.shape().w % mw, 0);
        prop_assert_eq!(crop(&p, &rec).unwrap(), x);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn linear_ops_are_linear(seed in any::<u64>(), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let s = Shape::new(1, 10, 4, 5);
        let (x, y) = (tensor(s, seed), tensor(s, seed ^ 1));
        let mix = x.scale(a).add(&y.scale(b)).unwrap();
        let check = |f: &dyn Fn(&Tensor<f64>) -> Tensor<f64>| {
            close(&f(&mix), &f(&x).scale(a).add(&f(&y).scale(b)).unwrap(), 1e-5)
        };
        let w3 = tensor(Shape::new(6, 10, 3, 3), seed ^ 2);
        let w1 = tensor(Shape::new(6, 10, 1, 1), seed ^ 3);
        let rhs = tensor(Shape::new(1, 1, 5, 3), seed ^ 4);
        prop_assert!(check(&|t| conv2d(t, &w3, None).unwrap()));
        prop_assert!(check(&|t| shift_conv(t, &w1, None, &MacCounter::new()).unwrap()));
        prop_assert!(check(&|t| pixel_shuffle(&t.narrow_channels(0, 8).unwrap(), 2).unwrap()));
        prop_assert!(check(&|t| matmul(&t.narrow_channels(0, 1).unwrap(), &rhs).unwrap()));
    }

    #[test]
    fn softmax_rows_are_distributions(seed in any::<u64>(), shift in -50.0f64..50.0, spread in 0.1f64..20.0) {
        let x = tensor(Shape::new(2, 3, 4, 7), seed).scale(spread);
        let y = softmax(&x);
        for row in y.data().chunks(7) {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
        prop_assert!(close(&softmax(&x.map(|v| v + shift)), &y, 1e-6));
    }

    #[test]
    fn schedule_is_monotone_with_exact_endpoints(total in 8usize..400) {
        let specs = StageSpec::desk();
        let sched = FlexibleSchedule::new(total, &specs).unwrap();
        for st in sched.stages() {
            let spec = st.spec;
            prop_assert_eq!(sched.at(st.start).unwrap().lr, spec.lr_start);
            if st.len() > 1 {
                prop_assert_eq!(sched.at(st.end - 1).unwrap().lr, spec.lr_end);
            }
            for i in st.start + 1..st.end {
                prop_assert!(sched.at(i).unwrap().lr <= sched.at(i - 1).unwrap().lr);
                prop_assert_eq!(sched.at(i).unwrap().window, spec.window);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn folded_conv_equals_conv_then_batchnorm(seed in any::<u64>(), k in prop_oneof![Just(1usize), Just(3usize)]) {
        let w = tensor(Shape::new(4, 3, k, k), seed);
        let bias = tensor(Shape::vector(4), seed ^ 5).into_vec();
        let gamma = tensor(Shape::vector(4), seed ^ 6).into_vec();
        let beta = tensor(Shape::vector(4), seed ^ 7).into_vec();
        let mean = tensor(Shape::vector(4), seed ^ 8).into_vec();
        let var: Vec<f64> = tensor(Shape::vector(4), seed ^ 9).data().iter().map(|v| v.abs() + 0.05).collect();
        let x = tensor(Shape::new(2, 3, 5, 4), seed ^ 10);
        let eps = 1e-5;
        let (mut rm, mut rv) = (mean.clone(), var.clone());
        let state = BnState { running_mean: &mut rm, running_var: &mut rv, momentum: 0.9, eps };
        let reference = ops::batchnorm(&conv2d(&x, &w, Some(&bias)).unwrap(), &gamma, &beta, state, BnMode::Infer).unwrap().0;
        let (fw, fb) = fold_bn(&w, &bias, &gamma, &beta, &mean, &var, eps).unwrap();
        prop_assert!(close(&conv2d(&x, &fw, Some(&fb)).unwrap(), &reference, 1e-5));
    }
}

#[test]
fn metrics_ignore_quarter_turns() {
    for seed in 0..5 {
        let a = tensor(Shape::new(1, 1, 24, 20), seed).map(|v| 128.0 + 60.0 * v);
        let b = a.zip_map(&tensor(Shape::new(1, 1, 24, 20), seed + 50), |x, n| x + 8.0 * n).unwrap();
        let (ra, rb) = (rot90(&a), rot90(&b));
        assert!((psnr(&a, &b, 2).unwrap() - psnr(&ra, &rb, 2).unwrap()).abs() < 1e-9);
        assert!((ssim(&a, &b).unwrap() - ssim(&ra, &rb).unwrap()).abs() < 1e-6);
    }
}
