use eswt_core::train::data::{cubic, degrade_bicubic, sample_batch, synth_dataset, upsample_bicubic};
use eswt_core::{rng, Shape, Tensor};

/// Weight of input sample `j` for output sample `i`, evaluated over the
/// whole axis with border clamping and renormalisation.
fn dense_weights(in_len: usize, out_len: usize) -> Vec<Vec<f64>> {
    let scale = out_len as f64 / in_len as f64;
    let ks = scale.min(1.0);
    (0..out_len)
        .map(|i| {
            let u = (i as f64 + 0.5) / scale - 0.5;
            let mut row = vec![0.0; in_len];
            for j in -(in_len as isize) * 2..(in_len as isize) * 3 {
                let w = ks * cubic(ks * (u - j as f64));
                row[j.clamp(0, in_len as isize - 1) as usize] += w;
            }
            let z: f64 = row.iter().sum();
            row.iter_mut().for_each(|w| *w /= z);
            row
        })
        .collect()
}

fn dense_resize(x: &Tensor<f64>, oh: usize, ow: usize) -> Tensor<f64> {
    let s = x.shape();
    let (ky, kx) = (dense_weights(s.h, oh), dense_weights(s.w, ow));
    Tensor::from_fn(Shape::new(s.n, s.c, oh, ow), |n, c, y, xx| {
        let mut acc = 0.0;
        for (i, wy) in ky[y].iter().enumerate() {
            for (j, wx) in kx[xx].iter().enumerate() {
                acc += wy * wx * x.at(n, c, i, j);
            }
        }
        acc.clamp(0.0, 1.0)
    })
}

#[test]
fn ramp_matches_dense_oracle_and_stays_linear() {
    let ramp = Tensor::from_fn(Shape::new(1, 1, 12, 24), |_, _, _, x| 0.1 + 0.03 * x as f64);
    for s in [2, 3, 4] {
        let lr = degrade_bicubic(&ramp, s).unwrap();
        assert_eq!((lr.shape().h, lr.shape().w), (12 / s, 24 / s));
        assert!(lr.max_abs_diff(&dense_resize(&ramp, 12 / s, 24 / s)).unwrap() < 1e-5);
        // away from the clamped borders, cubic convolution reproduces lines
        let w = 24 / s;
        for x in 2..w - 2 {
            let u = (x as f64 + 0.5) * s as f64 - 0.5;
            assert!((lr.at(0, 0, 1, x) - (0.1 + 0.03 * u)).abs() < 1e-9, "s={s} x={x}");
        }
    }
}

#[test]
fn random_images_match_dense_oracle_both_ways() {
    let mut r = rng::stream(4, "bicubic");
    use rand::Rng;
    let hr = Tensor::from_fn(Shape::new(1, 3, 12, 18), |_, _, _, _| r.random_range(0.0..1.0));
    let lr = degrade_bicubic(&hr, 3).unwrap();
    assert!(lr.max_abs_diff(&dense_resize(&hr, 4, 6)).unwrap() < 1e-5);
    let up = upsample_bicubic(&lr, 3).unwrap();
    assert!(up.max_abs_diff(&dense_resize(&lr, 12, 18)).unwrap() < 1e-5);
}

#[test]
fn indivisible_sizes_are_rejected() {
    assert!(degrade_bicubic(&Tensor::<f32>::zeros(Shape::new(1, 3, 9, 8)), 2).is_err());
}

#[test]
fn batches_are_paired_and_reproducible() {
    let data = synth_dataset(3, 4, 64);
    let draw = || sample_batch(&data, 3, 12, 2, true, &mut rng::indexed_stream(0, "t", 7)).unwrap();
    let (lr, hr) = draw();
    assert_eq!(lr.shape(), Shape::new(3, 3, 12, 12));
    assert_eq!(hr.shape(), Shape::new(3, 3, 24, 24));
    assert!(lr.max_abs_diff(&degrade_bicubic(&hr, 2).unwrap()).unwrap() < 1e-6);
    assert_eq!(draw(), (lr, hr));
}
