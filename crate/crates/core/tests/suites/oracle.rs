#![allow(dead_code)]

//! Brute-force striped attention, shared by the core tests and the
//! acceptance harness.

use eswt_core::attention::{striped_bwsa, BwsaParams, Projection, ProjectionLayout, ScalePlacement};
use eswt_core::nn::{BatchNorm, Conv2d, Ctx};
use eswt_core::window::WindowSpec;
use eswt_core::{rng, Shape, Tensor};
use rand::Rng;

/// Dense `c x h x w` map in f64, indexed `[c][y][x]`.
type Map = Vec<Vec<Vec<f64>>>;

fn to_map(t: &Tensor<f32>) -> Map {
    let s = t.shape();
    (0..s.c).map(|c| (0..s.h).map(|y| (0..s.w).map(|x| t.at(0, c, y, x) as f64).collect()).collect()).collect()
}

fn conv1x1(conv: &Conv2d<f32>, x: &Map, lo: usize) -> Map {
    let w = conv.weight.value.shape();
    let (h, wd) = (x[0].len(), x[0][0].len());
    (0..w.n)
        .map(|o| {
            (0..h)
                .map(|y| {
                    (0..wd)
                        .map(|xx| {
                            let acc: f64 = (0..w.c).map(|i| conv.weight.value.at(o, i, 0, 0) as f64 * x[lo + i][y][xx]).sum();
                            acc + conv.bias.value.data()[o] as f64
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

fn project(p: &Projection<f32>, x: &Map) -> Map {
    match p {
        Projection::Shared(conv) => conv1x1(conv, x, 0),
        Projection::PerHalf([a, b]) => {
            let mut out = conv1x1(a, x, 0);
            out.extend(conv1x1(b, x, a.c_in()));
            out
        }
    }
}

fn bn_infer(bn: &BatchNorm<f32>, x: &mut Map) {
    for (c, plane) in x.iter_mut().enumerate() {
        let scale = bn.gamma.value.data()[c] as f64 / (bn.running_var[c] as f64 + bn.eps as f64).sqrt();
        for v in plane.iter_mut().flatten() {
            *v = (*v - bn.running_mean[c] as f64) * scale + bn.beta.value.data()[c] as f64;
        }
    }
}

/// Brute force: gather each window's pixels by coordinates in the
/// unshifted frame, attend among them, scatter back.
fn attend_half(q: &Map, v: &Map, lo: usize, hi: usize, spec: WindowSpec, shifted: bool, out: &mut Map) {
    let (big_h, big_w) = (q[0].len(), q[0][0].len());
    let (sy, sx) = if shifted { (spec.shift_y, spec.shift_x) } else { (0, 0) };
    let n = spec.h * spec.w;
    for wy in 0..big_h / spec.h {
        for wx in 0..big_w / spec.w {
            let pix: Vec<(usize, usize)> = (0..spec.h)
                .flat_map(|a| (0..spec.w).map(move |b| (a, b)))
                .map(|(a, b)| ((wy * spec.h + a + sy) % big_h, (wx * spec.w + b + sx) % big_w))
                .collect();
            for &(py, px) in &pix {
                let logits: Vec<f64> = pix
                    .iter()
                    .map(|&(ky, kx)| (lo..hi).map(|c| q[c][py][px] * q[c][ky][kx]).sum::<f64>() / (n as f64).sqrt())
                    .collect();
                let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
                let z: f64 = e.iter().sum();
                for c in lo..hi {
                    out[c][py][px] = pix.iter().zip(&e).map(|(&(ky, kx), w)| w / z * v[c][ky][kx]).sum();
                }
            }
        }
    }
}

fn oracle(x: &Tensor<f32>, p: &BwsaParams<f32>, spec: WindowSpec, shifted: bool) -> Map {
    let xm = to_map(x);
    let (mut q, mut v) = (project(&p.q, &xm), project(&p.v, &xm));
    bn_infer(p.bn_q.as_ref().unwrap(), &mut q);
    bn_infer(p.bn_v.as_ref().unwrap(), &mut v);
    let c = q.len();
    let mut blended = q.clone();
    attend_half(&q, &v, 0, c / 2, spec, shifted, &mut blended);
    attend_half(&q, &v, c / 2, c, spec.transposed(), shifted, &mut blended);
    conv1x1(&p.tail, &blended, 0)
}

pub fn randomise_bn(bn: &mut BatchNorm<f32>, r: &mut impl Rng) {
    for c in 0..bn.channels() {
        bn.gamma.value.data_mut()[c] = r.random_range(0.5..1.5);
        bn.beta.value.data_mut()[c] = r.random_range(-0.3..0.3);
        bn.running_mean[c] = r.random_range(-0.2..0.2);
        bn.running_var[c] = r.random_range(0.5..2.0);
    }
}

/// Largest absolute deviation of `striped_bwsa` from the dense oracle
/// over `cases` random configurations with C in {4, 8, 12}.
pub fn max_error(cases: u64) -> f64 {
    let windows = [(2, 2), (4, 1), (1, 4), (4, 2)];
    let mut worst = 0.0f64;
    for case in 0..cases {
        let mut r = rng::indexed_stream(11, "oracle", case);
        let c = [4, 8, 12][r.random_range(0..3)];
        let (h, w) = windows[r.random_range(0..4)];
        let spec = WindowSpec::new(h, w).unwrap();
        // every side a multiple of both orientations
        let (big_h, big_w) = (4 * r.random_range(1..3), 4 * r.random_range(1..3));
        let layout = if case % 3 == 0 { ProjectionLayout::PerHalf } else { ProjectionLayout::Shared };
        let shifted = case % 2 == 1;
        let mut p = BwsaParams::<f32>::init(c, layout, ScalePlacement::PreSoftmax, &mut r).unwrap();
        randomise_bn(p.bn_q.as_mut().unwrap(), &mut r);
        randomise_bn(p.bn_v.as_mut().unwrap(), &mut r);
        let x = Tensor::from_fn(Shape::new(1, c, big_h, big_w), |_, _, _, _| r.random_range(-1.0..1.0));
        let got = striped_bwsa(&x, &p, spec, shifted, &Ctx::infer()).unwrap();
        let want = oracle(&x, &p, spec, shifted);
        for (ci, plane) in want.iter().enumerate() {
            for (y, row) in plane.iter().enumerate() {
                for (xx, v) in row.iter().enumerate() {
                    worst = worst.max((got.at(0, ci, y, xx) as f64 - v).abs());
                }
            }
        }
    }
    worst
}
