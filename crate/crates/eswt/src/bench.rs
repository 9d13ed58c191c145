//! Wall-clock measurements and the window-cost grid.

use std::fmt::Write as _;
use std::time::Instant;

use eswt_core::attention::{complexity_shift, complexity_strip, Arrangement, BwsaParams, ProjectionLayout, ScalePlacement};
use eswt_core::model::EswtModel;
use eswt_core::nn::Ctx;
use eswt_core::profile::{instrumented_shift, instrumented_strip, Latency};
use eswt_core::window::WindowSpec;
use eswt_core::{rng, Shape, Tensor};

use crate::error::{Error, Result};

/// Runs `f` once untimed, then `trials` timed times.
pub fn time_trials(trials: usize, mut f: impl FnMut() -> Result<()>) -> Result<Latency> {
    f()?;
    let mut samples = Vec::with_capacity(trials);
    for _ in 0..trials.max(1) {
        let t = Instant::now();
        f()?;
        samples.push(t.elapsed().as_secs_f64());
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = if samples.len() > 1 { samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    Ok(Latency { mean_s: mean, stddev_s: var.sqrt(), trials: samples.len() })
}

/// Inference latency of `model` on one `h x w` input.
pub fn model_latency(model: &EswtModel<f32>, h: usize, w: usize, trials: usize) -> Result<Latency> {
    let x = Tensor::full(Shape::new(1, model.config.c_in, h, w), 0.5f32);
    time_trials(trials, || model.infer(&x).map(|_| ()).map_err(Error::from))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Grid {
    pub channels: Vec<usize>,
    pub sizes: Vec<usize>,
    pub windows: Vec<(usize, usize)>,
}

impl Grid {
    /// Parses `C=8,16;HW=16,32;win=4x4,8x2`. Every window area must be a
    /// perfect square so the striped window has a `k x k` counterpart.
    pub fn parse(spec: &str) -> Result<Self> {
        let usage = |d: String| Error::Usage(format!("bad --grid {spec:?}: {d}"));
        let (mut channels, mut sizes, mut windows) = (None, None, None);
        for part in spec.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, vals) = part.split_once('=').ok_or_else(|| usage(format!("{part:?} lacks '='")))?;
            let nums = |v: &str| v.trim().parse::<usize>().ok().filter(|&n| n > 0).ok_or_else(|| usage(format!("{v:?} is not a positive integer")));
            match key.trim() {
                "C" => channels = Some(vals.split(',').map(nums).collect::<Result<Vec<_>>>()?),
                "HW" => sizes = Some(vals.split(',').map(nums).collect::<Result<Vec<_>>>()?),
                "win" => {
                    let mut list = Vec::new();
                    for v in vals.split(',') {
                        let (h, w) = v.split_once('x').ok_or_else(|| usage(format!("window {v:?} is not HxW")))?;
                        let (h, w) = (nums(h)?, nums(w)?);
                        let k = (h * w).isqrt();
                        if k * k != h * w {
                            return Err(usage(format!("window {h}x{w} has no square counterpart")));
                        }
                        list.push((h, w));
                    }
                    windows = Some(list);
                }
                other => return Err(usage(format!("unknown key {other:?}"))),
            }
        }
        let grid = Grid {
            channels: channels.ok_or_else(|| usage("missing C".into()))?,
            sizes: sizes.ok_or_else(|| usage("missing HW".into()))?,
            windows: windows.ok_or_else(|| usage("missing win".into()))?,
        };
        if let Some(c) = grid.channels.iter().find(|c| *c % 2 == 1) {
            return Err(usage(format!("C={c} is odd")));
        }
        Ok(grid)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BenchRow {
    pub c: usize,
    pub hw: usize,
    pub win: (usize, usize),
    pub k: usize,
    pub omega_shift: u64,
    pub omega_strip: u64,
    pub instr_shift: u64,
    pub instr_strip: u64,
    pub shift_ms: f64,
    pub strip_ms: f64,
}

/// Analytic and executed cost of a shifted square-window pair against one
/// striped attention of the same window area, at every grid point.
pub fn bench_window(grid: &Grid, trials: usize) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for &c in &grid.channels {
        for &hw in &grid.sizes {
            for &(h, w) in &grid.windows {
                let k = (h * w).isqrt();
                let mut r = rng::stream(0, "bench.attention");
                let shared = BwsaParams::<f32>::init(c, ProjectionLayout::Shared, ScalePlacement::PreSoftmax, &mut r)?;
                let per_half = BwsaParams::<f32>::init(c, ProjectionLayout::PerHalf, ScalePlacement::PreSoftmax, &mut r)?;
                let x = Tensor::full(Shape::new(1, c, hw, hw), 0.25f32);
                let (square, strip) = (WindowSpec::new(k, k)?, WindowSpec::new(h, w)?);
                let shift = time_trials(trials, || {
                    let ctx = Ctx::infer();
                    let (y, _) = shared.forward(&x, square, false, Arrangement::Full, &ctx)?;
                    shared.forward(&y, square, true, Arrangement::Full, &ctx)?;
                    Ok(())
                })?;
                let striped = time_trials(trials, || {
                    per_half.forward(&x, strip, false, Arrangement::Striped, &Ctx::infer())?;
                    Ok(())
                })?;
                let (cu, hu) = (c as u64, hw as u64);
                rows.push(BenchRow {
                    c,
                    hw,
                    win: (h, w),
                    k,
                    omega_shift: complexity_shift(cu, hu, hu, k as u64),
                    omega_strip: complexity_strip(cu, hu, hu, h as u64, w as u64),
                    instr_shift: instrumented_shift(c, hw, hw, k)?,
                    instr_strip: instrumented_strip(c, hw, hw, h, w)?,
                    shift_ms: shift.mean_s * 1e3,
                    strip_ms: striped.mean_s * 1e3,
                });
            }
        }
    }
    Ok(rows)
}

pub const BENCH_HEADER: &str = "channels,height_px,width_px,window_h_px,window_w_px,square_k_px,omega_shift_macs,omega_strip_macs,instrumented_shift_macs,instrumented_strip_macs,latency_shift_ms,latency_strip_ms";

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut s = String::from(BENCH_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{:.4},{:.4}",
            r.c, r.hw, r.hw, r.win.0, r.win.1, r.k, r.omega_shift, r.omega_strip, r.instr_shift, r.instr_strip, r.shift_ms, r.strip_ms
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        let g = Grid::parse("C=8,16;HW=16,32;win=4x4,8x2").unwrap();
        assert_eq!(g.channels, [8, 16]);
        assert_eq!(g.windows, [(4, 4), (8, 2)]);
        for bad in ["C=8;HW=16", "C=8;HW=16;win=3x2", "C=7;HW=16;win=2x2", "C=8;HW=x;win=2x2", "D=1"] {
            assert!(matches!(Grid::parse(bad), Err(Error::Usage(_))), "{bad}");
        }
    }

    #[test]
    fn striped_rows_are_cheaper_and_counted_exactly() {
        let rows = bench_window(&Grid::parse("C=4,8;HW=8;win=4x1,8x2").unwrap(), 1).unwrap();
        assert_eq!(rows.len(), 4);
        for r in rows {
            assert!(r.omega_strip < r.omega_shift);
            assert_eq!((r.omega_shift, r.omega_strip), (r.instr_shift, r.instr_strip));
        }
    }
}
