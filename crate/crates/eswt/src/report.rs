//! Text, CSV and JSON renderings of reports.

use std::fmt::Write as _;

use eswt_core::metrics::{psnr_for_log, EvalRow};
use eswt_core::profile::ComplexityReport;
use eswt_core::train::LogRow;
use serde_json::json;

fn human(n: u64) -> String {
    match n {
        n if n >= 1_000_000_000 => format!("{:.2}G", n as f64 / 1e9),
        n if n >= 1_000_000 => format!("{:.2}M", n as f64 / 1e6),
        n if n >= 1_000 => format!("{:.1}K", n as f64 / 1e3),
        n => n.to_string(),
    }
}

pub fn complexity_table(r: &ComplexityReport) -> String {
    let mut s = String::new();
    let i = r.input;
    let width = r.breakdown.iter().map(|l| l.name.len()).max().unwrap_or(5).max(5);
    let _ = writeln!(s, "input           {}x{}x{}", i.c, i.h, i.w);
    let _ = writeln!(s, "params          {} ({})", r.params, human(r.params));
    let _ = writeln!(s, "flops (MACs)    {} ({})", r.flops, human(r.flops));
    let _ = writeln!(s, "attention MACs  {} ({})", r.attention_macs, human(r.attention_macs));
    let _ = writeln!(s, "total MACs      {} ({})", r.total_macs, human(r.total_macs));
    if let Some(l) = r.latency {
        let _ = writeln!(s, "latency         {:.3} ms +- {:.3} ms over {} runs", l.mean_s * 1e3, l.stddev_s * 1e3, l.trials);
    }
    if let Some(p) = r.peak_alloc {
        let _ = writeln!(s, "peak heap       {} bytes ({})", p, human(p));
    }
    let _ = writeln!(s, "\n{:width$}  {:<16} {:>10} {:>14}", "layer", "kind", "params", "macs");
    for l in &r.breakdown {
        let _ = writeln!(s, "{:width$}  {:<16} {:>10} {:>14}", l.name, l.kind.as_str(), l.params, l.macs);
    }
    s
}

/// One row per layer followed by a `total` row.
pub fn complexity_csv(r: &ComplexityReport) -> String {
    let mut s = String::from("layer,kind,params,macs\n");
    for l in &r.breakdown {
        let _ = writeln!(s, "{},{},{},{}", l.name, l.kind.as_str(), l.params, l.macs);
    }
    let _ = writeln!(s, "total,,{},{}", r.params, r.total_macs);
    s
}

pub fn complexity_json(r: &ComplexityReport) -> String {
    let v = json!({
        "input": [r.input.c, r.input.h, r.input.w],
        "params": r.params,
        "flops": r.flops,
        "attention_macs": r.attention_macs,
        "total_macs": r.total_macs,
        "latency": r.latency.map(|l| json!({"mean_s": l.mean_s, "stddev_s": l.stddev_s, "trials": l.trials})),
        "peak_alloc_bytes": r.peak_alloc,
        "breakdown": r.breakdown.iter().map(|l| json!({
            "name": l.name, "kind": l.kind.as_str(), "params": l.params, "macs": l.macs,
        })).collect::<Vec<_>>(),
    });
    serde_json::to_string_pretty(&v).expect("report serialises")
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalMeans {
    pub psnr: f64,
    pub ssim: f64,
    pub bicubic_psnr: f64,
    pub bicubic_ssim: f64,
}

/// Means with infinite PSNR replaced by the sentinel.
pub fn eval_means(rows: &[EvalRow]) -> EvalMeans {
    let n = rows.len().max(1) as f64;
    let mean = |f: &dyn Fn(&EvalRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
    EvalMeans {
        psnr: mean(&|r| psnr_for_log(r.psnr).0),
        ssim: mean(&|r| r.ssim),
        bicubic_psnr: mean(&|r| psnr_for_log(r.bicubic_psnr).0),
        bicubic_ssim: mean(&|r| r.bicubic_ssim),
    }
}

/// Per-image rows and a final `mean` row. `psnr_sentinel` is 1 where a
/// zero-error image was reported as the sentinel value.
pub fn eval_csv(names: &[String], rows: &[EvalRow]) -> String {
    let mut s = String::from("image,psnr_db,ssim,bicubic_psnr_db,bicubic_ssim,psnr_sentinel\n");
    for (name, r) in names.iter().zip(rows) {
        let (p, flag) = psnr_for_log(r.psnr);
        let (bp, bflag) = psnr_for_log(r.bicubic_psnr);
        let _ = writeln!(s, "{name},{p:.4},{:.6},{bp:.4},{:.6},{}", r.ssim, r.bicubic_ssim, u8::from(flag || bflag));
    }
    let m = eval_means(rows);
    let any = rows.iter().any(|r| !r.psnr.is_finite() || !r.bicubic_psnr.is_finite());
    let _ = writeln!(s, "mean,{:.4},{:.6},{:.4},{:.6},{}", m.psnr, m.ssim, m.bicubic_psnr, m.bicubic_ssim, u8::from(any));
    s
}

pub const METRICS_HEADER: &str = "iter,stage,window_h,window_w,lr,loss";

pub fn metrics_csv(rows: &[LogRow]) -> String {
    let mut s = String::from(METRICS_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{:e},{}", r.iter, r.stage, r.window_h, r.window_w, r.lr, r.loss);
    }
    s
}

/// Parses a file written by [`metrics_csv`].
pub fn parse_metrics_csv(text: &str) -> Option<Vec<LogRow>> {
    let mut lines = text.lines();
    if lines.next()? != METRICS_HEADER {
        return None;
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 6 {
                return None;
            }
            Some(LogRow {
                iter: f[0].parse().ok()?,
                stage: f[1].parse().ok()?,
                window_h: f[2].parse().ok()?,
                window_w: f[3].parse().ok()?,
                lr: f[4].parse().ok()?,
                loss: f[5].parse().ok()?,
            })
        })
        .collect()
}
