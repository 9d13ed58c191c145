//! The operations behind each subcommand.

use std::path::{Path, PathBuf};

use eswt_core::metrics::{evaluate, EvalRow};
use eswt_core::model::{EswtModel, ModelConfig};
use eswt_core::profile::{analyze, ComplexityReport};
use eswt_core::train::data::{self, Dataset};
use eswt_core::train::{train_loop, LogRow, Observer, Stage, TrainState};
use eswt_core::Tensor;

use crate::alloc_track;
use crate::bench::{bench_csv, bench_window, model_latency, Grid};
use crate::checkpoint;
use crate::config::{Resolved, RunConfig, Source};
use crate::dataset::load_dir;
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::ppm;
use crate::report::{metrics_csv, parse_metrics_csv};

pub const FINAL_CHECKPOINT: &str = "final.ckpt";
pub const METRICS_FILE: &str = "metrics.csv";

pub fn stage_checkpoint_name(stage: usize) -> String {
    format!("stage{}.ckpt", stage + 1)
}

pub fn training_data(cfg: &Resolved) -> Result<Dataset> {
    let d = &cfg.raw.data;
    match d.source {
        Source::Synth => {
            let s = d.synth.expect("validated");
            Ok(data::synth_dataset(s.seed, s.count, s.size))
        }
        Source::Dir => {
            let images = load_dir(d.path.as_deref().expect("validated"))?.into_iter().map(|(_, t)| t).collect();
            Ok(Dataset::new(images)?)
        }
    }
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub log: Vec<LogRow>,
    pub final_checkpoint: PathBuf,
    pub stage_checkpoints: Vec<PathBuf>,
}

struct Recorder<'a> {
    out: &'a Path,
    rows: Vec<LogRow>,
    checkpoints: Vec<PathBuf>,
    log_every: usize,
}

impl Recorder<'_> {
    fn write_metrics(&self) -> Result<()> {
        write_atomic(&self.out.join(METRICS_FILE), metrics_csv(&self.rows).as_bytes())
    }
}

impl Observer for Recorder<'_> {
    fn on_iteration(&mut self, row: &LogRow) -> eswt_core::Result<()> {
        if self.log_every > 0 && row.iter.is_multiple_of(self.log_every) {
            log::info!("iter {} stage {} window {}x{} lr {:.3e} loss {:.5}", row.iter, row.stage + 1, row.window_h, row.window_w, row.lr, row.loss);
        }
        self.rows.push(*row);
        Ok(())
    }

    fn on_stage_end(&mut self, stage: &Stage, model: &EswtModel<f32>, state: &TrainState) -> eswt_core::Result<()> {
        let path = self.out.join(stage_checkpoint_name(stage.index));
        let io = |e: Error| eswt_core::Error::Callback(e.to_string());
        checkpoint::save(&path, model, state.iter, state.adam.t).map_err(io)?;
        self.write_metrics().map_err(io)?;
        log::info!("stage {} done at iteration {}, wrote {}", stage.index + 1, state.iter, path.display());
        self.checkpoints.push(path);
        Ok(())
    }
}

/// Trains under `config_path`, writing checkpoints and the metrics log
/// into `out`. Nothing is written unless the configuration, the data and
/// the resume checkpoint are all valid.
pub fn train(config_path: &Path, out: &Path, resume: Option<&Path>) -> Result<TrainOutcome> {
    let cfg = RunConfig::load(config_path)?;
    let dataset = training_data(&cfg)?;
    let (mut model, mut state) = match resume {
        Some(p) => {
            let ck = checkpoint::load_into(p, &cfg.model)?;
            if ck.iter > cfg.train.total_iters {
                return Err(Error::Usage(format!(
                    "{} was written at iteration {}, past the configured {} iterations",
                    p.display(),
                    ck.iter,
                    cfg.train.total_iters
                )));
            }
            let state = ck.train_state(cfg.train.adam);
            (ck.model, state)
        }
        None => (EswtModel::init(cfg.model, cfg.train.seed)?, TrainState::new(cfg.train.adam)),
    };
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut prior = Vec::new();
    if resume.is_some() {
        if let Ok(text) = std::fs::read_to_string(out.join(METRICS_FILE)) {
            prior = parse_metrics_csv(&text).unwrap_or_default();
            prior.retain(|r| r.iter < state.iter);
        }
    }
    let mut rec = Recorder { out, rows: prior, checkpoints: Vec::new(), log_every: 50 };
    log::info!("training from iteration {} to {}", state.iter, cfg.train.total_iters);
    match train_loop(&mut model, &dataset, &cfg.train, &mut state, &mut rec) {
        Ok(_) => {}
        Err(eswt_core::Error::NonFiniteLoss { iter }) => {
            rec.write_metrics()?;
            let last_checkpoint = rec.checkpoints.last().cloned().or_else(|| resume.map(Path::to_path_buf));
            return Err(Error::Diverged { iter, last_checkpoint });
        }
        Err(e) => return Err(e.into()),
    }
    let final_checkpoint = out.join(FINAL_CHECKPOINT);
    checkpoint::save(&final_checkpoint, &model, state.iter, state.adam.t)?;
    rec.write_metrics()?;
    Ok(TrainOutcome { log: rec.rows, final_checkpoint, stage_checkpoints: rec.checkpoints })
}

fn check_scale(model: &ModelConfig, scale: Option<usize>, ckpt: &Path) -> Result<()> {
    match scale {
        Some(s) if s != model.sr_scale => Err(Error::Usage(format!(
            "{} holds a x{} model but --scale {s} was requested",
            ckpt.display(),
            model.sr_scale
        ))),
        _ => Ok(()),
    }
}

/// Loads a checkpoint for inference with batch norm folded away.
pub fn inference_model(ckpt: &Path, scale: Option<usize>) -> Result<EswtModel<f32>> {
    let model = checkpoint::load(ckpt)?.model;
    check_scale(&model.config, scale, ckpt)?;
    Ok(model.fold_bn()?)
}

/// Upscales one PPM. Any input size works; attention pads internally.
pub fn infer(ckpt: &Path, input: &Path, output: &Path, scale: Option<usize>) -> Result<Tensor<f32>> {
    let model = inference_model(ckpt, scale)?;
    let img = ppm::read(input)?;
    if model.config.c_in != 3 {
        return Err(Error::Usage(format!("model expects {} input channels, PPM has 3", model.config.c_in)));
    }
    let sr = model.infer(&img)?;
    ppm::write(output, &sr)?;
    Ok(sr)
}

pub fn eval(ckpt: &Path, dataset: &Path, scale: Option<usize>, crop: Option<usize>) -> Result<(Vec<String>, Vec<EvalRow>)> {
    let model = inference_model(ckpt, scale)?;
    let (names, images): (Vec<String>, Vec<Tensor<f32>>) = load_dir(dataset)?.into_iter().unzip();
    let rows = evaluate(&model, &images, crop.unwrap_or(model.config.sr_scale))?;
    Ok((names, rows))
}

/// A named model preset, or a run configuration file.
pub fn resolve_model(target: &str) -> Result<ModelConfig> {
    Ok(match target {
        "paper-x2" => ModelConfig::paper(2),
        "paper-x3" => ModelConfig::paper(3),
        "paper-x4" | "paper" => ModelConfig::paper_x4(),
        "desk" => ModelConfig::desk(),
        "tiny" => ModelConfig::tiny(),
        path => RunConfig::load(Path::new(path))?.model,
    })
}

/// Parses `CxHxW`.
pub fn parse_input_size(s: &str) -> Result<(usize, usize, usize)> {
    let dims: Vec<usize> = s.split('x').map(|d| d.trim().parse::<usize>().ok().filter(|&n| n > 0)).collect::<Option<_>>().unwrap_or_default();
    match dims[..] {
        [c, h, w] => Ok((c, h, w)),
        _ => Err(Error::Usage(format!("--input-size {s:?} is not CxHxW with positive sides"))),
    }
}

pub fn profile(target: &str, input_size: &str, bench_trials: Option<usize>) -> Result<ComplexityReport> {
    let config = resolve_model(target)?;
    let (c, h, w) = parse_input_size(input_size)?;
    if c != config.c_in {
        return Err(Error::Usage(format!("model takes {} channels, --input-size has {c}", config.c_in)));
    }
    let mut report = analyze(&config, h, w)?;
    if let Some(trials) = bench_trials {
        let model = EswtModel::<f32>::init(config, 0)?.fold_bn()?;
        let (latency, peak) = alloc_track::measure(|| model_latency(&model, h, w, trials));
        report.latency = Some(latency?);
        report.peak_alloc = peak;
    }
    Ok(report)
}

pub fn bench(grid: &str, trials: usize) -> Result<String> {
    Ok(bench_csv(&bench_window(&Grid::parse(grid)?, trials)?))
}
