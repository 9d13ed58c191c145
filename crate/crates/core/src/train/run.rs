use alloc::format;
use alloc::vec::Vec;

use super::data::{sample_batch, Dataset};
use super::{l1_loss, Adam, AdamConfig, FlexibleSchedule, Stage, StageSpec};
use crate::model::EswtModel;
use crate::nn::{Ctx, Module};
use crate::{rng, Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub total_iters: usize,
    pub batch_size: usize,
    /// Side of the low-resolution training patches.
    pub lr_patch: usize,
    pub sr_scale: usize,
    pub stages: Vec<StageSpec>,
    pub adam: AdamConfig,
    pub seed: u64,
    pub augment: bool,
    /// Clear Adam moments when a new stage begins.
    pub reset_adam_each_stage: bool,
}

impl TrainConfig {
    /// 500 iterations of batch 8 on 24-pixel patches at x2, three stages.
    pub fn desk() -> Self {
        TrainConfig {
            total_iters: 500,
            batch_size: 8,
            lr_patch: 24,
            sr_scale: 2,
            stages: StageSpec::desk(),
            adam: AdamConfig::default(),
            seed: 0,
            augment: true,
            reset_adam_each_stage: false,
        }
    }

    pub fn schedule(&self) -> Result<FlexibleSchedule> {
        FlexibleSchedule::new(self.total_iters, &self.stages)
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.lr_patch == 0 || self.sr_scale == 0 {
            return Err(Error::Config(format!(
                "batch_size, lr_patch and sr_scale must be positive, got {}, {}, {}",
                self.batch_size, self.lr_patch, self.sr_scale
            )));
        }
        self.adam.validate()?;
        self.schedule().map(|_| ())
    }
}

/// Progress that a checkpoint must carry to resume bit-exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    /// Next iteration to run.
    pub iter: usize,
    pub adam: Adam,
}

impl TrainState {
    pub fn new(adam: AdamConfig) -> Self {
        TrainState { iter: 0, adam: Adam::new(adam) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogRow {
    pub iter: usize,
    pub stage: usize,
    pub window_h: usize,
    pub window_w: usize,
    pub lr: f64,
    pub loss: f64,
}

pub trait Observer {
    fn on_iteration(&mut self, _row: &LogRow) -> Result<()> {
        Ok(())
    }

    /// Called after the last iteration of `stage`; `state.iter` is the
    /// first iteration of the next one.
    fn on_stage_end(&mut self, _stage: &Stage, _model: &EswtModel<f32>, _state: &TrainState) -> Result<()> {
        Ok(())
    }
}

pub struct NullObserver;

impl Observer for NullObserver {}

/// Runs iterations `state.iter..total_iters`. Each iteration draws its
/// batch from a stream keyed by the iteration index, so a resumed run
/// replays exactly the batches an uninterrupted one would have seen.
pub fn train_loop(
    model: &mut EswtModel<f32>,
    data: &Dataset,
    config: &TrainConfig,
    state: &mut TrainState,
    observer: &mut dyn Observer,
) -> Result<Vec<LogRow>> {
    config.validate()?;
    if model.config.sr_scale != config.sr_scale {
        return Err(Error::Config(format!(
            "model is x{} but training is configured for x{}",
            model.config.sr_scale, config.sr_scale
        )));
    }
    let schedule = config.schedule()?;
    let mut log = Vec::with_capacity(config.total_iters.saturating_sub(state.iter));
    while state.iter < config.total_iters {
        let iter = state.iter;
        let step = schedule.at(iter).expect("iteration inside schedule");
        if step.first_in_stage && iter > 0 && config.reset_adam_each_stage {
            state.adam.reset(model);
        }
        model.set_window(step.window);
        model.zero_grad();
        let mut r = rng::indexed_stream(config.seed, "train.batch", iter as u64);
        let (lr_img, hr_img) = sample_batch(data, config.batch_size, config.lr_patch, config.sr_scale, config.augment, &mut r)?;
        let (sr, cache) = match model.forward(&lr_img, &Ctx::train()) {
            Err(Error::NonFinite { .. }) => return Err(Error::NonFiniteLoss { iter }),
            other => other?,
        };
        let (loss, grad) = l1_loss(&sr, &hr_img)?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { iter });
        }
        model.backward(&cache.expect("training forward records"), &grad)?;
        state.adam.step(model, step.lr)?;
        state.iter += 1;
        let row = LogRow { iter, stage: step.stage, window_h: step.window.h, window_w: step.window.w, lr: step.lr, loss };
        observer.on_iteration(&row)?;
        log.push(row);
        if step.last_in_stage {
            observer.on_stage_end(&schedule.stages()[step.stage], model, state)?;
        }
    }
    Ok(log)
}
