//! The JSON run configuration.

use std::path::{Path, PathBuf};

use eswt_core::attention::{ProjectionLayout, ScalePlacement};
use eswt_core::model::{ModelConfig, ShiftPattern, DIV2K_MEAN};
use eswt_core::train::{AdamConfig, StageSpec, TrainConfig};
use eswt_core::window::WindowSpec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub train: TrainSection,
    pub data: DataSection,
    #[serde(default)]
    pub eval: EvalSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub c_in: usize,
    pub channels: usize,
    pub n_blocks: usize,
    pub m_layers: usize,
    pub sr_scale: usize,
    pub window: [usize; 2],
    pub mlp_ratio: f64,
    #[serde(default)]
    pub shift_pattern: PatternName,
    #[serde(default)]
    pub projection: ProjectionName,
    #[serde(default)]
    pub placement: PlacementName,
    #[serde(default)]
    pub block_residual: bool,
    #[serde(default = "default_mean")]
    pub rgb_mean: [f64; 3],
}

fn default_mean() -> [f64; 3] {
    DIV2K_MEAN
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternName {
    #[default]
    Alternate,
    Never,
    Always,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionName {
    #[default]
    Shared,
    PerHalf,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlacementName {
    #[default]
    PreSoftmax,
    Literal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub iters: usize,
    pub batch: usize,
    pub patch: usize,
    pub seed: u64,
    pub stages: Vec<StageSection>,
    #[serde(default)]
    pub adam: AdamSection,
    #[serde(default = "yes")]
    pub augment: bool,
    #[serde(default)]
    pub reset_adam_each_stage: bool,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSection {
    pub fraction: f64,
    pub window: [usize; 2],
    pub lr_start: f64,
    pub lr_end: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamSection {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamSection {
    fn default() -> Self {
        let d = AdamConfig::default();
        AdamSection { beta1: d.beta1, beta2: d.beta2, eps: d.eps }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Synth,
    Dir,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub source: Source,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthSection>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub count: usize,
    pub size: usize,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Psnr,
    Ssim,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    /// Border removed before scoring; the scale factor when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crop: Option<usize>,
    pub metrics: Vec<Metric>,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection { crop: None, metrics: vec![Metric::Psnr, Metric::Ssim] }
    }
}

impl ModelSection {
    pub fn from_config(c: &ModelConfig) -> Self {
        ModelSection {
            c_in: c.c_in,
            channels: c.channels,
            n_blocks: c.n_blocks,
            m_layers: c.m_layers,
            sr_scale: c.sr_scale,
            window: [c.window.h, c.window.w],
            mlp_ratio: c.mlp_ratio,
            shift_pattern: match c.shift_pattern {
                ShiftPattern::Alternate => PatternName::Alternate,
                ShiftPattern::Never => PatternName::Never,
                ShiftPattern::Always => PatternName::Always,
            },
            projection: match c.projection {
                ProjectionLayout::Shared => ProjectionName::Shared,
                ProjectionLayout::PerHalf => ProjectionName::PerHalf,
            },
            placement: match c.placement {
                ScalePlacement::PreSoftmax => PlacementName::PreSoftmax,
                ScalePlacement::Literal => PlacementName::Literal,
            },
            block_residual: c.block_residual,
            rgb_mean: c.rgb_mean,
        }
    }

    pub fn to_config(&self) -> eswt_core::Result<ModelConfig> {
        let config = ModelConfig {
            c_in: self.c_in,
            channels: self.channels,
            n_blocks: self.n_blocks,
            m_layers: self.m_layers,
            sr_scale: self.sr_scale,
            window: WindowSpec::new(self.window[0], self.window[1])?,
            mlp_ratio: self.mlp_ratio,
            shift_pattern: match self.shift_pattern {
                PatternName::Alternate => ShiftPattern::Alternate,
                PatternName::Never => ShiftPattern::Never,
                PatternName::Always => ShiftPattern::Always,
            },
            projection: match self.projection {
                ProjectionName::Shared => ProjectionLayout::Shared,
                ProjectionName::PerHalf => ProjectionLayout::PerHalf,
            },
            placement: match self.placement {
                PlacementName::PreSoftmax => ScalePlacement::PreSoftmax,
                PlacementName::Literal => ScalePlacement::Literal,
            },
            block_residual: self.block_residual,
            rgb_mean: self.rgb_mean,
        };
        config.validate()?;
        Ok(config)
    }
}

impl TrainSection {
    pub fn from_config(t: &TrainConfig) -> Self {
        TrainSection {
            iters: t.total_iters,
            batch: t.batch_size,
            patch: t.lr_patch,
            seed: t.seed,
            stages: t
                .stages
                .iter()
                .map(|s| StageSection {
                    fraction: s.fraction,
                    window: [s.window.h, s.window.w],
                    lr_start: s.lr_start,
                    lr_end: s.lr_end,
                })
                .collect(),
            adam: AdamSection { beta1: t.adam.beta1, beta2: t.adam.beta2, eps: t.adam.eps },
            augment: t.augment,
            reset_adam_each_stage: t.reset_adam_each_stage,
        }
    }

    pub fn to_config(&self, sr_scale: usize) -> eswt_core::Result<TrainConfig> {
        let stages = self
            .stages
            .iter()
            .map(|s| StageSpec::new(s.fraction, (s.window[0], s.window[1]), s.lr_start, s.lr_end))
            .collect::<eswt_core::Result<Vec<_>>>()?;
        let config = TrainConfig {
            total_iters: self.iters,
            batch_size: self.batch,
            lr_patch: self.patch,
            sr_scale,
            stages,
            adam: AdamConfig { beta1: self.adam.beta1, beta2: self.adam.beta2, eps: self.adam.eps },
            seed: self.seed,
            augment: self.augment,
            reset_adam_each_stage: self.reset_adam_each_stage,
        };
        config.validate()?;
        Ok(config)
    }
}

/// A configuration that passed both the schema and the semantic checks.
#[derive(Clone, Debug, PartialEq)]
pub struct Resolved {
    pub raw: RunConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl RunConfig {
    /// The desk-scale recipe on a 32-image synthetic corpus.
    pub fn desk() -> Self {
        RunConfig {
            model: ModelSection::from_config(&ModelConfig::desk()),
            train: TrainSection::from_config(&TrainConfig::desk()),
            data: DataSection { source: Source::Synth, path: None, synth: Some(SynthSection { count: 32, size: 96, seed: 1 }) },
            eval: EvalSection::default(),
        }
    }

    pub fn parse(text: &str, path: &Path) -> Result<Resolved> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let raw: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            Error::Config { path: path.into(), field: if field == "." { "<root>".into() } else { field }, detail: e.into_inner().to_string() }
        })?;
        raw.resolve(path)
    }

    pub fn load(path: &Path) -> Result<Resolved> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn resolve(self, path: &Path) -> Result<Resolved> {
        let cfg_err = |field: &str, e: eswt_core::Error| Error::Config { path: path.into(), field: field.into(), detail: e.to_string() };
        let bad = |field: &str, detail: &str| Error::Config { path: path.into(), field: field.into(), detail: detail.into() };
        let model = self.model.to_config().map_err(|e| cfg_err("model", e))?;
        let train = self.train.to_config(model.sr_scale).map_err(|e| cfg_err("train", e))?;
        match self.data.source {
            Source::Dir if self.data.path.is_none() => return Err(bad("data.path", "required when source is \"dir\"")),
            Source::Synth => match self.data.synth {
                None => return Err(bad("data.synth", "required when source is \"synth\"")),
                Some(s) if s.count == 0 => return Err(bad("data.synth.count", "must be positive")),
                Some(s) if s.size < train.lr_patch * model.sr_scale => {
                    return Err(bad("data.synth.size", "must be at least train.patch * model.sr_scale"))
                }
                _ => {}
            },
            _ => {}
        }
        if self.eval.metrics.is_empty() {
            return Err(bad("eval.metrics", "must name at least one metric"));
        }
        Ok(Resolved { model, train, raw: self })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }
}

impl Resolved {
    pub fn crop(&self) -> usize {
        self.raw.eval.crop.unwrap_or(self.model.sr_scale)
    }
}
