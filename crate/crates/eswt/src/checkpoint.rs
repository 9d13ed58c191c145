//! Checkpoint files.
//!
//! ```text
//! "ESWTCKPT"  u32 version  u32 manifest_len  manifest  payload
//! ```
//!
//! Integers are little-endian. The manifest is UTF-8 text with one
//! `meta <key> <value>` line per configuration field and one
//! `tensor <name> <n>x<c>x<h>x<w> <byte offset>` line per stored tensor.
//! The payload is raw little-endian `f32`. Adam moments are stored as
//! `<name>#m` and `<name>#v`.

use std::collections::BTreeMap;
use std::path::Path;

use eswt_core::attention::{ProjectionLayout, ScalePlacement};
use eswt_core::model::{EswtModel, ModelConfig, ShiftPattern};
use eswt_core::nn::{Entry, EntryMut, Module};
use eswt_core::train::{Adam, AdamConfig, TrainState};
use eswt_core::window::WindowSpec;
use eswt_core::{Shape, Tensor};

use crate::error::{Error, Result};
use crate::fsutil::write_atomic;

pub const MAGIC: &[u8; 8] = b"ESWTCKPT";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: EswtModel<f32>,
    /// Iterations completed when the file was written.
    pub iter: usize,
    pub adam_t: u64,
}

impl Checkpoint {
    pub fn train_state(&self, adam: AdamConfig) -> TrainState {
        TrainState { iter: self.iter, adam: Adam { config: adam, t: self.adam_t } }
    }
}

fn projection_name(p: ProjectionLayout) -> &'static str {
    match p {
        ProjectionLayout::Shared => "shared",
        ProjectionLayout::PerHalf => "per_half",
    }
}

fn placement_name(p: ScalePlacement) -> &'static str {
    match p {
        ScalePlacement::PreSoftmax => "pre_softmax",
        ScalePlacement::Literal => "literal",
    }
}

fn pattern_name(p: ShiftPattern) -> &'static str {
    match p {
        ShiftPattern::Alternate => "alternate",
        ShiftPattern::Never => "never",
        ShiftPattern::Always => "always",
    }
}

fn config_meta(c: &ModelConfig) -> Vec<(&'static str, String)> {
    let mean = c.rgb_mean.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
    vec![
        ("c_in", c.c_in.to_string()),
        ("channels", c.channels.to_string()),
        ("n_blocks", c.n_blocks.to_string()),
        ("m_layers", c.m_layers.to_string()),
        ("sr_scale", c.sr_scale.to_string()),
        ("window", format!("{}x{}", c.window.h, c.window.w)),
        ("mlp_ratio", c.mlp_ratio.to_string()),
        ("shift_pattern", pattern_name(c.shift_pattern).into()),
        ("projection", projection_name(c.projection).into()),
        ("placement", placement_name(c.placement).into()),
        ("block_residual", c.block_residual.to_string()),
        ("rgb_mean", mean),
    ]
}

fn config_from_meta(meta: &BTreeMap<String, String>, path: &Path) -> Result<ModelConfig> {
    let get = |k: &str| meta.get(k).map(String::as_str).ok_or_else(|| Error::format(path, format!("manifest lacks meta {k}")));
    let bad = |k: &str| Error::format(path, format!("bad meta {k}"));
    let num = |k: &str| get(k)?.parse::<usize>().map_err(|_| bad(k));
    let window = {
        let (h, w) = get("window")?.split_once('x').ok_or_else(|| bad("window"))?;
        WindowSpec::new(h.parse().map_err(|_| bad("window"))?, w.parse().map_err(|_| bad("window"))?)?
    };
    let mut rgb_mean = [0.0; 3];
    let parts: Vec<&str> = get("rgb_mean")?.split(',').collect();
    if parts.len() != 3 {
        return Err(bad("rgb_mean"));
    }
    for (d, p) in rgb_mean.iter_mut().zip(parts) {
        *d = p.parse().map_err(|_| bad("rgb_mean"))?;
    }
    let config = ModelConfig {
        c_in: num("c_in")?,
        channels: num("channels")?,
        n_blocks: num("n_blocks")?,
        m_layers: num("m_layers")?,
        sr_scale: num("sr_scale")?,
        window,
        mlp_ratio: get("mlp_ratio")?.parse().map_err(|_| bad("mlp_ratio"))?,
        shift_pattern: match get("shift_pattern")? {
            "alternate" => ShiftPattern::Alternate,
            "never" => ShiftPattern::Never,
            "always" => ShiftPattern::Always,
            _ => return Err(bad("shift_pattern")),
        },
        projection: match get("projection")? {
            "shared" => ProjectionLayout::Shared,
            "per_half" => ProjectionLayout::PerHalf,
            _ => return Err(bad("projection")),
        },
        placement: match get("placement")? {
            "pre_softmax" => ScalePlacement::PreSoftmax,
            "literal" => ScalePlacement::Literal,
            _ => return Err(bad("placement")),
        },
        block_residual: get("block_residual")?.parse().map_err(|_| bad("block_residual"))?,
        rgb_mean,
    };
    config.validate()?;
    Ok(config)
}

/// Serialises parameters, running statistics, Adam moments and progress.
pub fn encode(model: &EswtModel<f32>, iter: usize, adam_t: u64) -> Vec<u8> {
    let mut manifest = String::new();
    for (k, v) in config_meta(&model.config) {
        manifest.push_str(&format!("meta {k} {v}\n"));
    }
    manifest.push_str(&format!("meta iter {iter}\nmeta adam_t {adam_t}\n"));
    let mut payload: Vec<u8> = Vec::new();
    let mut push = |name: &str, shape: Shape, data: &[f32], manifest: &mut String| {
        manifest.push_str(&format!("tensor {name} {}x{}x{}x{} {}\n", shape.n, shape.c, shape.h, shape.w, payload.len()));
        for v in data {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    };
    model.visit("", &mut |name, e| match e {
        Entry::Param(p) => {
            push(name, p.shape(), p.value.data(), &mut manifest);
            push(&format!("{name}#m"), p.shape(), p.m.data(), &mut manifest);
            push(&format!("{name}#v"), p.shape(), p.v.data(), &mut manifest);
        }
        Entry::Buffer(b) => push(name, Shape::vector(b.len()), b, &mut manifest),
    });
    let mut out = Vec::with_capacity(16 + manifest.len() + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(manifest.len() as u32).to_le_bytes());
    out.extend_from_slice(manifest.as_bytes());
    out.extend_from_slice(&payload);
    out
}

pub fn save(path: &Path, model: &EswtModel<f32>, iter: usize, adam_t: u64) -> Result<()> {
    write_atomic(path, &encode(model, iter, adam_t))
}

struct Parsed {
    meta: BTreeMap<String, String>,
    tensors: BTreeMap<String, Tensor<f32>>,
}

fn parse(bytes: &[u8], path: &Path) -> Result<Parsed> {
    let fmt = |d: String| Error::format(path, d);
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(fmt("not a checkpoint (bad magic)".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(fmt(format!("unsupported checkpoint version {version}")));
    }
    let mlen = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
    let manifest = bytes.get(16..16 + mlen).ok_or_else(|| fmt("truncated manifest".into()))?;
    let manifest = std::str::from_utf8(manifest).map_err(|_| fmt("manifest is not UTF-8".into()))?;
    let payload = &bytes[16 + mlen..];
    let mut meta = BTreeMap::new();
    let mut tensors = BTreeMap::new();
    for (ln, line) in manifest.lines().enumerate() {
        let bad = || fmt(format!("manifest line {}: {line:?}", ln + 1));
        let mut it = line.split(' ');
        match it.next() {
            Some("meta") => {
                let (k, v) = (it.next().ok_or_else(bad)?, it.next().ok_or_else(bad)?);
                meta.insert(k.to_string(), v.to_string());
            }
            Some("tensor") => {
                let name = it.next().ok_or_else(bad)?;
                let dims: Vec<usize> = it
                    .next()
                    .ok_or_else(bad)?
                    .split('x')
                    .map(|d| d.parse().map_err(|_| bad()))
                    .collect::<Result<_>>()?;
                let offset: usize = it.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
                let [n, c, h, w] = dims[..] else { return Err(bad()) };
                let shape = Shape::new(n, c, h, w);
                let end = offset + shape.numel() * 4;
                let raw = payload.get(offset..end).ok_or_else(|| fmt(format!("truncated data for {name}")))?;
                let data = raw.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes"))).collect();
                tensors.insert(name.to_string(), Tensor::from_vec(shape, data)?);
            }
            _ if line.is_empty() => {}
            _ => return Err(bad()),
        }
    }
    Ok(Parsed { meta, tensors })
}

fn restore(mut model: EswtModel<f32>, mut parsed: Parsed, path: &Path) -> Result<Checkpoint> {
    let mut problems = Vec::new();
    let mut take = |name: &str, shape: Shape, required: bool, problems: &mut Vec<String>| -> Option<Tensor<f32>> {
        match parsed.tensors.remove(name) {
            Some(t) if t.shape() == shape => Some(t),
            Some(t) => {
                problems.push(format!("{name}: stored {}, model needs {shape}", t.shape()));
                None
            }
            None => {
                if required {
                    problems.push(format!("{name}: missing"));
                }
                None
            }
        }
    };
    model.visit_mut("", &mut |name, e| match e {
        EntryMut::Param(p) => {
            let s = p.shape();
            if let Some(t) = take(name, s, true, &mut problems) {
                p.value = t;
            }
            if let Some(t) = take(&format!("{name}#m"), s, false, &mut problems) {
                p.m = t;
            }
            if let Some(t) = take(&format!("{name}#v"), s, false, &mut problems) {
                p.v = t;
            }
        }
        EntryMut::Buffer(b) => {
            if let Some(t) = take(name, Shape::vector(b.len()), true, &mut problems) {
                *b = t.into_vec();
            }
        }
    });
    for name in parsed.tensors.keys() {
        problems.push(format!("{name}: not part of the model"));
    }
    if !problems.is_empty() {
        return Err(Error::Mismatch(problems));
    }
    let num = |k: &str| -> Result<u64> {
        parsed.meta.get(k).and_then(|v| v.parse().ok()).ok_or_else(|| Error::format(path, format!("bad meta {k}")))
    };
    Ok(Checkpoint { model, iter: num("iter")? as usize, adam_t: num("adam_t")? })
}

/// Loads a checkpoint under the configuration stored in it.
pub fn decode(bytes: &[u8], path: &Path) -> Result<Checkpoint> {
    let parsed = parse(bytes, path)?;
    let config = config_from_meta(&parsed.meta, path)?;
    restore(EswtModel::init(config, 0)?, parsed, path)
}

/// Loads a checkpoint into a model built from `config`. The window may
/// differ from the stored one; every tensor shape must match.
pub fn decode_into(bytes: &[u8], path: &Path, config: &ModelConfig) -> Result<Checkpoint> {
    let parsed = parse(bytes, path)?;
    restore(EswtModel::init(*config, 0)?, parsed, path)
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    decode(&std::fs::read(path).map_err(|e| Error::io(path, e))?, path)
}

pub fn load_into(path: &Path, config: &ModelConfig) -> Result<Checkpoint> {
    decode_into(&std::fs::read(path).map_err(|e| Error::io(path, e))?, path, config)
}
