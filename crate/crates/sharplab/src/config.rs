//! Config-file parsing.
//!
//! Flat `key = value` text with `[section]` headers and `#` comments. Keys
//! are lowercase snake case and typed; unknown keys are a hard error.
//! Missing keys fall back to the `spirals` preset (the desk-scale default);
//! the `preset` key selects an overlay of shipped hyper-parameter presets,
//! applied before all other keys. `--override section.key=value` entries go
//! through the same parser after the file and win last-write-wins.

use std::path::PathBuf;
use std::str::FromStr;

use crate::diagnostics::PowerIterationConfig;
use crate::error::{Error, Result};
use crate::harness::{
    DatasetSpec, Mode, OptimizerConfig, RunConfig, ScheduleConfig, StartMode, SwitchSpec,
};
use crate::model::{Activation, LossConfig, ModelSpec};
use crate::optim::{OptimizerKind, SharpnessConfig};

/// A fully-resolved run configuration plus the experiment-level lists the
/// subcommands consume.
#[derive(Debug, Clone)]
pub struct LabConfig {
    pub run: RunConfig,
    /// Modes compared by `train` / `sharpness` / `runtime`.
    pub modes: Vec<Mode>,
    /// m values swept by `sweep-m`.
    pub m_values: Vec<usize>,
    /// Grid for the `switch` experiment.
    pub switch_percents: Vec<f64>,
    pub start_modes: Vec<StartMode>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DataKind {
    Spirals,
    Idx,
}

/// Mutable accumulation of config entries before lowering to [`LabConfig`].
#[derive(Debug, Clone)]
struct Draft {
    hidden: Vec<usize>,
    activation: Activation,
    init_seed: u64,
    input_dim: Option<(usize, usize)>, // (value, line) — idx data only

    kind: DataKind,
    n_per_class: usize,
    num_classes: usize,
    noise_sigma: f64,
    data_seed: u64,
    test_n_per_class: usize,
    images: Option<PathBuf>,
    labels: Option<PathBuf>,
    test_images: Option<PathBuf>,
    test_labels: Option<PathBuf>,
    limit: Option<usize>,

    label_smoothing: f64,

    optimizer_kind: String,
    momentum: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
    grad_clip_norm: Option<f64>,

    peak_lr: f64,
    warmup_fraction: f64,

    rho: f64,
    m: usize,
    norm_order: u32,
    m_values: Vec<usize>,

    mode: Mode,
    modes: Vec<Mode>,
    epochs: usize,
    batch_size: usize,
    seeds: Vec<u64>,
    measure_lambda_max: bool,

    tol: f64,
    max_iters: usize,
    chunk_size: usize,

    switch_start: Option<StartMode>,
    switch_percent: Option<f64>,
    switch_percents: Vec<f64>,
    start_modes: Vec<StartMode>,
}

impl Default for Draft {
    /// The `spirals` preset: desk-scale defaults for the synthetic task.
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            activation: Activation::Relu,
            init_seed: 0,
            input_dim: None,

            kind: DataKind::Spirals,
            n_per_class: 500,
            num_classes: 3,
            noise_sigma: 0.15,
            data_seed: 7,
            test_n_per_class: 500,
            images: None,
            labels: None,
            test_images: None,
            test_labels: None,
            limit: None,

            label_smoothing: 0.1,

            optimizer_kind: "sgd_momentum".into(),
            momentum: 0.9,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 5e-4,
            grad_clip_norm: None,

            peak_lr: 0.1,
            warmup_fraction: 0.05,

            rho: 0.04,
            m: 8,
            norm_order: 2,
            m_values: vec![4, 8, 16, 32, 64],

            mode: Mode::Msam,
            modes: vec![Mode::Vanilla, Mode::Sam, Mode::Msam],
            epochs: 200,
            batch_size: 64,
            seeds: vec![1, 2, 3, 4, 5],
            measure_lambda_max: false,

            tol: 1e-3,
            max_iters: 100,
            chunk_size: 256,

            switch_start: None,
            switch_percent: None,
            switch_percents: vec![0.0, 20.0, 50.0, 80.0, 100.0],
            start_modes: vec![StartMode::MsamFirst, StartMode::VanillaFirst],
        }
    }
}

fn perr(line: usize, key: &str, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        key: key.to_string(),
        message: message.into(),
    }
}

fn parse_value<T>(line: usize, key: &str, value: &str) -> Result<T>
where
    T: FromStr,
    T::Err: std::fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| perr(line, key, format!("invalid value `{value}`: {e}")))
}

fn parse_list<T>(line: usize, key: &str, value: &str) -> Result<Vec<T>>
where
    T: FromStr,
    T::Err: std::fmt::Display,
{
    let items: Vec<&str> = value.split(',').map(str::trim).collect();
    if items.iter().any(|s| s.is_empty()) {
        return Err(perr(line, key, "empty element in comma-separated list"));
    }
    items
        .into_iter()
        .map(|s| parse_value(line, key, s))
        .collect()
}

fn parse_bool(line: usize, key: &str, value: &str) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(perr(
            line,
            key,
            format!("invalid value `{other}`: expected true or false"),
        )),
    }
}

fn apply_preset(draft: &mut Draft, name: &str, line: usize) -> Result<()> {
    match name {
        // Base desk-scale defaults.
        "spirals" => {
            let keep_seeds = draft.seeds.clone();
            *draft = Draft::default();
            draft.seeds = keep_seeds;
        }
        // SGD-momentum image-classification hyper-parameters.
        "cnn_cifar" => {
            draft.optimizer_kind = "sgd_momentum".into();
            draft.momentum = 0.9;
            draft.weight_decay = 5e-4;
            draft.label_smoothing = 0.1;
            draft.rho = 0.2;
            draft.peak_lr = 0.5;
            draft.warmup_fraction = 0.05;
            draft.m = 32;
        }
        // AdamW fine-tuning hyper-parameters.
        "vit" => {
            draft.optimizer_kind = "adamw".into();
            draft.beta1 = 0.9;
            draft.beta2 = 0.999;
            draft.eps = 1e-8;
            draft.weight_decay = 0.3;
            draft.grad_clip_norm = Some(1.0);
            draft.label_smoothing = 0.0;
            draft.rho = 0.3;
            draft.peak_lr = 1e-3;
            draft.warmup_fraction = 0.05;
            draft.epochs = 20;
        }
        other => {
            return Err(perr(
                line,
                "preset",
                format!("unknown preset `{other}` (expected spirals, cnn_cifar or vit)"),
            ))
        }
    }
    Ok(())
}

#[allow(clippy::too_many_lines)]
fn apply(draft: &mut Draft, section: &str, key: &str, value: &str, line: usize) -> Result<()> {
    let full = if section.is_empty() {
        key.to_string()
    } else {
        format!("{section}.{key}")
    };
    let full = full.as_str();
    match (section, key) {
        ("", "preset") => apply_preset(draft, value, line)?,

        ("model", "hidden") => draft.hidden = parse_list(line, full, value)?,
        ("model", "activation") => draft.activation = parse_value(line, full, value)?,
        ("model", "init_seed") => draft.init_seed = parse_value(line, full, value)?,
        ("model", "input_dim") => {
            draft.input_dim = Some((parse_value(line, full, value)?, line));
        }

        ("data", "kind") => {
            draft.kind = match value {
                "spirals" => DataKind::Spirals,
                "idx" => DataKind::Idx,
                other => {
                    return Err(perr(
                        line,
                        full,
                        format!("unknown data kind `{other}` (expected spirals or idx)"),
                    ))
                }
            }
        }
        ("data", "n_per_class") => draft.n_per_class = parse_value(line, full, value)?,
        ("data", "num_classes") => draft.num_classes = parse_value(line, full, value)?,
        ("data", "noise_sigma") => draft.noise_sigma = parse_value(line, full, value)?,
        ("data", "data_seed") => draft.data_seed = parse_value(line, full, value)?,
        ("data", "test_n_per_class") => draft.test_n_per_class = parse_value(line, full, value)?,
        ("data", "images") => draft.images = Some(PathBuf::from(value)),
        ("data", "labels") => draft.labels = Some(PathBuf::from(value)),
        ("data", "test_images") => draft.test_images = Some(PathBuf::from(value)),
        ("data", "test_labels") => draft.test_labels = Some(PathBuf::from(value)),
        ("data", "limit") => draft.limit = Some(parse_value(line, full, value)?),

        ("loss", "label_smoothing") => draft.label_smoothing = parse_value(line, full, value)?,

        ("optimizer", "kind") => {
            if value != "sgd_momentum" && value != "adamw" {
                return Err(perr(
                    line,
                    full,
                    format!("unknown optimizer `{value}` (expected sgd_momentum or adamw)"),
                ));
            }
            draft.optimizer_kind = value.to_string();
        }
        ("optimizer", "momentum") => draft.momentum = parse_value(line, full, value)?,
        ("optimizer", "beta1") => draft.beta1 = parse_value(line, full, value)?,
        ("optimizer", "beta2") => draft.beta2 = parse_value(line, full, value)?,
        ("optimizer", "eps") => draft.eps = parse_value(line, full, value)?,
        ("optimizer", "weight_decay") => draft.weight_decay = parse_value(line, full, value)?,
        ("optimizer", "grad_clip_norm") => {
            draft.grad_clip_norm = if value == "none" {
                None
            } else {
                Some(parse_value(line, full, value)?)
            };
        }

        ("schedule", "peak_lr") => draft.peak_lr = parse_value(line, full, value)?,
        ("schedule", "warmup_fraction") => draft.warmup_fraction = parse_value(line, full, value)?,

        ("sharpness", "rho") => draft.rho = parse_value(line, full, value)?,
        ("sharpness", "m") => draft.m = parse_value(line, full, value)?,
        ("sharpness", "norm_order") => draft.norm_order = parse_value(line, full, value)?,
        ("sharpness", "m_values") => draft.m_values = parse_list(line, full, value)?,

        ("run", "mode") => {
            draft.mode = Mode::from_str(value).map_err(|e| perr(line, full, e))?;
        }
        ("run", "modes") => {
            draft.modes = value
                .split(',')
                .map(str::trim)
                .map(|s| Mode::from_str(s).map_err(|e| perr(line, full, e)))
                .collect::<Result<_>>()?;
        }
        ("run", "epochs") => draft.epochs = parse_value(line, full, value)?,
        ("run", "batch_size") => draft.batch_size = parse_value(line, full, value)?,
        ("run", "seeds") => draft.seeds = parse_list(line, full, value)?,
        ("run", "measure_lambda_max") => {
            draft.measure_lambda_max = parse_bool(line, full, value)?;
        }

        ("diagnostics", "tol") => draft.tol = parse_value(line, full, value)?,
        ("diagnostics", "max_iters") => draft.max_iters = parse_value(line, full, value)?,
        ("diagnostics", "chunk_size") => draft.chunk_size = parse_value(line, full, value)?,

        ("switch", "start") => {
            draft.switch_start = Some(StartMode::from_str(value).map_err(|e| perr(line, full, e))?);
        }
        ("switch", "percent") => draft.switch_percent = Some(parse_value(line, full, value)?),
        ("switch", "percents") => draft.switch_percents = parse_list(line, full, value)?,
        ("switch", "starts") => {
            draft.start_modes = value
                .split(',')
                .map(str::trim)
                .map(|s| StartMode::from_str(s).map_err(|e| perr(line, full, e)))
                .collect::<Result<_>>()?;
        }

        _ => return Err(perr(line, full, "unknown key")),
    }
    Ok(())
}

struct Entry {
    section: String,
    key: String,
    value: String,
    line: usize,
}

fn tokenize(text: &str) -> Result<Vec<Entry>> {
    let mut entries = Vec::new();
    let mut section = String::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| perr(line, content, "malformed section header"))?
                .trim();
            section = name.to_string();
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| perr(line, content, "expected `key = value`"))?;
        entries.push(Entry {
            section: section.clone(),
            key: key.trim().to_string(),
            value: value.trim().to_string(),
            line,
        });
    }
    Ok(entries)
}

/// Turns an `--override section.key=value` argument into an entry.
fn override_entry(spec: &str) -> Result<Entry> {
    let (path, value) = spec
        .split_once('=')
        .ok_or_else(|| perr(0, spec, "override must be section.key=value"))?;
    let path = path.trim();
    let (section, key) = match path.split_once('.') {
        Some((s, k)) => (s.trim().to_string(), k.trim().to_string()),
        None => (String::new(), path.to_string()),
    };
    Ok(Entry {
        section,
        key,
        value: value.trim().to_string(),
        line: 0,
    })
}

fn lower(draft: Draft) -> Result<LabConfig> {
    let dataset = match draft.kind {
        DataKind::Spirals => {
            if let Some((_, line)) = draft.input_dim {
                return Err(perr(
                    line,
                    "model.input_dim",
                    "input_dim is fixed at 2 for spirals data",
                ));
            }
            DatasetSpec::Spirals {
                n_per_class: draft.n_per_class,
                num_classes: draft.num_classes,
                noise_sigma: draft.noise_sigma,
                seed: draft.data_seed,
                test_n_per_class: draft.test_n_per_class,
            }
        }
        DataKind::Idx => {
            let need = |v: &Option<PathBuf>, key: &str| {
                v.clone()
                    .ok_or_else(|| perr(0, key, "required when data.kind = idx"))
            };
            DatasetSpec::Idx {
                images: need(&draft.images, "data.images")?,
                labels: need(&draft.labels, "data.labels")?,
                test_images: need(&draft.test_images, "data.test_images")?,
                test_labels: need(&draft.test_labels, "data.test_labels")?,
                limit: draft.limit,
            }
        }
    };

    let input_dim = match draft.kind {
        DataKind::Spirals => 2,
        DataKind::Idx => draft.input_dim.map_or(784, |(v, _)| v),
    };
    let model = ModelSpec {
        input_dim,
        hidden_layers: draft
            .hidden
            .iter()
            .map(|&w| (w, draft.activation))
            .collect(),
        num_classes: draft.num_classes,
        init_seed: draft.init_seed,
    };

    let kind = match draft.optimizer_kind.as_str() {
        "sgd_momentum" => OptimizerKind::SgdMomentum {
            momentum: draft.momentum,
        },
        _ => OptimizerKind::AdamW {
            beta1: draft.beta1,
            beta2: draft.beta2,
            eps: draft.eps,
        },
    };

    let switch = match (draft.switch_start, draft.switch_percent) {
        (Some(start_mode), Some(switch_percent)) => Some(SwitchSpec {
            start_mode,
            switch_percent,
        }),
        (None, None) => None,
        (Some(_), None) => return Err(perr(0, "switch.percent", "required with switch.start")),
        (None, Some(_)) => return Err(perr(0, "switch.start", "required with switch.percent")),
    };

    if draft.epochs == 0 {
        return Err(perr(0, "run.epochs", "must be at least 1"));
    }
    if draft.seeds.is_empty() {
        return Err(perr(0, "run.seeds", "must list at least one seed"));
    }

    let mut sharpness = SharpnessConfig::new(draft.rho, draft.m);
    sharpness.norm_order = draft.norm_order;

    let run = RunConfig {
        model,
        dataset,
        loss: LossConfig {
            label_smoothing: draft.label_smoothing,
            weight_decay: draft.weight_decay,
        },
        optimizer: OptimizerConfig {
            kind,
            weight_decay: draft.weight_decay,
            grad_clip_norm: draft.grad_clip_norm,
        },
        schedule: ScheduleConfig {
            peak_lr: draft.peak_lr,
            warmup_fraction: draft.warmup_fraction,
        },
        sharpness,
        mode: draft.mode,
        epochs: draft.epochs,
        batch_size: draft.batch_size,
        seeds: draft.seeds,
        switch,
        measure_lambda_max: draft.measure_lambda_max,
        power_iteration: PowerIterationConfig {
            tol: draft.tol,
            max_iters: draft.max_iters,
            chunk_size: draft.chunk_size,
        },
        snapshot_epoch: None,
    };
    run.validate()?;

    Ok(LabConfig {
        run,
        modes: draft.modes,
        m_values: draft.m_values,
        switch_percents: draft.switch_percents,
        start_modes: draft.start_modes,
    })
}

/// Parses config text into a fully-resolved [`LabConfig`].
pub fn parse_config(text: &str) -> Result<LabConfig> {
    parse_config_with_overrides(text, &[])
}

/// Parses config text, then applies `--override` entries last-write-wins.
/// Preset keys (from either source) are applied before everything else.
pub fn parse_config_with_overrides(text: &str, overrides: &[String]) -> Result<LabConfig> {
    let mut entries = tokenize(text)?;
    for o in overrides {
        entries.push(override_entry(o)?);
    }
    let mut draft = Draft::default();
    for e in entries
        .iter()
        .filter(|e| e.section.is_empty() && e.key == "preset")
    {
        apply_preset(&mut draft, &e.value, e.line)?;
    }
    for e in entries
        .iter()
        .filter(|e| !(e.section.is_empty() && e.key == "preset"))
    {
        apply(&mut draft, &e.section, &e.key, &e.value, e.line)?;
    }
    lower(draft)
}
