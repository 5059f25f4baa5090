//! Training-run orchestration.
//!
//! [`train_one`] drives a single seeded run: per epoch, a seeded shuffle
//! into batches, a gradient per batch according to the mode in effect
//! (vanilla / SAM / mSAM), and a base-optimizer update at the scheduled
//! learning rate. All randomness is derived statelessly from the run seed,
//! so two runs that share a prefix of per-batch gradient rules share that
//! prefix of parameter trajectories bit for bit — switching the rule
//! mid-run cannot perturb the shuffles, partitions or schedule.
//!
//! Wall time is measured around the batch loop only; evaluation and
//! sharpness measurement are excluded.

mod csv;
mod experiments;
mod metrics;

pub use csv::{
    epoch_csv_string, runtime_csv_string, summary_csv_string, write_epoch_csv, write_runtime_csv,
    write_summary_csv,
};
pub use experiments::{
    measure_runtime, run_comparison, run_switch_experiment, sweep_m, ExperimentResult,
    RuntimeReport, RuntimeRow, SummaryRow,
};
pub use metrics::{accuracy, matthews_corrcoef, mean, predictions, sample_std};

use std::path::PathBuf;
use std::time::Instant;

use crate::data::{epoch_batches, gen_spirals, load_idx_images, Dataset, Split};
use crate::diagnostics::{lambda_max, PowerIterationConfig};
use crate::error::{Error, Result};
use crate::model::{LossConfig, Mlp, ModelSpec, Objective, ParamVector};
use crate::optim::{
    msam_gradient, partition_minibatch, sam_gradient, BaseOptimizer, LrSchedule, OptimizerKind,
    SharpnessConfig,
};
use crate::seeding::{
    derive, derive_path, TAG_EPOCH_SHUFFLE, TAG_INIT, TAG_PARTITION, TAG_POWER_ITERATION,
    TAG_TEST_SPLIT,
};

/// Per-batch gradient rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Vanilla,
    Sam,
    Msam,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Vanilla => "vanilla",
            Mode::Sam => "sam",
            Mode::Msam => "msam",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "vanilla" => Ok(Mode::Vanilla),
            "sam" => Ok(Mode::Sam),
            "msam" => Ok(Mode::Msam),
            other => Err(format!(
                "unknown mode `{other}` (expected vanilla, sam or msam)"
            )),
        }
    }
}

/// Which rule a hybrid run starts with; the other takes over after the
/// switch point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartMode {
    MsamFirst,
    VanillaFirst,
}

impl StartMode {
    pub fn first(self) -> Mode {
        match self {
            StartMode::MsamFirst => Mode::Msam,
            StartMode::VanillaFirst => Mode::Vanilla,
        }
    }

    pub fn second(self) -> Mode {
        match self {
            StartMode::MsamFirst => Mode::Vanilla,
            StartMode::VanillaFirst => Mode::Msam,
        }
    }
}

impl std::fmt::Display for StartMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StartMode::MsamFirst => "msam_first",
            StartMode::VanillaFirst => "vanilla_first",
        })
    }
}

impl std::str::FromStr for StartMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "msam_first" => Ok(StartMode::MsamFirst),
            "vanilla_first" => Ok(StartMode::VanillaFirst),
            other => Err(format!(
                "unknown start mode `{other}` (expected msam_first or vanilla_first)"
            )),
        }
    }
}

/// Hybrid-training configuration: the start mode runs for
/// ⌈percent/100 · epochs⌉ epochs, the other mode for the remainder.
/// Optimizer state, schedule and seed streams continue uninterrupted.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchSpec {
    pub start_mode: StartMode,
    pub switch_percent: f64,
}

/// Epochs assigned to the start mode.
pub fn switch_first_epochs(percent: f64, epochs: usize) -> usize {
    (percent / 100.0 * epochs as f64).ceil() as usize
}

/// Which dataset a run trains and evaluates on.
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSpec {
    Spirals {
        n_per_class: usize,
        num_classes: usize,
        noise_sigma: f64,
        /// Seed of the train stream; the test stream is derived from it.
        seed: u64,
        test_n_per_class: usize,
    },
    Idx {
        images: PathBuf,
        labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
        limit: Option<usize>,
    },
}

impl DatasetSpec {
    /// Builds the (train, test) pair. Synthetic splits come from disjoint
    /// seed streams.
    pub fn materialize(&self) -> Result<(Dataset, Dataset)> {
        match self {
            DatasetSpec::Spirals {
                n_per_class,
                num_classes,
                noise_sigma,
                seed,
                test_n_per_class,
            } => {
                let train = gen_spirals(*n_per_class, *num_classes, *noise_sigma, *seed)?;
                let mut test = gen_spirals(
                    *test_n_per_class,
                    *num_classes,
                    *noise_sigma,
                    derive(*seed, TAG_TEST_SPLIT),
                )?;
                test.split = Split::Test;
                Ok((train, test))
            }
            DatasetSpec::Idx {
                images,
                labels,
                test_images,
                test_labels,
                limit,
            } => {
                let mut train = load_idx_images(images, labels, *limit)?;
                let mut test = load_idx_images(test_images, test_labels, *limit)?;
                test.split = Split::Test;
                let classes = train.num_classes.max(test.num_classes);
                train.num_classes = classes;
                test.num_classes = classes;
                Ok((train, test))
            }
        }
    }
}

/// Base-optimizer blueprint; [`OptimizerConfig::build`] instantiates the
/// stateful optimizer for a parameter count.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub weight_decay: f64,
    pub grad_clip_norm: Option<f64>,
}

impl OptimizerConfig {
    pub fn build(&self, dim: usize) -> Result<BaseOptimizer> {
        match self.kind {
            OptimizerKind::SgdMomentum { momentum } => BaseOptimizer::sgd_momentum(
                dim,
                momentum,
                self.weight_decay,
                self.grad_clip_norm,
            ),
            OptimizerKind::AdamW { beta1, beta2, eps } => BaseOptimizer::adamw(
                dim,
                beta1,
                beta2,
                eps,
                self.weight_decay,
                self.grad_clip_norm,
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleConfig {
    pub peak_lr: f64,
    pub warmup_fraction: f64,
}

/// Everything a run needs. `seeds` drives the multi-run protocol; all other
/// randomness is derived per run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub dataset: DatasetSpec,
    pub loss: LossConfig,
    pub optimizer: OptimizerConfig,
    pub schedule: ScheduleConfig,
    pub sharpness: SharpnessConfig,
    pub mode: Mode,
    pub epochs: usize,
    pub batch_size: usize,
    pub seeds: Vec<u64>,
    pub switch: Option<SwitchSpec>,
    pub measure_lambda_max: bool,
    pub power_iteration: PowerIterationConfig,
    /// Capture the parameter vector after this epoch (0 = before training).
    /// Defaults to the switch boundary when a switch is configured.
    pub snapshot_epoch: Option<usize>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.loss.validate()?;
        if self.batch_size == 0 {
            return Err(Error::Domain("batch_size must be at least 1".into()));
        }
        if self.schedule.peak_lr <= 0.0 {
            return Err(Error::Domain("peak_lr must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.schedule.warmup_fraction) {
            return Err(Error::Domain("warmup_fraction must be in [0, 1)".into()));
        }
        self.power_iteration.validate()?;
        let uses_sharpness = self.mode != Mode::Vanilla || self.switch.is_some();
        if uses_sharpness {
            // SAM ignores m (it is forced to 1); mSAM and switch runs use it.
            let msam_involved = self.mode == Mode::Msam || self.switch.is_some();
            let effective = SharpnessConfig {
                m: if msam_involved { self.sharpness.m } else { 1 },
                ..self.sharpness.clone()
            };
            effective.validate(self.batch_size)?;
        }
        if let Some(sw) = &self.switch {
            if !(0.0..=100.0).contains(&sw.switch_percent) {
                return Err(Error::Domain(format!(
                    "switch_percent must be in [0, 100], got {}",
                    sw.switch_percent
                )));
            }
        }
        Ok(())
    }

    /// Deterministic run label used in the per-epoch CSV.
    pub fn run_id(&self, seed: u64) -> String {
        match &self.switch {
            Some(sw) => format!(
                "switch-{}-{}pct-s{}",
                sw.start_mode, sw.switch_percent, seed
            ),
            None => match self.mode {
                Mode::Vanilla => format!("vanilla-s{seed}"),
                Mode::Sam => format!("sam-s{seed}"),
                Mode::Msam => format!("msam{}-s{seed}", self.sharpness.m),
            },
        }
    }

    fn mode_at_epoch(&self, epoch: usize) -> Mode {
        match &self.switch {
            None => self.mode,
            Some(sw) => {
                if epoch <= switch_first_epochs(sw.switch_percent, self.epochs) {
                    sw.start_mode.first()
                } else {
                    sw.start_mode.second()
                }
            }
        }
    }
}

/// One per-epoch metrics row.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainRecord {
    pub run_id: String,
    pub seed: u64,
    /// 1-based; strictly increasing within a run.
    pub epoch: usize,
    pub mode_in_effect: Mode,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    /// Matthews correlation on the test split, binary tasks only.
    pub mcc: Option<f64>,
    /// Learning rate at the last step of the epoch.
    pub lr: f64,
    pub epoch_wall_time_seconds: f64,
    /// Dominant Hessian eigenvalue, measured at the final epoch on request.
    pub lambda_max: Option<f64>,
}

/// Result of one seeded run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub records: Vec<TrainRecord>,
    pub final_params: ParamVector,
    /// Parameters captured at `snapshot_epoch` (or the switch boundary).
    pub snapshot_params: Option<ParamVector>,
    /// Gradient evaluations performed inside the batch loops.
    pub training_grad_evals: u64,
    pub total_batches: u64,
}

/// Runs one full training loop for `seed`. Deterministic given
/// (config, seed) except for the wall-time fields; aborts with a diagnostic
/// error if the loss or any parameter goes non-finite.
pub fn train_one(config: &RunConfig, seed: u64) -> Result<TrainOutcome> {
    config.validate()?;
    let (train_ds, test_ds) = config.dataset.materialize()?;
    if train_ds.is_empty() || test_ds.is_empty() {
        return Err(Error::Domain("train and test datasets must be nonempty".into()));
    }
    if train_ds.feature_dim() != config.model.input_dim {
        return Err(Error::DimensionMismatch {
            expected: config.model.input_dim,
            got: train_ds.feature_dim(),
        });
    }
    if train_ds.num_classes > config.model.num_classes {
        return Err(Error::Domain(format!(
            "dataset has {} classes but the model only {}",
            train_ds.num_classes, config.model.num_classes
        )));
    }

    let mut model_spec = config.model.clone();
    model_spec.init_seed = derive(seed, TAG_INIT);
    let mlp = Mlp::new(&model_spec, config.loss.clone())?;
    let mut w = mlp.init_params();
    let run_id = config.run_id(seed);

    let snapshot_epoch = config.snapshot_epoch.or_else(|| {
        config
            .switch
            .as_ref()
            .map(|sw| switch_first_epochs(sw.switch_percent, config.epochs))
    });
    let mut snapshot_params = if snapshot_epoch == Some(0) {
        Some(w.clone())
    } else {
        None
    };

    let mut records = Vec::with_capacity(config.epochs);
    if config.epochs == 0 {
        return Ok(TrainOutcome {
            records,
            final_params: w,
            snapshot_params,
            training_grad_evals: 0,
            total_batches: 0,
        });
    }

    let batches_per_epoch = train_ds.len().div_ceil(config.batch_size);
    let schedule = LrSchedule::new(
        config.schedule.peak_lr,
        config.epochs * batches_per_epoch,
        config.schedule.warmup_fraction,
    )?;
    let mut optimizer = config.optimizer.build(mlp.param_count())?;

    let mut global_step = 0usize;
    let mut training_grad_evals = 0u64;
    let mut total_batches = 0u64;
    for epoch in 1..=config.epochs {
        let mode = config.mode_at_epoch(epoch);
        let epoch_seed = derive_path(seed, &[TAG_EPOCH_SHUFFLE, epoch as u64]);
        let batches = epoch_batches(&train_ds, config.batch_size, epoch_seed)?;
        let evals_before = mlp.grad_eval_count();
        let mut last_lr = 0.0;

        let timer = Instant::now();
        for (batch_index, batch_indices) in batches.iter().enumerate() {
            let lr = schedule.lr_at(global_step)?;
            last_lr = lr;
            let batch = train_ds.gather(batch_indices);
            let g = match mode {
                Mode::Vanilla => mlp.grad(&w, &batch)?,
                Mode::Sam => {
                    let cfg = SharpnessConfig::new(config.sharpness.rho, 1);
                    sam_gradient(&mlp, &w, &batch, &cfg)?
                }
                Mode::Msam => {
                    // A ragged final batch may be smaller than m.
                    let m_eff = config.sharpness.m.min(batch.len());
                    let partition_seed = derive_path(
                        seed,
                        &[TAG_PARTITION, epoch as u64, batch_index as u64],
                    );
                    let partition = partition_minibatch(batch.len(), m_eff, partition_seed)?;
                    msam_gradient(&mlp, &w, &batch, &partition, &config.sharpness)?
                }
            };
            optimizer.apply_update(&mut w, &g, lr)?;
            if !w.all_finite() {
                return Err(Error::NonFinite {
                    run_id,
                    seed,
                    epoch,
                    step: global_step,
                });
            }
            global_step += 1;
        }
        let epoch_wall_time_seconds = timer.elapsed().as_secs_f64();
        training_grad_evals += mlp.grad_eval_count() - evals_before;
        total_batches += batches.len() as u64;

        let train_loss = mlp.loss(&w, &train_ds.samples)?;
        if !train_loss.is_finite() {
            return Err(Error::NonFinite {
                run_id,
                seed,
                epoch,
                step: global_step,
            });
        }
        let train_accuracy = accuracy(&mlp, &w, &train_ds.samples);
        let test_accuracy = accuracy(&mlp, &w, &test_ds.samples);
        let mcc = if mlp.num_classes() == 2 {
            let preds = predictions(&mlp, &w, &test_ds.samples);
            let labels: Vec<usize> = test_ds.samples.iter().map(|s| s.label).collect();
            Some(matthews_corrcoef(&preds, &labels)?)
        } else {
            None
        };
        let lambda = if config.measure_lambda_max && epoch == config.epochs {
            let report = lambda_max(
                &mlp,
                &w,
                &train_ds.samples,
                &config.power_iteration,
                derive(seed, TAG_POWER_ITERATION),
            )?;
            Some(report.lambda_max)
        } else {
            None
        };

        records.push(TrainRecord {
            run_id: run_id.clone(),
            seed,
            epoch,
            mode_in_effect: mode,
            train_loss,
            train_accuracy,
            test_accuracy,
            mcc,
            lr: last_lr,
            epoch_wall_time_seconds,
            lambda_max: lambda,
        });

        if snapshot_epoch == Some(epoch) {
            snapshot_params = Some(w.clone());
        }
    }

    Ok(TrainOutcome {
        records,
        final_params: w,
        snapshot_params,
        training_grad_evals,
        total_batches,
    })
}
