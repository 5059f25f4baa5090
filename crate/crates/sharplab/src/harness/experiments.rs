//! The four experiment patterns: head-to-head mode comparison, varying-m
//! sweep, hybrid switching, and runtime measurement.
//!
//! Seeds of one experiment run in parallel (runs share no mutable state and
//! results are collected in seed order); runtime measurement runs strictly
//! sequentially so that timings are not distorted by contention.

use rayon::prelude::*;

use super::metrics::{mean, sample_std};
use super::{train_one, Mode, RunConfig, StartMode, SwitchSpec, TrainOutcome, TrainRecord};
use crate::error::{Error, Result};

/// One row of the summary CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub experiment: String,
    pub mode: Mode,
    pub m: Option<usize>,
    pub switch_percent: Option<f64>,
    pub seed_count: usize,
    pub mean_test_acc: f64,
    pub std_test_acc: f64,
    pub mean_epoch_seconds: f64,
    pub lambda_max_mean: Option<f64>,
    pub lambda_max_std: Option<f64>,
}

/// Summary rows plus every per-epoch record that produced them.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub summary: Vec<SummaryRow>,
    pub records: Vec<TrainRecord>,
}

fn run_seeds(config: &RunConfig) -> Result<Vec<TrainOutcome>> {
    config
        .seeds
        .par_iter()
        .map(|&seed| train_one(config, seed))
        .collect()
}

fn final_record(outcome: &TrainOutcome) -> Result<&TrainRecord> {
    outcome
        .records
        .last()
        .ok_or_else(|| Error::Domain("run produced no epochs".into()))
}

fn summarize(
    experiment: &str,
    mode: Mode,
    m: Option<usize>,
    switch_percent: Option<f64>,
    outcomes: &[TrainOutcome],
) -> Result<SummaryRow> {
    let finals: Vec<f64> = outcomes
        .iter()
        .map(|o| final_record(o).map(|r| r.test_accuracy))
        .collect::<Result<_>>()?;
    let epoch_times: Vec<f64> = outcomes
        .iter()
        .flat_map(|o| o.records.iter().map(|r| r.epoch_wall_time_seconds))
        .collect();
    let lambdas: Vec<f64> = outcomes
        .iter()
        .filter_map(|o| o.records.last().and_then(|r| r.lambda_max))
        .collect();
    let (lambda_max_mean, lambda_max_std) = if lambdas.len() == outcomes.len() && !lambdas.is_empty()
    {
        (Some(mean(&lambdas)), Some(sample_std(&lambdas)))
    } else {
        (None, None)
    };
    Ok(SummaryRow {
        experiment: experiment.to_string(),
        mode,
        m,
        switch_percent,
        seed_count: outcomes.len(),
        mean_test_acc: mean(&finals),
        std_test_acc: sample_std(&finals),
        mean_epoch_seconds: mean(&epoch_times),
        lambda_max_mean,
        lambda_max_std,
    })
}

fn check_experiment_preconditions(config: &RunConfig) -> Result<()> {
    if config.seeds.is_empty() {
        return Err(Error::Domain("experiment needs at least one seed".into()));
    }
    if config.epochs == 0 {
        return Err(Error::Domain("experiment needs at least one epoch".into()));
    }
    Ok(())
}

fn m_column(config: &RunConfig, mode: Mode) -> Option<usize> {
    match mode {
        Mode::Vanilla => None,
        Mode::Sam => Some(1),
        Mode::Msam => Some(config.sharpness.m),
    }
}

/// Trains every mode over all seeds and reports mean ± sample std of the
/// final test accuracy per mode.
pub fn run_comparison(
    config: &RunConfig,
    modes: &[Mode],
    experiment: &str,
) -> Result<ExperimentResult> {
    check_experiment_preconditions(config)?;
    let mut summary = Vec::with_capacity(modes.len());
    let mut records = Vec::new();
    for &mode in modes {
        let mut c = config.clone();
        c.mode = mode;
        c.switch = None;
        if mode == Mode::Sam {
            c.sharpness.m = 1;
        }
        let outcomes = run_seeds(&c)?;
        summary.push(summarize(
            experiment,
            mode,
            m_column(config, mode),
            None,
            &outcomes,
        )?);
        records.extend(outcomes.into_iter().flat_map(|o| o.records));
    }
    Ok(ExperimentResult { summary, records })
}

/// One mSAM comparison per m value, fixed base config.
pub fn sweep_m(config: &RunConfig, m_values: &[usize]) -> Result<ExperimentResult> {
    check_experiment_preconditions(config)?;
    for &m in m_values {
        if m == 0 || m > config.batch_size {
            return Err(Error::Domain(format!(
                "sweep m = {m} out of range for batch size {}",
                config.batch_size
            )));
        }
    }
    let mut summary = Vec::with_capacity(m_values.len());
    let mut records = Vec::new();
    for &m in m_values {
        let mut c = config.clone();
        c.mode = Mode::Msam;
        c.switch = None;
        c.sharpness.m = m;
        let outcomes = run_seeds(&c)?;
        summary.push(summarize("sweep_m", Mode::Msam, Some(m), None, &outcomes)?);
        records.extend(outcomes.into_iter().flat_map(|o| o.records));
    }
    Ok(ExperimentResult { summary, records })
}

/// Hybrid-switching grid over (start mode, switch percent). Switching only
/// changes the per-batch gradient rule; optimizer state, schedule and seed
/// streams continue uninterrupted.
pub fn run_switch_experiment(
    config: &RunConfig,
    switch_percents: &[f64],
    start_modes: &[StartMode],
) -> Result<ExperimentResult> {
    check_experiment_preconditions(config)?;
    for &p in switch_percents {
        if !(0.0..=100.0).contains(&p) {
            return Err(Error::Domain(format!(
                "switch percent {p} out of range [0, 100]"
            )));
        }
    }
    let mut summary = Vec::new();
    let mut records = Vec::new();
    for &start in start_modes {
        for &percent in switch_percents {
            let mut c = config.clone();
            c.mode = start.first();
            c.switch = Some(SwitchSpec {
                start_mode: start,
                switch_percent: percent,
            });
            let outcomes = run_seeds(&c)?;
            summary.push(summarize(
                "switch",
                start.first(),
                Some(config.sharpness.m),
                Some(percent),
                &outcomes,
            )?);
            records.extend(outcomes.into_iter().flat_map(|o| o.records));
        }
    }
    Ok(ExperimentResult { summary, records })
}

/// Per-mode wall-time statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct RuntimeRow {
    pub mode: Mode,
    pub epochs_measured: usize,
    pub mean_epoch_seconds: f64,
    pub std_epoch_seconds: f64,
    /// Measured gradient evaluations per batch (1 vanilla, 2 SAM, 2m mSAM).
    pub grad_evals_per_batch: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuntimeReport {
    pub rows: Vec<RuntimeRow>,
    pub msam_over_sam: Option<f64>,
    pub sam_over_vanilla: Option<f64>,
}

/// Measures mean ± std of epoch wall time per mode after one excluded
/// warmup epoch, on the first configured seed, strictly sequentially.
pub fn measure_runtime(config: &RunConfig, modes: &[Mode]) -> Result<RuntimeReport> {
    check_experiment_preconditions(config)?;
    if config.epochs < 4 {
        return Err(Error::Domain(
            "runtime measurement needs at least 4 epochs (1 warmup + 3 measured)".into(),
        ));
    }
    let seed = config.seeds[0];
    let mut rows = Vec::with_capacity(modes.len());
    for &mode in modes {
        let mut c = config.clone();
        c.mode = mode;
        c.switch = None;
        c.measure_lambda_max = false;
        if mode == Mode::Sam {
            c.sharpness.m = 1;
        }
        let outcome = train_one(&c, seed)?;
        let times: Vec<f64> = outcome.records[1..]
            .iter()
            .map(|r| r.epoch_wall_time_seconds)
            .collect();
        rows.push(RuntimeRow {
            mode,
            epochs_measured: times.len(),
            mean_epoch_seconds: mean(&times),
            std_epoch_seconds: sample_std(&times),
            grad_evals_per_batch: outcome.training_grad_evals as f64
                / outcome.total_batches as f64,
        });
    }
    let time_of = |m: Mode| {
        rows.iter()
            .find(|r| r.mode == m)
            .map(|r| r.mean_epoch_seconds)
    };
    let ratio = |num: Option<f64>, den: Option<f64>| match (num, den) {
        (Some(n), Some(d)) if d > 0.0 => Some(n / d),
        _ => None,
    };
    Ok(RuntimeReport {
        msam_over_sam: ratio(time_of(Mode::Msam), time_of(Mode::Sam)),
        sam_over_vanilla: ratio(time_of(Mode::Sam), time_of(Mode::Vanilla)),
        rows,
    })
}
