//! CSV emission. Comma-separated, header row, UTF-8, '.' decimal separator,
//! line-feed newlines; empty cells for absent optional values.

use std::fs;
use std::path::Path;

use super::{RuntimeReport, SummaryRow, TrainRecord};
use crate::error::Result;

pub const SUMMARY_HEADER: &str = "experiment,mode,m,switch_percent,seed_count,mean_test_acc,std_test_acc,mean_epoch_seconds,lambda_max_mean,lambda_max_std";
pub const EPOCH_HEADER: &str =
    "run_id,seed,epoch,mode_in_effect,train_loss,train_acc,test_acc,mcc,lr,epoch_seconds";
pub const RUNTIME_HEADER: &str =
    "mode,epochs_measured,mean_epoch_seconds,std_epoch_seconds,msam_over_sam,sam_over_vanilla";

fn opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(String::new, ToString::to_string)
}

pub fn summary_csv_string(rows: &[SummaryRow]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.experiment,
            r.mode,
            opt(&r.m),
            opt(&r.switch_percent),
            r.seed_count,
            r.mean_test_acc,
            r.std_test_acc,
            r.mean_epoch_seconds,
            opt(&r.lambda_max_mean),
            opt(&r.lambda_max_std),
        ));
    }
    out
}

pub fn epoch_csv_string(records: &[TrainRecord]) -> String {
    let mut out = String::from(EPOCH_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.run_id,
            r.seed,
            r.epoch,
            r.mode_in_effect,
            r.train_loss,
            r.train_accuracy,
            r.test_accuracy,
            opt(&r.mcc),
            r.lr,
            r.epoch_wall_time_seconds,
        ));
    }
    out
}

pub fn runtime_csv_string(report: &RuntimeReport) -> String {
    let mut out = String::from(RUNTIME_HEADER);
    out.push('\n');
    for r in &report.rows {
        let msam_ratio = match r.mode {
            super::Mode::Msam => opt(&report.msam_over_sam),
            _ => String::new(),
        };
        let sam_ratio = match r.mode {
            super::Mode::Sam => opt(&report.sam_over_vanilla),
            _ => String::new(),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.mode,
            r.epochs_measured,
            r.mean_epoch_seconds,
            r.std_epoch_seconds,
            msam_ratio,
            sam_ratio,
        ));
    }
    out
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    fs::write(path, summary_csv_string(rows))?;
    Ok(())
}

pub fn write_epoch_csv(path: &Path, records: &[TrainRecord]) -> Result<()> {
    fs::write(path, epoch_csv_string(records))?;
    Ok(())
}

pub fn write_runtime_csv(path: &Path, report: &RuntimeReport) -> Result<()> {
    fs::write(path, runtime_csv_string(report))?;
    Ok(())
}
