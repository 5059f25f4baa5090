//! Command-line front end: parse a config, dispatch one experiment, write
//! CSVs. Data paths go to standard output, diagnostics to standard error.
//! Exit codes: 0 success, 1 usage error, 2 runtime failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{parse_config_with_overrides, LabConfig};
use crate::error::Result;
use crate::harness::{
    measure_runtime, run_comparison, run_switch_experiment, sweep_m, write_epoch_csv,
    write_runtime_csv, write_summary_csv, ExperimentResult,
};

#[derive(Parser)]
#[command(
    name = "sharplab",
    about = "Sharpness-aware training experiments: mode comparisons, micro-batch sweeps, hybrid switching, Hessian diagnostics and runtime measurement",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compare training modes head to head (mean ± std over seeds)
    Train(CommonArgs),
    /// Sweep the number of micro-batches m
    #[command(name = "sweep-m")]
    SweepM(CommonArgs),
    /// Hybrid switching grid over start modes and switch percents
    Switch(CommonArgs),
    /// Compare modes and measure the dominant Hessian eigenvalue
    Sharpness(CommonArgs),
    /// Measure per-epoch wall time per mode
    Runtime(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the config file
    #[arg(long)]
    config: PathBuf,
    /// Directory for the emitted CSV files
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Comma-separated run seeds; replaces the config's seed list
    #[arg(long)]
    seeds: Option<String>,
    /// section.key=value applied after the config file (repeatable)
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl CommonArgs {
    fn load(&self) -> Result<LabConfig> {
        let text = fs::read_to_string(&self.config)?;
        let mut overrides = self.overrides.clone();
        if let Some(seeds) = &self.seeds {
            overrides.push(format!("run.seeds={seeds}"));
        }
        parse_config_with_overrides(&text, &overrides)
    }
}

fn write_experiment_csvs(out: &Path, result: &ExperimentResult) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out)?;
    let summary = out.join("summary.csv");
    let epochs = out.join("epochs.csv");
    write_summary_csv(&summary, &result.summary)?;
    write_epoch_csv(&epochs, &result.records)?;
    Ok(vec![summary, epochs])
}

fn dispatch(command: &Command) -> Result<Vec<PathBuf>> {
    match command {
        Command::Train(args) => {
            let cfg = args.load()?;
            let result = run_comparison(&cfg.run, &cfg.modes, "train")?;
            write_experiment_csvs(&args.out, &result)
        }
        Command::SweepM(args) => {
            let cfg = args.load()?;
            let result = sweep_m(&cfg.run, &cfg.m_values)?;
            write_experiment_csvs(&args.out, &result)
        }
        Command::Switch(args) => {
            let cfg = args.load()?;
            let result = run_switch_experiment(&cfg.run, &cfg.switch_percents, &cfg.start_modes)?;
            write_experiment_csvs(&args.out, &result)
        }
        Command::Sharpness(args) => {
            let mut cfg = args.load()?;
            cfg.run.measure_lambda_max = true;
            let result = run_comparison(&cfg.run, &cfg.modes, "sharpness")?;
            write_experiment_csvs(&args.out, &result)
        }
        Command::Runtime(args) => {
            let cfg = args.load()?;
            let report = measure_runtime(&cfg.run, &cfg.modes)?;
            fs::create_dir_all(&args.out)?;
            let path = args.out.join("runtime.csv");
            write_runtime_csv(&path, &report)?;
            Ok(vec![path])
        }
    }
}

/// Parses `argv` and runs one experiment. Returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            eprint!("{e}");
            return 1;
        }
    };

    // Config problems (missing file, bad keys) are usage errors.
    let config_result = match &cli.command {
        Command::Train(a)
        | Command::SweepM(a)
        | Command::Switch(a)
        | Command::Sharpness(a)
        | Command::Runtime(a) => a.load(),
    };
    if let Err(e) = config_result {
        eprintln!("sharplab: {e}");
        return 1;
    }

    match dispatch(&cli.command) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("sharplab: {e}");
            2
        }
    }
}
