use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use swift_cli::commands;
use swift_cli::{CliError, CliResult};
use swift_core::data::SynthParams;

/// Wavelet-domain forecaster: train, evaluate, predict and inspect models.
#[derive(Parser)]
#[command(name = "swift", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model from a key=value run configuration.
    Train {
        config: PathBuf,
        /// Override a configuration entry (repeatable), e.g. `--set train.epochs=5`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Report validation and test metrics of a checkpoint.
    Eval {
        checkpoint: PathBuf,
        /// Override a data.* entry of the stored configuration.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Forecast the steps following the end of a CSV file.
    Predict {
        checkpoint: PathBuf,
        input: PathBuf,
        output: PathBuf,
    },
    /// Compare the heads of a shared-head and a split-head checkpoint.
    Analyze {
        share: PathBuf,
        split: PathBuf,
        out_dir: PathBuf,
    },
    /// Write a synthetic non-stationary series as CSV.
    Synth {
        output: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        len: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = SynthParams::default().f0)]
        f0: f64,
        #[arg(long, default_value_t = SynthParams::default().f1)]
        f1: f64,
        #[arg(long, default_value_t = SynthParams::default().amp_slope)]
        amp_slope: f64,
        #[arg(long, default_value_t = SynthParams::default().shift)]
        shift: f64,
        #[arg(long, default_value_t = SynthParams::default().noise_std)]
        noise_std: f64,
    },
    /// Print parameter and multiply-accumulate counts of a model configuration.
    Count {
        /// Configuration file; only model.* entries are read.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Train every combination of a grid file on top of a base configuration.
    Grid {
        config: PathBuf,
        /// Lines of `key=v1,v2,...`.
        grid: PathBuf,
        /// Runs trained concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("SWIFT_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("SWIFT_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot configure worker pool: {e}")))
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Train { config, overrides } => {
            commands::cmd_train_file(&config, &overrides, &mut out)?;
        }
        Command::Eval { checkpoint, overrides } => {
            commands::cmd_eval(&checkpoint, &overrides, &mut out)?;
        }
        Command::Predict {
            checkpoint,
            input,
            output,
        } => {
            commands::cmd_predict(&checkpoint, &input, &output, &mut out)?;
        }
        Command::Analyze { share, split, out_dir } => {
            commands::cmd_analyze(&share, &split, &out_dir, &mut out)?;
        }
        Command::Synth {
            output,
            len,
            seed,
            f0,
            f1,
            amp_slope,
            shift,
            noise_std,
        } => {
            let params = SynthParams {
                f0,
                f1,
                amp_slope,
                shift,
                noise_std,
            };
            commands::cmd_synth(len, seed, &params, &output, &mut out)?;
        }
        Command::Count { config, overrides } => {
            let kv = commands::count_kv(config.as_deref(), &overrides)?;
            commands::cmd_count(kv, &mut out)?;
        }
        Command::Grid { config, grid, jobs } => {
            commands::cmd_grid(&config, &grid, jobs, &mut out)?;
        }
    }
    out.flush().map_err(|e| CliError::io("<stdout>", e))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let first = e.to_string();
            let first = first.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            let err = CliError::Usage(first.to_string());
            eprintln!("{}", err.render());
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.render());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
