//! Command-line front end: trains the exploration policy, collects and
//! relabels demonstrations, trains diffusion policies and runs the
//! evaluation experiments.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "vfhand", version, about = "Variable-friction in-hand manipulation experiments")]
struct Cli {
    /// Master seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML config, or a run manifest to replay its resolved config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train the TD3+HER exploration policy in the randomized simulator.
    TrainRl(TrainRlArgs),
    /// Roll out a policy, filter and relabel, and save a demo dataset.
    Collect(CollectArgs),
    /// Train a diffusion policy under one data preset.
    TrainDp(TrainDpArgs),
    /// Evaluate a policy checkpoint over seeds x trials.
    Eval(EvalArgs),
    /// Co-train and real-only policies for several amounts of real data.
    AblateReal(AblateArgs),
    /// Train and evaluate every data preset on identical episodes.
    ComparePresets(CompareArgs),
    /// Write the pose sequence of one evaluation episode as CSV.
    ExportTraj(ExportArgs),
}

#[derive(Args, Debug)]
struct TrainRlArgs {
    /// Environment steps; overrides `rl.total_steps`.
    #[arg(long)]
    steps: Option<u64>,
    /// Disable hindsight relabelling (sets `rl.td3.her_k` to 0).
    #[arg(long)]
    no_her: bool,
}

#[derive(Args, Debug)]
struct CollectArgs {
    /// Actor checkpoint written by train-rl.
    #[arg(long)]
    policy: PathBuf,
    /// `sim` or `real`.
    #[arg(long)]
    domain: String,
    /// Demonstrations to keep after filtering.
    #[arg(long)]
    count: usize,
}

#[derive(Args, Debug)]
struct DataArgs {
    #[arg(long)]
    sim: PathBuf,
    #[arg(long)]
    real: PathBuf,
}

#[derive(Args, Debug)]
struct TrainDpArgs {
    #[command(flatten)]
    data: DataArgs,
    /// cotrain, simonly, realonly or finetune.
    #[arg(long, default_value = "cotrain")]
    preset: String,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Actor or diffusion policy checkpoint.
    #[arg(long)]
    policy: PathBuf,
}

#[derive(Args, Debug)]
struct AblateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_delimiter = ',', default_value = "0,100,200,300")]
    amounts: Vec<usize>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Real demonstrations used (a prefix of the real set).
    #[arg(long, default_value_t = 100)]
    real_amount: usize,
}

#[derive(Args, Debug)]
struct ExportArgs {
    #[arg(long)]
    policy: PathBuf,
    /// Evaluation seed of the episode.
    #[arg(long, default_value_t = 0)]
    eval_seed: u64,
    #[arg(long, default_value_t = 0)]
    trial: u64,
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            commands::report_error("usage", &e.to_string(), None);
            return ExitCode::from(2);
        }
    };
    let name = commands::verb(&cli.command);
    match commands::run(cli, argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            commands::report_error(commands::classify(&e), &format!("{e:#}"), Some(name));
            ExitCode::from(1)
        }
    }
}
