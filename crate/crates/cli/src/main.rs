//! `busched` command-line front end.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::Algorithm;

#[derive(Debug, Parser)]
#[command(name = "busched", version, about = "Multi-line bus scheduling toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a random instance.
    Gen(GenArgs),
    /// Derive an instance by deleting a fraction of an existing instance's departures.
    Derive(DeriveArgs),
    /// Train an offline policy.
    Train(ExperimentArgs),
    /// Train the online selection policy on top of a frozen offline policy.
    TrainOnline(TrainOnlineArgs),
    /// Run a policy or baseline and report N_u, T_d, N_d.
    Eval(EvalArgs),
    /// Run the online controller with and without a disruption.
    SimulateOnline(SimulateOnlineArgs),
    /// Train the arms of an ablation and write one learning curve per arm.
    Ablate(AblateArgs),
    /// Render a schedule as a Gantt-style SVG.
    Plot(PlotArgs),
    /// Check a schedule file against an instance.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Generator config (JSON); flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub lines: Option<usize>,
    #[arg(long)]
    pub departures: Option<usize>,
    #[arg(long)]
    pub fleet: Option<u32>,
    /// Extra share of buses on top of the smallest fleet greedy can cover with.
    #[arg(long)]
    pub margin: Option<f64>,
    #[arg(long)]
    pub deletion: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DeriveArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RewardArg {
    Combined,
    FinalOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

/// Settings shared by the experiment commands. Anything left unset comes from `--config`.
#[derive(Debug, Args, Default)]
pub struct ExperimentArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub instance: Option<PathBuf>,
    #[arg(long = "algo")]
    pub algorithm: Option<Algorithm>,
    #[arg(long)]
    pub reward: Option<RewardArg>,
    #[arg(long)]
    pub screening: Option<Switch>,
    #[arg(long)]
    pub episodes: Option<usize>,
    /// Repeatable.
    #[arg(long = "seed")]
    pub seeds: Vec<u64>,
    /// Defaults to $BUSCHED_OUT, then `out`.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainOnlineArgs {
    #[command(flatten)]
    pub common: ExperimentArgs,
    #[arg(long)]
    pub offline_model: Option<PathBuf>,
    #[arg(long)]
    pub window: Option<i32>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: ExperimentArgs,
    /// Trained parameters, required for ppo and reinforce.
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateOnlineArgs {
    #[arg(long)]
    pub instance: PathBuf,
    /// Online selection policy.
    #[arg(long)]
    pub model: PathBuf,
    /// Offline policy replayed by the planner; defaults to `--model`.
    #[arg(long)]
    pub offline_model: Option<PathBuf>,
    #[arg(long, default_value_t = 60)]
    pub window: i32,
    /// JSON list of travel-time overrides.
    #[arg(long, conflicts_with = "disrupt_start")]
    pub scenario: Option<PathBuf>,
    /// Start minute of an all-lines delay.
    #[arg(long)]
    pub disrupt_start: Option<i32>,
    #[arg(long, default_value_t = 190)]
    pub disrupt_length: i32,
    #[arg(long, default_value_t = 15)]
    pub extra: i32,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Arms {
    Reward,
    Screening,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub common: ExperimentArgs,
    #[arg(long)]
    pub arms: Arms,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub schedule: PathBuf,
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub schedule: PathBuf,
    #[arg(long)]
    pub instance: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        // usage errors exit 2, --help and --version exit 0
        Err(e) => e.exit(),
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match commands::run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
