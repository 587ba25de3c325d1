//! The `sharpfield` command line: dataset synthesis, training, rendering,
//! evaluation and kernel inspection.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub mod commands;
pub mod config;
pub mod error;
pub mod spiral;

pub use config::{RunConfig, SpiralConfig};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "sharpfield",
    version,
    about = "Sharp radiance fields from blurred views"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a synthetic blurred dataset with sharp ground truth.
    Synth(Common),
    /// Fit the field, blur kernel and weight proposal to a dataset.
    Train(Common),
    /// Render sharp frames along a spiral or from a pose file.
    Render(Common),
    /// Score sharp renders against the dataset's ground truth.
    Eval(Common),
    /// Dump the learned rigid motions and composition weights.
    InspectKernel(Common),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Baseline {
    Naive,
}

#[derive(Clone, Debug, Default, Args)]
pub struct Common {
    /// `key = value` run configuration.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Directory receiving every output of the command.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[arg(long, value_name = "N")]
    pub iters: Option<usize>,
    /// Train the kernel without the adaptive weight proposal.
    #[arg(long)]
    pub disable_awp: bool,
    /// Train a plain radiance field on the blurred pixels.
    #[arg(long)]
    pub disable_kernel: bool,
    /// Evaluate as a baseline; `naive` expects a `--disable-kernel` checkpoint.
    #[arg(long, value_enum)]
    pub baseline: Option<Baseline>,
    /// Dataset directory, overriding the config's `dataset`.
    #[arg(long, value_name = "DIR")]
    pub dataset: Option<PathBuf>,
    /// Checkpoint directory, overriding the config's `checkpoint`.
    #[arg(long, value_name = "DIR")]
    pub checkpoint: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth(c) => commands::synth::run(&c),
        Command::Train(c) => commands::train::run(&c),
        Command::Render(c) => commands::render::run(&c),
        Command::Eval(c) => commands::eval::run(&c),
        Command::InspectKernel(c) => commands::inspect::run(&c),
    }
}
