// SPDX-License-Identifier: Apache-2.0

//! `irdrop` command-line front end.

mod commands;
mod config;
mod corpus;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

#[derive(Debug)]
pub struct CliError(String);

impl CliError {
    pub fn new(msg: impl Into<String>) -> Self {
        Self(msg.into())
    }
}

impl From<irdrop::Error> for CliError {
    fn from(e: irdrop::Error) -> Self {
        Self(e.to_string())
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Parser)]
#[command(
    name = "irdrop",
    version,
    about = "Vectored dynamic IR-drop prediction and worst-case slice profiling"
)]
struct Cli {
    /// TOML file with one table per subcommand; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus of designs and switching vectors.
    Gen(GenArgs),
    /// Solve the power grid for golden per-instance labels.
    Golden(GoldenArgs),
    /// Write feature volumes and instance features.
    Extract(ExtractArgs),
    /// Train a model.
    Train(TrainArgs),
    /// Predict per-instance IR drop for every slice.
    Infer(InferArgs),
    /// Rank the slices of a vector by predicted worst-case drop.
    Profile(ProfileArgs),
    /// Compare predictions with golden labels.
    Eval(EvalArgs),
    /// Render a per-instance IR file as a tile heatmap.
    Plot(PlotArgs),
}

macro_rules! settings {
    ($(#[$meta:meta])* $name:ident { $($(#[$fmeta:meta])* $field:ident : $ty:ty),* $(,)? }) => {
        $(#[$meta])*
        #[derive(Args, Serialize, Deserialize, Debug, Default)]
        pub struct $name {
            $(
                $(#[$fmeta])*
                #[serde(default, skip_serializing_if = "Option::is_none")]
                pub $field: Option<$ty>,
            )*
        }
    };
}

settings!(GenArgs {
    /// Output corpus directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    designs: usize,
    /// Slices per design.
    #[arg(long)]
    slices: usize,
    #[arg(long)]
    instances: usize,
    /// Chip width, µm.
    #[arg(long)]
    width: f64,
    /// Chip length, µm.
    #[arg(long)]
    length: f64,
    #[arg(long)]
    vias: usize,
    #[arg(long)]
    cycles: usize,
    #[arg(long)]
    steps_per_cycle: usize,
    #[arg(long)]
    toggle_rate: f64,
    #[arg(long)]
    clustering: f64,
});

settings!(GoldenArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Labels from a fixed linear rule over the features instead of the grid.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    planted: bool,
});

settings!(ExtractArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
});

settings!(TrainArgs {
    #[arg(long)] corpus: PathBuf,
    /// Weights file to write.
    #[arg(long)] out: PathBuf,
    /// Design left out of training.
    #[arg(long)] held_out: String,
    /// `temporal3d` or `flat2d`.
    #[arg(long)] variant: String,
    #[arg(long)] epochs: usize,
    #[arg(long)] lr: f64,
    #[arg(long)] lambda: f64,
    #[arg(long)] batch_size: usize,
    #[arg(long)] patience: usize,
    #[arg(long)] seed: u64,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")] augment: bool,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")] head_bias: bool,
    /// Encoder widths, four comma-separated values.
    #[arg(long, value_delimiter = ',')] encoder: Vec<usize>,
    /// First three decoder widths.
    #[arg(long, value_delimiter = ',')] decoder: Vec<usize>,
});

settings!(InferArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    weights: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Only this design.
    #[arg(long)]
    design: String,
});

settings!(ProfileArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    design: String,
    #[arg(long)]
    weights: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    n_a: usize,
    #[arg(long)]
    n_r: usize,
    #[arg(long)]
    n_o: usize,
    /// Region edge, µm.
    #[arg(long)]
    region_size: f64,
    /// `max` marks every region whose maximum a pick attains; `won` only the won one.
    #[arg(long)]
    coverage: String,
    #[arg(long)]
    cache_capacity: usize,
});

settings!(EvalArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    design: String,
    /// Directory written by `infer`.
    #[arg(long)]
    pred: PathBuf,
    /// Label directory; defaults to the corpus labels.
    #[arg(long)]
    golden: PathBuf,
    /// Hotspot threshold, V.
    #[arg(long)]
    threshold: f64,
    #[arg(long)]
    out: PathBuf,
});

settings!(PlotArgs {
    #[arg(long)] corpus: PathBuf,
    #[arg(long)] design: String,
    /// Per-instance IR CSV.
    #[arg(long)] ir: PathBuf,
    /// Output stem; `.csv` and `.ppm` are appended.
    #[arg(long)] out: PathBuf,
    /// Tiles per heatmap cell edge.
    #[arg(long)] block: usize,
    /// Colour scale `min,max` in volts; defaults to the data range.
    #[arg(long, value_delimiter = ',')] scale: Vec<f64>,
});

fn run(cli: Cli) -> Result<(), CliError> {
    let file = config::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Gen(a) => commands::gen(config::resolve(a, &file, "gen")?),
        Command::Golden(a) => commands::golden(config::resolve(a, &file, "golden")?),
        Command::Extract(a) => commands::extract(config::resolve(a, &file, "extract")?),
        Command::Train(a) => commands::train(config::resolve(a, &file, "train")?),
        Command::Infer(a) => commands::infer(config::resolve(a, &file, "infer")?),
        Command::Profile(a) => commands::profile(config::resolve(a, &file, "profile")?),
        Command::Eval(a) => commands::eval(config::resolve(a, &file, "eval")?),
        Command::Plot(a) => commands::plot(config::resolve(a, &file, "plot")?),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
