//! Command-line interface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::commands::align::{align_human, align_robot, AlignOptions};
use crate::commands::analyze::{analyze, AnalyzeOptions};
use crate::commands::distill::{distill, DistillOptions};
use crate::commands::synth::{synth, SynthKind, SynthOptions};
use crate::commands::Status;
use crate::config::PipelineConfig;
use crate::error::Result;

#[derive(Debug, Parser)]
#[command(name = "embodi", version, about = "Cross-embodiment point clouds and transitive feature distillation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    /// Directory holding frames.jsonl and the images it references.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; output does not depend on this.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    Pairs,
    Scenes,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Replace the hand in human frames with the canonical gripper.
    AlignHuman(AlignArgs),
    /// Remove the arm from robot frames and re-render the gripper.
    AlignRobot {
        #[command(flatten)]
        common: AlignArgs,
        /// Occupancy inflation in meters.
        #[arg(long)]
        margin: Option<f64>,
        #[arg(long)]
        urdf: Option<PathBuf>,
        #[arg(long)]
        occupancy: Option<PathBuf>,
    },
    /// Two-stage distillation: human to pseudo-robot, then pseudo-robot to robot.
    Distill {
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Training dataset written by `synth-data --kind pairs`.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Similarity curves and PCA for trained encoders.
    Analyze {
        /// Directory written by `distill`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Defaults to <input>/heldout.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Write synthetic inputs.
    SynthData {
        #[arg(long, value_enum, default_value = "scenes")]
        kind: KindArg,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Scene frames per domain.
        #[arg(long, default_value_t = 10)]
        frames: usize,
    },
    /// Print the default configuration or validate a file.
    Config {
        #[arg(long, conflicts_with = "config")]
        print_defaults: bool,
        #[arg(long, required_unless_present = "print_defaults")]
        config: Option<PathBuf>,
    },
}

fn align_options(a: AlignArgs) -> AlignOptions {
    AlignOptions {
        input: a.input,
        output: a.output,
        config: a.config,
        seed: a.seed,
        jobs: a.jobs,
        ..Default::default()
    }
}

pub fn run(cli: Cli) -> Result<Status> {
    match cli.command {
        Command::AlignHuman(a) => align_human(&align_options(a)),
        Command::AlignRobot { common, margin, urdf, occupancy } => align_robot(&AlignOptions {
            margin,
            urdf,
            occupancy,
            ..align_options(common)
        }),
        Command::Distill { output, config, seed, input } => distill(&DistillOptions { output, config, seed, input }),
        Command::Analyze { input, output, dataset, config } => analyze(&AnalyzeOptions {
            input,
            dataset,
            output,
            config,
        }),
        Command::SynthData { kind, output, config, seed, frames } => synth(&SynthOptions {
            kind: match kind {
                KindArg::Pairs => SynthKind::Pairs,
                KindArg::Scenes => SynthKind::Scenes,
            },
            output,
            config,
            seed,
            frames,
        }),
        Command::Config { print_defaults, config } => {
            if print_defaults {
                print!("{}", PipelineConfig::defaults_toml());
            } else if let Some(path) = config {
                let cfg = PipelineConfig::load(&path)?;
                cfg.transitive()?;
                cfg.template()?;
                cfg.intrinsics()?;
                cfg.margin()?;
                cfg.jobs()?;
                println!("{}: ok", path.display());
            }
            Ok(Status::Success)
        }
    }
}
