//! `vibspeech`: synthesize sustained-phonation subjects, simulate the radar,
//! map speech onto neck displacement and score the result.
//!
//! Exit status is 0 on success, 1 for usage errors and out-of-range
//! parameters, and 2 for missing or unusable data.

mod commands;
mod config;
mod subjects;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use commands::Context;
use config::{RunConfig, UsageError};

#[derive(Debug, Parser)]
#[command(name = "vibspeech", version, about = "Speech and radar neck-vibration co-simulation")]
struct Cli {
    /// Seed for all random draws.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; all cores when omitted.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    jobs: Option<u16>,
    /// JSON run configuration. Flags take precedence over its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize one subject or a seeded cohort.
    Synth(commands::synth::SynthArgs),
    /// Measure each subject's neck displacement through the simulated radar.
    Radar(commands::radar::RadarArgs),
    /// Map speech onto neck displacement.
    Transform(commands::transform::TransformArgs),
    /// Score a cohort and write summary reports.
    Evaluate(commands::evaluate::EvaluateArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let ctx = Context {
        seed: cli.seed,
        config: RunConfig::load(cli.config.as_deref())?,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.map_or(0, usize::from))
        .build()?;
    pool.install(|| match &cli.command {
        Command::Synth(args) => commands::synth::run(args, &ctx),
        Command::Radar(args) => commands::radar::run(args, &ctx),
        Command::Transform(args) => commands::transform::run(args, &ctx),
        Command::Evaluate(args) => commands::evaluate::run(args, &ctx),
    })
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let usage = err.chain().any(|cause| {
        cause.is::<UsageError>()
            || matches!(
                cause.downcast_ref::<vibspeech::Error>(),
                Some(vibspeech::Error::InvalidParameter { .. })
            )
    });
    if usage {
        1
    } else {
        2
    }
}
