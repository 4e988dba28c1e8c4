//! `singlab` command-line runner.

mod config;
mod error;
mod experiments;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::ExperimentConfig;
use error::{CliError, CliResult};
use experiments::{Context, ExperimentRegistry};

#[derive(Parser)]
#[command(name = "singlab", version, about = "Collision-singularity experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the equations of motion and detect collisions.
    Simulate(RunArgs),
    /// Minimize the discrete action between fixed or periodic ends.
    Minimize(RunArgs),
    /// Fit the Sundman–Sperling law near a collision.
    SundmanFit(RunArgs),
    /// Averaged displacement potential and action differentials.
    Averaging(RunArgs),
    /// Sample the structural assumptions of a potential.
    CheckAssumptions(RunArgs),
    /// Reduce a partial collision to a total one and fit it.
    ReducePartial(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    verbose: bool,
}

impl Command {
    fn split(&self) -> (&'static str, &RunArgs) {
        match self {
            Command::Simulate(a) => ("simulate", a),
            Command::Minimize(a) => ("minimize", a),
            Command::SundmanFit(a) => ("sundman-fit", a),
            Command::Averaging(a) => ("averaging", a),
            Command::CheckAssumptions(a) => ("check-assumptions", a),
            Command::ReducePartial(a) => ("reduce-partial", a),
        }
    }
}

fn run(command: &str, args: &RunArgs) -> CliResult<()> {
    let cfg = ExperimentConfig::load(&args.config)?;
    let registry = ExperimentRegistry::default();
    let experiment = registry.get(command)?;
    if let Some(name) = &cfg.experiment {
        if name != experiment.name() && name != experiment.command() {
            return Err(CliError::Config(format!("config is for `{name}`, not `{}`", experiment.name())));
        }
    }
    let ctx = Context { config: &cfg, seed: args.seed.or(cfg.seed).unwrap_or(0), verbose: args.verbose };
    ctx.note(format!("running `{}` from {}", experiment.name(), args.config.display()));
    let artifacts = experiment.run(&ctx)?;
    artifacts.write(&args.out)?;
    ctx.note(format!("wrote {}", args.out.display()));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = cli.command.split();
    match run(command, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = serde_json::json!({"error": e.class(), "message": e.message(), "exit_code": e.exit_code()});
            eprintln!("{report}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
