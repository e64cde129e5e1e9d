use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use clutter_cli::{experiment, parse_config, Overrides};

/// Clutter map tracking experiments.
#[derive(Parser)]
#[command(name = "clutter", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate frames for replicate 0.
    Simulate(Common),
    /// Run inference on stored frames.
    Infer {
        #[command(flatten)]
        common: Common,
        /// Frames written by `simulate`.
        #[arg(long)]
        frames: PathBuf,
    },
    /// Stationary-process scenario with known ground truth.
    ScenarioA(Common),
    /// Scatterer map scenario with per-SNR maps and the coefficient sweep.
    ScenarioB(Common),
    /// Monte Carlo sweep only.
    Sweep(Common),
    /// Time initialisation and sweeps at scaled problem sizes.
    ProbeScaling(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    update_alpha: bool,
    #[arg(long)]
    iters: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<clutter_cli::ExperimentConfig> {
        let mut cfg = parse_config(&self.config)?;
        cfg.apply(&Overrides {
            seed: self.seed,
            replicates: self.replicates,
            out: self.out.clone(),
            update_alpha: self.update_alpha,
            iters: self.iters,
        })?;
        Ok(cfg)
    }
}

fn dispatch(cmd: Command) -> Result<PathBuf> {
    match cmd {
        Command::Simulate(c) => experiment::simulate(&c.load()?),
        Command::Infer { common, frames } => experiment::infer(&common.load()?, &frames),
        Command::ScenarioA(c) => experiment::scenario_a(&c.load()?),
        Command::ScenarioB(c) => experiment::scenario_b(&c.load()?),
        Command::Sweep(c) => experiment::sweep(&c.load()?),
        Command::ProbeScaling(c) => experiment::probe_scaling(&c.load()?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(dir) => {
            println!("wrote {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
