mod commands;
mod grid;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use manifest::{FileDigest, RunManifest};

/// Streaming Bayesian inference for binary crowdsourcing.
#[derive(Debug, Parser)]
#[command(name = "sbic", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Aggregate a label CSV and optionally score it against gold labels.
    Infer(commands::InferArgs),
    /// Estimate error curves on synthetic crowds.
    Simulate(commands::SimulateArgs),
    /// Theoretical bound curves.
    Bounds(commands::BoundsArgs),
    /// Wall-clock cost per run on synthetic crowds.
    Bench(commands::BenchArgs),
    /// Re-run a command from its manifest and compare the outputs.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
struct ReplayArgs {
    #[arg(long)]
    manifest: PathBuf,
}

fn execute(command: &Command, args: Vec<String>) -> Result<RunManifest> {
    let start = Instant::now();
    let outcome = match command {
        Command::Infer(a) => commands::infer(a)?,
        Command::Simulate(a) => commands::simulate(a)?,
        Command::Bounds(a) => commands::bounds(a)?,
        Command::Bench(a) => commands::bench(a)?,
        Command::Replay(_) => bail!("replay cannot be replayed"),
    };
    let manifest = RunManifest {
        command: outcome.command.into(),
        args,
        cwd: std::env::current_dir()?,
        version: env!("CARGO_PKG_VERSION").into(),
        seed: outcome.seed,
        config: outcome.config,
        inputs: outcome.inputs.iter().map(|p| FileDigest::of(p)).collect::<Result<_>>()?,
        outputs: outcome.outputs.iter().map(|p| FileDigest::of(p)).collect::<Result<_>>()?,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    manifest.write(&outcome.manifest)?;
    Ok(manifest)
}

fn replay(args: &ReplayArgs) -> Result<()> {
    let old = RunManifest::read(&args.manifest)?;
    std::env::set_current_dir(&old.cwd).with_context(|| format!("entering {}", old.cwd.display()))?;
    for input in &old.inputs {
        if FileDigest::of(&input.path)? != *input {
            bail!("input {} changed since the recorded run", input.path.display());
        }
    }
    let cli = Cli::try_parse_from(&old.args).context("parsing recorded arguments")?;
    let new = execute(&cli.command, old.args.clone())?;
    let mut mismatches = 0;
    for (before, after) in old.outputs.iter().zip(&new.outputs) {
        let same = before == after;
        mismatches += !same as usize;
        println!("{} {}", if same { "identical" } else { "DIFFERS" }, before.path.display());
    }
    if old.outputs.len() != new.outputs.len() {
        bail!("output file lists differ");
    }
    if mismatches > 0 {
        bail!("{mismatches} output file(s) differ from the recorded run");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Replay(args) => replay(args),
        command => execute(command, std::env::args().collect()).map(|_| ()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
