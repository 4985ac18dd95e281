use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use coarse_roe::cli::{run, Command, ExperimentConfig};

#[derive(Parser)]
#[command(name = "coarse-roe", version, about = "Finite-scale Cartan pairs, coarse reconstruction and rigidity experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for report.json and CSV tables.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Overrides the seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for the parallel parts.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Check the exotic Cartan subalgebra on the squares space.
    VerifyCartan,
    /// Rebuild a coarse structure from its band algebra.
    Reconstruct,
    /// Split an entourage into partial translations.
    Decompose,
    /// Recover the bijection behind a conjugating unitary.
    Recover,
    /// Band-approximation and norm-localisation profiles of a unitary.
    Profile,
}

impl From<Cmd> for Command {
    fn from(cmd: Cmd) -> Self {
        match cmd {
            Cmd::VerifyCartan => Command::VerifyCartan,
            Cmd::Reconstruct => Command::Reconstruct,
            Cmd::Decompose => Command::Decompose,
            Cmd::Recover => Command::Recover,
            Cmd::Profile => Command::Profile,
        }
    }
}

fn execute(cli: &Cli) -> Result<i32> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path).with_context(|| format!("reading {}", path.display()))?,
        None => ExperimentConfig::from_json(r#"{"seed": 0, "space": {"kind": "interval", "size": 16}}"#)?,
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let outcome = run(cli.command.into(), &config, &cli.out)?;
    for file in &outcome.files {
        println!("{}", file.display());
    }
    Ok(outcome.status.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
