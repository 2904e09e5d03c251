use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use jnrf_bench::PeakAlloc;
use jnrf_cli::{cmd_bench, cmd_evaluate, cmd_predict, cmd_stats, cmd_synth, cmd_train, CliError, RunConfig};

#[global_allocator]
static ALLOC: PeakAlloc = PeakAlloc;

#[derive(Parser)]
#[command(name = "jnrf", version, about = "Joint medication entity and relation extraction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// `key = value` run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory. For `synth` this is the corpus root.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic train/dev/test corpus.
    Synth,
    /// Train and keep the checkpoint with the best dev F1.
    Train,
    /// Write BRAT predictions for a directory of documents.
    Predict,
    /// Score predictions against gold annotations.
    Evaluate,
    /// Time and measure the standard systems across lengths.
    Bench,
    /// Corpus statistics.
    Stats,
    /// Print the effective configuration.
    Config,
}

fn run(cli: Cli) -> Result<String, CliError> {
    let mut config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    if let Some(out) = cli.out {
        match cli.command {
            Command::Synth => config.corpus = out,
            _ => config.out_dir = out,
        }
    }
    match cli.command {
        Command::Synth => cmd_synth(&config),
        Command::Train => cmd_train(&config),
        Command::Predict => cmd_predict(&config),
        Command::Evaluate => cmd_evaluate(&config),
        Command::Bench => cmd_bench(&config),
        Command::Stats => cmd_stats(&config),
        Command::Config => Ok(config.to_text()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("jnrf: {}", e.line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
