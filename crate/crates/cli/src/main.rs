use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mfl_cli::{execute, load_config, Command, EXIT_DIAGNOSTIC};

#[derive(Parser)]
#[command(name = "mfl", version, about = "Noisy particle gradient descent experiments and grid oracle")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides `output_dir` from the config.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Sub {
    /// NPGD on every configured seed.
    Run(Common),
    /// Annealed NPGD against noiseless PGD on paired seeds.
    AnnealCompare(Common),
    /// Grid Fokker-Planck solve with fixed point and convergence reports.
    Oracle(Common),
    /// Gibbs fixed point of the oracle block's constant temperature.
    FixedPoint(Common),
    /// Re-runs diagnostics on existing outputs.
    Diag(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, common) = match cli.command {
        Sub::Run(c) => (Command::Run, c),
        Sub::AnnealCompare(c) => (Command::AnnealCompare, c),
        Sub::Oracle(c) => (Command::Oracle, c),
        Sub::FixedPoint(c) => (Command::FixedPoint, c),
        Sub::Diag(c) => (Command::Diag, c),
    };
    let result = load_config(&common.config).and_then(|cfg| {
        let out = common.output_dir.clone().unwrap_or_else(|| cfg.output_dir.clone());
        execute(cmd, &cfg, &out, common.threads)
    });
    match result {
        Ok(outcome) => {
            let failed = outcome.failed();
            if failed.is_empty() {
                ExitCode::SUCCESS
            } else {
                eprintln!("diagnostic failure: {}", failed.join(", "));
                ExitCode::from(EXIT_DIAGNOSTIC as u8)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
