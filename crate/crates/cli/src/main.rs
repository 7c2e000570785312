//! Experiment driver: single minimizations, eps-sweeps, renormalized-energy
//! landscapes, core-constant ladders, and field-dump analysis.

mod commands;
mod config;
mod dump;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "nemslab", version, about = "Thin-slab nematic director experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads for parallel sections (0 = library default).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Minimize the slab energy for a single parameter point.
    Minimize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run an eps-sweep on a linear schedule and compare against the
    /// renormalized-energy + core-constant prediction.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Renormalized-energy landscape and optimum for a defect count.
    Renormalized {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Core cell-problem ladder: gamma(sigma, eps) and the core constant.
    Core {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Re-analyze a field dump: energies, coupling checks, defects.
    Analyze {
        /// Path to a field dump written by `minimize` or `sweep`.
        dump: PathBuf,
        #[arg(long)]
        out: Option<String>,
        /// Also run the sharper coupling check with this constant.
        #[arg(long)]
        c_star: Option<f64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("warning: could not set thread count: {e}");
        }
    }
    let code = match cli.command {
        Command::Minimize { config, out, seed } => commands::minimize(&config, out, seed),
        Command::Sweep { config, out, seed } => commands::sweep(&config, out, seed),
        Command::Renormalized { config, out, seed } => commands::renormalized(&config, out, seed),
        Command::Core { config, out, seed } => commands::core(&config, out, seed),
        Command::Analyze { dump, out, c_star } => commands::analyze(&dump, out, c_star),
    };
    match code {
        Ok(c) => ExitCode::from(c),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
