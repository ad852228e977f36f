//! `corrdyn`: render filled Julia and Multibrot sets of `w = (z^p)^(1/q) + c`,
//! locate Misiurewicz parameters, and run the similarity checks.
//!
//! Exit codes: 0 success, 1 numerical failure, 2 usage error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{FindArgs, JuliaArgs, MultibrotArgs, SimilarityArgs};

#[derive(Parser, Debug)]
#[command(name = "corrdyn", version, about, args_override_self = true)]
struct Cli {
    /// Worker threads for rendering and sweeps (default: logical cores).
    #[arg(long)]
    threads: Option<usize>,
    /// File of `key=value` lines supplying flags; explicit flags override it.
    /// Metadata sidecars (`<out>.meta`) can be passed here to repeat a run.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render the filled Julia set K_c to a 16-bit PGM.
    #[command(args_override_self = true)]
    RenderJulia(JuliaArgs),
    /// Render the Multibrot set M_{p,q} to a 16-bit PGM.
    #[command(args_override_self = true)]
    RenderMultibrot(MultibrotArgs),
    /// Locate a Misiurewicz parameter and write its report.
    #[command(args_override_self = true)]
    FindMisiurewicz(FindArgs),
    /// Similarity curves at a Misiurewicz parameter, written as CSV.
    #[command(args_override_self = true)]
    Similarity(SimilarityArgs),
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<corrdyn_core::Error> for Failure {
    fn from(e: corrdyn_core::Error) -> Self {
        use corrdyn_core::Error as E;
        match e {
            E::InvalidExponent { .. }
            | E::InvalidConfig(_)
            | E::InvalidWindow(_)
            | E::InvalidSigns(_)
            | E::Parse(_) => Failure::Usage(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let args = match config::expand_args(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        // clap prints usage and exits 2 on errors, 0 for --help/--version.
        Err(e) => e.exit(),
    };

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        pool = pool.num_threads(n);
    }
    if let Err(e) = pool.build_global() {
        eprintln!("error: cannot start worker pool: {e}");
        return ExitCode::from(1);
    }

    let result = match cli.command {
        Command::RenderJulia(a) => commands::render_julia(&a),
        Command::RenderMultibrot(a) => commands::render_multibrot(&a),
        Command::FindMisiurewicz(a) => commands::find_misiurewicz(&a),
        Command::Similarity(a) => commands::similarity(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
