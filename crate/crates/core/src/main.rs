use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "msl", version, about = "Learn point detectors from point annotations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic dataset described by the config.
    Gen {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Learn under a single decoder.
    Learn {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// `careless` or `careful:SIGMA`; defaults to the first grid entry.
        #[arg(long)]
        decoder: Option<String>,
    },
    /// Learn under every decoder in the grid and keep the best.
    Loop {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Evaluate a run's selected solution on the test split.
    Test {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the candidate table of a run and write it as CSV.
    Report {
        #[arg(long)]
        run: PathBuf,
    },
}

fn run(cli: Cli) -> msl::Result<()> {
    use msl::cli::*;
    match cli.command {
        Command::Gen { config, out } => {
            let dir = cmd_gen(&config, out.as_deref())?;
            println!("{}", dir.display());
        }
        Command::Learn { config, data, out, decoder } => {
            let dir = cmd_learn(&config, data.as_deref(), out.as_deref(), decoder.as_deref())?;
            println!("{}", dir.display());
        }
        Command::Loop { config, data, out, workers } => {
            let dir = cmd_loop(&config, data.as_deref(), out.as_deref(), workers)?;
            println!("{}", dir.display());
        }
        Command::Test { run, data, out } => {
            let (path, report) = cmd_test(&run, &data, out.as_deref())?;
            println!("{}: f1 {:.4} (precision {:.4}, recall {:.4})", path.display(), report.f1, report.precision, report.recall);
        }
        Command::Report { run } => print!("{}", cmd_report(&run)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MSL_LOG", "error")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
