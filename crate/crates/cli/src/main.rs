use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use spinchain_cli::commands::{self, PeakKind};
use spinchain_cli::config::RunConfig;
use spinchain_cli::{CliError, EXIT_OK};

/// Ground states, fidelity susceptibility and entanglement entropy of the
/// alternating AF-F Heisenberg chain.
#[derive(Parser)]
#[command(name = "spinchain", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `[run] output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for independent chain lengths (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Continue interrupted scans from their checkpoints.
    #[arg(long, global = true)]
    resume: bool,
}

#[derive(Subcommand)]
enum Command {
    /// One ground state at `[model] delta_f`.
    Ground,
    /// Scan `delta_f` for every configured chain length.
    Scan,
    /// Fit peak locations from scan summaries against 1/N.
    Fit {
        /// Which peak of the summaries to fit.
        #[arg(long, value_enum, default_value_t = Peak::Primary)]
        peak: Peak,
        /// Scan summary files (`scan_N*.summary`).
        files: Vec<PathBuf>,
    },
    /// Entropy against block length at fixed `delta_f`.
    EntropyProfile,
    /// Compare DMRG against exact diagonalization on small chains.
    Validate,
}

#[derive(Clone, Copy, ValueEnum)]
enum Peak {
    Primary,
    Susceptibility,
    Entropy,
}

impl From<Peak> for PeakKind {
    fn from(p: Peak) -> Self {
        match p {
            Peak::Primary => PeakKind::Primary,
            Peak::Susceptibility => PeakKind::Susceptibility,
            Peak::Entropy => PeakKind::Entropy,
        }
    }
}

fn required(config: Option<RunConfig>) -> Result<RunConfig, CliError> {
    config.ok_or_else(|| CliError::Usage("this command needs --config <path>".into()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = cli.config.as_deref().map(RunConfig::load).transpose()?;
    let workers = cli.workers.unwrap_or_else(|| {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    });
    match cli.command {
        Command::Ground => {
            let config = required(config)?;
            let out = commands::output_dir(Some(&config), cli.out.as_deref())?;
            let s = commands::with_writer(|w| commands::ground(&config, &out, w))?;
            print!("{}", s.render());
        }
        Command::Scan => {
            let config = required(config)?;
            let out = commands::output_dir(Some(&config), cli.out.as_deref())?;
            let all = commands::with_writer(|w| commands::scan(&config, &out, w, workers, cli.resume))?;
            for s in all {
                print!("{}", s.render());
            }
        }
        Command::Fit { peak, files } => {
            if files.len() < 2 {
                return Err(CliError::Usage(format!(
                    "fit needs at least 2 peak files, got {}",
                    files.len()
                )));
            }
            let out = commands::output_dir(config.as_ref(), cli.out.as_deref())?;
            let s = commands::with_writer(|w| commands::fit(&files, peak.into(), &out, w))?;
            print!("{}", s.render());
        }
        Command::EntropyProfile => {
            let config = required(config)?;
            let out = commands::output_dir(Some(&config), cli.out.as_deref())?;
            let s = commands::with_writer(|w| commands::entropy_profile(&config, &out, w))?;
            print!("{}", s.render());
        }
        Command::Validate => {
            let out = commands::output_dir(config.as_ref(), cli.out.as_deref())?;
            let s = commands::with_writer(|w| commands::validate(config.as_ref(), &out, w))?;
            print!("{}", s.render());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SPINCHAIN_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::from(EXIT_OK),
        Err(e) => {
            eprintln!("spinchain: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
