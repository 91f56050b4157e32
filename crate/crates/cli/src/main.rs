use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pcs_shaper::experiments::{report_checks, run};
use pcs_shaper::{default_paper_config, validate, CliError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "pcs-shaper", version, about = "Probabilistic constellation shaping for VLC wiretap channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a JSON config.
    Run {
        config: PathBuf,
        /// Output directory, replacing `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed for the solver starts and the Monte-Carlo runs.
        #[arg(long)]
        seed: Option<u64>,
        /// Number of solver starts.
        #[arg(long)]
        starts: Option<usize>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run the oracle suites at their default sizes.
    Validate {
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Print the default configuration as JSON.
    PaperConfig,
}

fn set_threads(threads: Option<usize>) -> Result<(), CliError> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            starts,
            threads,
        } => {
            set_threads(threads)?;
            let text = std::fs::read_to_string(&config)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", config.display())))?;
            let mut cfg = ExperimentConfig::from_json(&text)?;
            if let Some(dir) = out {
                cfg.output_dir = dir.to_string_lossy().into_owned();
            }
            if let Some(s) = seed {
                cfg.solver.seed = s;
                cfg.monte_carlo.seed = s;
                cfg.validation.seed = s;
            }
            if let Some(n) = starts {
                cfg.solver.n_starts = n;
            }
            for path in run(&cfg)? {
                eprintln!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Validate { threads } => {
            set_threads(threads)?;
            report_checks(&validate::run_all(&default_paper_config().validation))
        }
        Command::PaperConfig => {
            let mut out = std::io::stdout().lock();
            match writeln!(out, "{}", default_paper_config().to_json()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
                _ => Ok(()),
            }
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
