//! Command-line front end: runs BER experiments and dumps channel fixtures.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use log::info;
use onebit_irs::baselines::Scheme;
use onebit_irs::harness::{channel_dump, run_experiment, write_csv, ExperimentConfig};

#[derive(Debug, Parser)]
#[command(
    name = "onebit-irs",
    version,
    about = "One-bit precoding with IRS phase design: BER experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a Monte-Carlo experiment and write the BER table as CSV.
    Run {
        /// Experiment configuration (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated scheme identifiers, e.g. `onebit-md,zf-quant-noirs`.
        #[arg(long)]
        schemes: Option<String>,
        #[arg(long)]
        threads: Option<usize>,
        /// Write zeros in the runtime column.
        #[arg(long)]
        deterministic_csv: bool,
        /// Also write the timing report to this file.
        #[arg(long)]
        timing_out: Option<PathBuf>,
    },
    /// Channel fixtures.
    Fixtures {
        #[command(subcommand)]
        command: FixtureCommand,
    },
    /// Print the default configuration as JSON.
    DefaultConfig,
}

#[derive(Debug, Subcommand)]
enum FixtureCommand {
    /// Emit one channel realization as JSON.
    Dump {
        /// Experiment configuration (JSON); defaults are used when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Realization index.
        #[arg(long, default_value_t = 0)]
        channel: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Output path; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::from_path(path).with_context(|| format!("reading config {}", path.display()))
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            schemes,
            threads,
            deterministic_csv,
            timing_out,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(list) = schemes {
                cfg.schemes = Scheme::parse_list(&list)?;
            }
            if threads.is_some() {
                cfg.threads = threads;
            }
            cfg.deterministic_csv |= deterministic_csv;
            let start = Instant::now();
            let result = run_experiment(&cfg)?;
            info!("experiment finished in {:.3?}", start.elapsed());
            let file = File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            write_csv(&result.records, BufWriter::new(file), cfg.deterministic_csv)?;
            let report = result.timing_report();
            eprint!("{report}");
            if let Some(path) = timing_out {
                std::fs::write(&path, report.to_string()).with_context(|| format!("writing {}", path.display()))?;
            }
        }
        Command::Fixtures {
            command:
                FixtureCommand::Dump {
                    config,
                    channel,
                    seed,
                    out,
                },
        } => {
            let mut cfg = match config {
                Some(path) => load_config(&path)?,
                None => ExperimentConfig::default(),
            };
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let json = channel_dump(&cfg, channel)?.to_json()?;
            match out {
                Some(path) => std::fs::write(&path, json).with_context(|| format!("writing {}", path.display()))?,
                None => writeln!(io::stdout(), "{json}")?,
            }
        }
        Command::DefaultConfig => {
            writeln!(io::stdout(), "{}", ExperimentConfig::default().to_json()?)?;
        }
    }
    Ok(())
}
