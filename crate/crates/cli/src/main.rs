use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dfs_cli::cache::SystemCache;
use dfs_cli::commands::{self, CliError, CliResult, CompareOptions};
use dfs_cli::config::ExperimentConfig;

/// Derivative-free superiorization experiments.
///
/// Experiment settings come from a `key = value` config file and can be
/// overridden with trailing `--key value` pairs. Generated systems are cached
/// in the directory named by DFS_CACHE_DIR (default `.dfs-cache`).
#[derive(Parser)]
#[command(name = "dfs", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Experiment {
    /// Config file; built-in defaults apply when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Skip the system cache.
    #[arg(long)]
    no_cache: bool,
    /// `--key value` overrides for config keys.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "OVERRIDES")]
    overrides: Vec<String>,
}

impl Experiment {
    fn resolve(&self) -> CliResult<(ExperimentConfig, SystemCache)> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        config.apply_overrides(&self.overrides)?;
        config.validate()?;
        let cache = if self.no_cache { SystemCache::disabled() } else { SystemCache::from_env() };
        Ok((config, cache))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate the constraint system and phantom only.
    Generate(Experiment),
    /// Run an experiment and write its trace, images, curve and summary.
    Run(Experiment),
    /// Decide whether trace A is better targeted than trace B.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// First iterate of both slices.
        #[arg(long, default_value_t = 1)]
        lo: usize,
        /// Last iterate of both slices (default: each trace's last).
        #[arg(long)]
        hi: Option<usize>,
        /// Uniform check points in addition to the curve breakpoints.
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        /// Draw proximity increasing from left to right.
        #[arg(long)]
        flip: bool,
        /// Directory for the overlay plot and report.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Summarize a system file, or the cached system of a config.
    Inspect {
        /// A system file written by `generate`.
        #[arg(long)]
        file: Option<PathBuf>,
        #[command(flatten)]
        experiment: Experiment,
    },
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Generate(exp) => {
            let (config, cache) = exp.resolve()?;
            let out = commands::generate(&config, &cache)?;
            println!("wrote {}", out.display());
        }
        Command::Run(exp) => {
            let (config, cache) = exp.resolve()?;
            let summary = commands::run(&config, &cache)?;
            print!("{}", summary.text);
            println!("wrote {}", summary.output.display());
        }
        Command::Compare { a, b, lo, hi, samples, flip, output } => {
            let cmp = commands::compare(&a, &b, &CompareOptions { lo, hi, samples, flip, output })?;
            println!("{cmp}");
        }
        Command::Inspect { file: Some(path), .. } => print!("{}", commands::inspect_file(&path)?),
        Command::Inspect { file: None, experiment } => {
            let (config, cache) = experiment.resolve()?;
            print!("{}", commands::inspect_config(&config, &cache)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = match e {
                CliError::Config(_) => "configuration error",
                CliError::Runtime(_) => "error",
            };
            eprintln!("{kind}: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
