use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use pwi_core::PwiError;

mod commands;
mod config;

use config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    /// Bad or missing config, flags or checkpoint (exit 2).
    Config(String),
    /// Unreadable or malformed input data (exit 3).
    Data(String),
    Run(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Run(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Run(m) => write!(f, "{m}"),
        }
    }
}

impl From<PwiError> for CliError {
    fn from(e: PwiError) -> Self {
        match e {
            PwiError::InvalidArgument(_) | PwiError::Checkpoint(_) => CliError::Config(e.to_string()),
            PwiError::Parse { .. } | PwiError::Data(_) | PwiError::Io { .. } => CliError::Data(e.to_string()),
            _ => CliError::Run(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Run(format!("cannot write output: {e}"))
    }
}

#[derive(Debug, Parser)]
#[command(name = "pwi", version, about = "Paraphrase identification with subword-augmented pairwise word interaction models")]
#[command(after_help = "Relative data paths resolve against data.root, then $PWI_DATA_ROOT, then the config file's directory.")]
struct Cli {
    /// Run configuration (TOML: [data], [model], [train], [grid], [analysis])
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override train.seed
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Directory for all outputs, including manifest.json
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out_dir: PathBuf,

    /// Parallel grid cells
    #[arg(long, global = true, value_name = "N", default_value_t = 1)]
    workers: usize,

    /// Print the effective configuration, defaults included, and exit
    #[arg(long, global = true)]
    explain: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train one model; writes checkpoints, metrics and a test report
    Train,
    /// Evaluate a checkpoint on a test set
    Eval {
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
        /// Test pairs; defaults to data.test
        #[arg(long, value_name = "PATH")]
        test: Option<PathBuf>,
    },
    /// Train and evaluate the sixteen input variations
    Grid,
    /// Corpus and embedding analyses written as TSV reports
    Analyze {
        #[arg(value_enum)]
        kind: AnalyzeKind,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum AnalyzeKind {
    Overlap,
    Oov,
    Neighbors,
    Baseline,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig {
            base_dir: PathBuf::from("."),
            ..RunConfig::default()
        },
    };
    if let Some(seed) = cli.seed {
        cfg.train.seed = seed;
    }
    if cli.explain {
        print!("{}", cfg.explain());
        return Ok(());
    }
    if cli.workers == 0 {
        return Err(CliError::Config("--workers must be at least 1".into()));
    }
    let ctx = commands::Context {
        cfg,
        out_dir: cli.out_dir,
        workers: cli.workers,
    };
    match cli.command {
        Command::Train => commands::train(&ctx),
        Command::Eval { checkpoint, test } => commands::eval(&ctx, &checkpoint, test.as_deref()),
        Command::Grid => commands::grid(&ctx),
        Command::Analyze { kind } => commands::analyze(&ctx, kind),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pwi: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
