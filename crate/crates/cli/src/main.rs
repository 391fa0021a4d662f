use std::path::PathBuf;
use std::process::ExitCode;

use actorcause_cli::{load, Pipeline, Stage, StageError};
use actorcause_core::ErrorKind;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "actorcause", version, about = "Granger analysis of actor behavior in process event logs")]
struct Cli {
    /// Worker threads for parallel stages (defaults to the config, then all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Repeat for more log output.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Pipeline config file (TOML).
    #[arg(short, long)]
    config: PathBuf,
    /// Overrides `output_dir` from the config.
    #[arg(short, long)]
    output_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse the input log into events.csv.
    Ingest(Common),
    /// Classify transitions into transitions.csv.
    Classify(Common),
    /// Build the aligned daily panel.
    Series(Common),
    /// Unit-root tests and differencing.
    Adf(Common),
    /// Sparse-group-lasso lag selection.
    SelectLags(Common),
    /// Pairwise Granger tests at the selected lags.
    Granger(Common),
    /// Causal graph in DOT and JSON.
    Graph(Common),
    /// Generate the synthetic log described by [synth].
    Synth(Common),
    /// Every stage in order, plus manifest.json.
    Run(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Ingest(c)
            | Command::Classify(c)
            | Command::Series(c)
            | Command::Adf(c)
            | Command::SelectLags(c)
            | Command::Granger(c)
            | Command::Graph(c)
            | Command::Synth(c)
            | Command::Run(c) => c,
        }
    }
}

fn execute(cli: &Cli) -> Result<(), StageError> {
    let common = cli.command.common();
    let loaded = load(&common.config).map_err(|e| StageError::new(Stage::Config, ErrorKind::Config, e.to_string()))?;
    let mut config = loaded.config;
    if let Some(dir) = &common.output_dir {
        config.output_dir = dir.clone();
    }
    if let Some(n) = cli.workers.or(config.workers) {
        if n == 0 {
            return Err(StageError::new(Stage::Config, ErrorKind::Config, "--workers must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| StageError::new(Stage::Config, ErrorKind::Config, e.to_string()))?;
    }
    let pipeline = Pipeline::new(config, loaded.sha256);
    match &cli.command {
        Command::Ingest(_) => pipeline.ingest().map(drop),
        Command::Classify(_) => pipeline.classify().map(drop),
        Command::Series(_) => pipeline.series().map(drop),
        Command::Adf(_) => pipeline.adf().map(drop),
        Command::SelectLags(_) => pipeline.select_lags().map(drop),
        Command::Granger(_) => pipeline.granger().map(drop),
        Command::Graph(_) => pipeline.graph().map(drop),
        Command::Synth(_) => pipeline.synth().map(|p| println!("{}", p.display())),
        Command::Run(_) => pipeline.run().map(|m| {
            println!("wrote {} artifacts to {}", m.artifacts.len() + 1, pipeline.output_dir().display())
        }),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
