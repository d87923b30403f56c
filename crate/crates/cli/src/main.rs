use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod benchmark;
mod commands;
mod config;
mod failure;
mod output;

use commands::AnalyzeInputs;
use config::RunConfig;
use failure::Failure;
use output::OutDir;

/// Recover clean graph structure from poisoned graphs and compare defenses.
#[derive(Parser, Debug)]
#[command(name = "graphclean", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// JSON run configuration
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory
    #[arg(long, value_name = "DIR")]
    out: PathBuf,

    /// Seed for every random choice in the run
    #[arg(long)]
    seed: Option<u64>,

    /// Replace existing output files
    #[arg(long)]
    overwrite: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a stochastic block model graph
    Generate {
        #[command(flatten)]
        common: Common,
    },
    /// Inject edges into a graph and record them
    Attack {
        #[command(flatten)]
        common: Common,
        /// Graph directory (edges.txt, features.csv, labels.csv, splits.json)
        #[arg(long, value_name = "DIR")]
        input: Option<PathBuf>,
        /// random or dissimilar
        #[arg(long)]
        kind: Option<String>,
        #[arg(long)]
        rate: Option<f64>,
    },
    /// Train one defense and write its result
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "DIR")]
        input: Option<PathBuf>,
        /// prognn, prognn_two, gcn, gcn_svd, gcn_jaccard or gcn_nograph
        #[arg(long)]
        method: Option<String>,
    },
    /// Sweep perturbation rates, methods and seeds
    Benchmark {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "DIR")]
        input: Option<PathBuf>,
        /// Reuse finished cells from a previous run in the same directory
        #[arg(long)]
        resume: bool,
    },
    /// Spectrum, rank, feature-distance and edge-weight reports
    Analyze {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "DIR")]
        input: Option<PathBuf>,
        /// JSON matrix (array of rows) for the spectrum report instead of a graph
        #[arg(long, value_name = "PATH")]
        matrix: Option<PathBuf>,
        /// Perturbation record written by `attack`
        #[arg(long, value_name = "PATH")]
        record: Option<PathBuf>,
        /// Result written by `train`
        #[arg(long, value_name = "PATH")]
        result: Option<PathBuf>,
        /// Clean graph directory; by default the record is reverted on the input graph
        #[arg(long, value_name = "DIR")]
        clean: Option<PathBuf>,
        /// Comma-separated reports: spectrum, rank_curve, feature_density, edge_weights
        #[arg(long, value_delimiter = ',')]
        report: Vec<String>,
    },
}

fn run(cli: Cli) -> Result<(), Failure> {
    let common = match &cli.command {
        Command::Generate { common }
        | Command::Attack { common, .. }
        | Command::Train { common, .. }
        | Command::Benchmark { common, .. }
        | Command::Analyze { common, .. } => common,
    };
    let cfg = RunConfig::load(common.config.as_deref())?;
    let out = OutDir::new(&common.out, common.overwrite);
    let seed = common.seed;
    match cli.command {
        Command::Generate { .. } => commands::generate(&cfg, seed, &out),
        Command::Attack {
            input, kind, rate, ..
        } => commands::attack(&cfg, input.as_deref(), kind.as_deref(), rate, seed, &out),
        Command::Train { input, method, .. } => {
            commands::train(&cfg, input.as_deref(), method.as_deref(), seed, &out)
        }
        Command::Benchmark { input, resume, .. } => {
            benchmark::benchmark(&cfg, input.as_deref(), seed, resume, &out)
        }
        Command::Analyze {
            input,
            matrix,
            record,
            result,
            clean,
            report,
            ..
        } => {
            let args = AnalyzeInputs {
                input,
                matrix,
                record,
                result,
                clean,
                reports: report,
            };
            commands::analyze(&cfg, &args, seed, &out)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
