//! `nsp`: simulate, fit and evaluate Neyman–Scott processes from the shell.

mod commands;
mod config;
mod data;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nsp::{Construction, SamplerMode};

use crate::config::SchemaError;

#[derive(Parser)]
#[command(name = "nsp", version, about = "Neyman–Scott processes with gamma weights")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug)]
pub struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Master seed; overrides the config's `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a dataset with its ground truth.
    Generate {
        #[command(flatten)]
        common: Common,
        /// Output dataset (JSON).
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_parser = parse_construction)]
        construction: Option<Construction>,
        /// Also draw a random hold-out mask from the config's `mask` section.
        #[arg(long)]
        mask_out: Option<PathBuf>,
    },
    /// Run collapsed Gibbs chains on a dataset.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Dataset (JSON with a `points` array).
        #[arg(long)]
        data: PathBuf,
        /// Output directory for `chain-<j>.jsonl` and `chain-<j>.trace.csv`.
        #[arg(long)]
        out: PathBuf,
        /// Hold-out mask; points inside it are left out of the fit.
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long)]
        shards: Option<usize>,
        #[arg(long)]
        chains: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, value_parser = parse_mode)]
        mode: Option<SamplerMode>,
    },
    /// Score chains against the truth and/or held-out points.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        /// Chain files written by `fit`.
        #[arg(required = true)]
        chains: Vec<PathBuf>,
        #[arg(long)]
        mask: Option<PathBuf>,
        /// Ignore the dataset's ground truth even if present.
        #[arg(long)]
        no_truth: bool,
        /// Metrics CSV (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cluster-count statistics of the partition urns over an (α, γ) grid.
    Urns {
        /// Optional config whose `urns` section sets the grid.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for summary.csv, histogram.csv and labelings.csv.
        #[arg(long)]
        out: PathBuf,
        /// Number of points per partition.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        draws: Option<usize>,
    },
    /// Exact partition computations for scripting and checks.
    Oracle {
        #[command(subcommand)]
        command: commands::oracle::OracleCommand,
    },
}

fn parse_construction(s: &str) -> Result<Construction, String> {
    s.parse().map_err(|e: nsp::NspError| e.to_string())
}

fn parse_mode(s: &str) -> Result<SamplerMode, String> {
    match s {
        "nsp" => Ok(SamplerMode::Nsp),
        "dpmm-limit" | "dpmm" => Ok(SamplerMode::DpmmLimit),
        other => Err(format!("unknown mode {other:?} (expected nsp or dpmm-limit)")),
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Generate {
            common,
            out,
            construction,
            mask_out,
        } => commands::generate::run(&common, &out, construction, mask_out.as_deref()),
        Command::Fit {
            common,
            data,
            out,
            mask,
            shards,
            chains,
            samples,
            mode,
        } => commands::fit::run(
            &common,
            &data,
            &out,
            mask.as_deref(),
            commands::fit::Overrides {
                shards,
                chains,
                samples,
                mode,
            },
        ),
        Command::Eval {
            common,
            data,
            chains,
            mask,
            no_truth,
            out,
        } => commands::eval::run(&common, &data, &chains, mask.as_deref(), !no_truth, out.as_deref()),
        Command::Urns {
            config,
            seed,
            out,
            n,
            draws,
        } => commands::urns::run(config.as_deref(), seed, &out, n, draws),
        Command::Oracle { command } => commands::oracle::run(command),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("NSP_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // A closed downstream pipe (e.g. `| head`) is not a failure.
            if e.chain().any(|c| {
                c.downcast_ref::<std::io::Error>()
                    .is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
            }) {
                return ExitCode::SUCCESS;
            }
            if let Some(s) = e.downcast_ref::<SchemaError>() {
                eprintln!("error: {s}");
                return ExitCode::from(2);
            }
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
