use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Subcommand};
use nsp::eval::{enumerate_posterior, MAX_POSTERIOR_POINTS};
use nsp::partition::{enumerate_partitions, enumerate_partitions_with_background, log_eppf_sizes, VCoefficientTable};

use super::with_model;
use crate::config::RunConfig;
use crate::data::DataFile;

#[derive(Args, Clone, Copy, Debug)]
pub struct WeightArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    beta: f64,
    /// Expected number of latent events, ν̄·|X|.
    #[arg(long)]
    lbar: f64,
}

impl WeightArgs {
    fn table(self) -> anyhow::Result<VCoefficientTable> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("lbar", self.lbar)] {
            anyhow::ensure!(v > 0.0 && v.is_finite(), "--{name} must be positive and finite");
        }
        Ok(VCoefficientTable::from_parts(self.alpha, self.beta, self.lbar))
    }
}

#[derive(Subcommand)]
pub enum OracleCommand {
    /// List every partition of n points, one canonical labeling per line.
    Partitions {
        #[arg(long)]
        n: usize,
        /// Include a background block (label 0).
        #[arg(long)]
        background: bool,
    },
    /// log V(n, k).
    LogV {
        #[command(flatten)]
        weights: WeightArgs,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        k: u64,
    },
    /// log p(N = n) for n = 0..=max-n.
    #[command(name = "log-p-n")]
    LogPN {
        #[command(flatten)]
        weights: WeightArgs,
        #[arg(long)]
        max_n: u64,
    },
    /// log p(N, C) of one partition with the given block sizes.
    Eppf {
        #[command(flatten)]
        weights: WeightArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
    },
    /// Exact posterior over partitions of a small dataset.
    Posterior {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
}

pub fn run(cmd: OracleCommand) -> anyhow::Result<()> {
    let mut out = io::stdout().lock();
    match cmd {
        OracleCommand::Partitions { n, background } => {
            let parts = if background {
                enumerate_partitions_with_background(n)?
            } else {
                enumerate_partitions(n)?
            };
            for p in parts {
                let z: Vec<String> = p.labels().iter().map(usize::to_string).collect();
                writeln!(out, "{}", z.join(" "))?;
            }
        }
        OracleCommand::LogV { weights, n, k } => {
            writeln!(out, "{}", weights.table()?.log_v(n, k)?)?;
        }
        OracleCommand::LogPN { weights, max_n } => {
            let t = weights.table()?;
            writeln!(out, "n,log_p_n")?;
            for n in 0..=max_n {
                writeln!(out, "{n},{}", t.log_p_n(n))?;
            }
        }
        OracleCommand::Eppf { weights, sizes } => {
            anyhow::ensure!(sizes.iter().all(|&s| s > 0), "block sizes must be positive");
            writeln!(out, "{}", log_eppf_sizes(&sizes, &weights.table()?))?;
        }
        OracleCommand::Posterior { config, data } => {
            let cfg = RunConfig::load(&config)?;
            let data = DataFile::load(&data)?;
            anyhow::ensure!(
                data.points.len() <= MAX_POSTERIOR_POINTS,
                "exact posterior supports at most {MAX_POSTERIOR_POINTS} points, got {}",
                data.points.len()
            );
            let table = with_model!(&cfg, |model| enumerate_posterior(
                &model,
                &data.points,
                &cfg.prior,
                &cfg.background
            )?);
            let mut rows: Vec<_> = table.probs.into_iter().collect();
            rows.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            writeln!(out, "labels,probability")?;
            for (z, p) in rows {
                let z: Vec<String> = z.iter().map(usize::to_string).collect();
                writeln!(out, "{},{p}", z.join(" "))?;
            }
        }
    }
    out.flush()?;
    Ok(())
}
