use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use log::info;
use nsp::gibbs::run_chain_with;
use nsp::models::ClusterModel;
use nsp::rng::streams;
use nsp::{run_parallel_chain, ChainRecord, NspError, RngStream, SamplerMode, ShardPlan};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{load_config, load_mask, with_model};
use crate::config::RunConfig;
use crate::data::DataFile;
use crate::Common;

#[derive(Clone, Copy, Debug, Default)]
pub struct Overrides {
    pub shards: Option<usize>,
    pub chains: Option<usize>,
    pub samples: Option<usize>,
    pub mode: Option<SamplerMode>,
}

pub fn chain_path(dir: &Path, j: usize) -> PathBuf {
    dir.join(format!("chain-{j}.jsonl"))
}

pub fn run(common: &Common, data: &Path, out: &Path, mask: Option<&Path>, ov: Overrides) -> anyhow::Result<()> {
    let (mut cfg, seed) = load_config(common)?;
    if let Some(s) = ov.shards {
        cfg.parallel.shards = s;
    }
    if let Some(c) = ov.chains {
        cfg.chains = c;
    }
    if let Some(n) = ov.samples {
        cfg.sampler.n_samples = n;
    }
    if let Some(m) = ov.mode {
        cfg.sampler.mode = m;
    }
    cfg.validate(&common.config)?;
    let mask = mask.map(|p| load_mask(p, &cfg)).transpose()?;
    if mask.is_some() && cfg.parallel.shards > 1 {
        anyhow::bail!("a hold-out mask cannot be combined with sharded sampling");
    }
    let data = DataFile::load(data)?;
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    with_model!(&cfg, |model| {
        let points = match &mask {
            Some(m) => m.split(&model, &data.points).0,
            None => data.points.clone(),
        };
        info!("fitting {} points with {} chain(s)", points.len(), cfg.chains);
        (0..cfg.chains)
            .into_par_iter()
            .map(|j| fit_one(&model, &cfg, &points, mask.clone(), seed, j, out))
            .collect::<anyhow::Result<Vec<()>>>()?;
    });
    Ok(())
}

fn fit_one<M: ClusterModel>(
    model: &M,
    cfg: &RunConfig,
    points: &[nsp::MarkedPoint],
    mask: Option<nsp::eval::SpeckledMask>,
    seed: u64,
    j: usize,
    dir: &Path,
) -> anyhow::Result<()> {
    let rng = RngStream::new(seed, streams::CHAIN_BASE + j as u64);
    let path = chain_path(dir, j);
    let record = if cfg.parallel.shards > 1 {
        let plan = ShardPlan::new(&cfg.domain, cfg.parallel.shards, cfg.parallel.axis)?;
        let rec = run_parallel_chain(
            model.clone(),
            points.to_vec(),
            cfg.prior,
            cfg.background,
            &cfg.sampler,
            plan,
            cfg.parallel.rescale_lbar,
            rng,
        )?;
        let f = File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
        let mut w = BufWriter::new(f);
        rec.write_samples_jsonl(&mut w)?;
        w.flush()?;
        rec
    } else {
        // Stream samples to disk as they are retained.
        let f = File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
        let mut w = BufWriter::new(f);
        let rec = run_chain_with(
            model.clone(),
            points.to_vec(),
            cfg.prior,
            cfg.background,
            &cfg.sampler,
            mask,
            rng,
            |s| {
                serde_json::to_writer(&mut w, s)?;
                w.write_all(b"\n")?;
                Ok::<(), NspError>(())
            },
        )?;
        w.flush()?;
        rec
    };
    write_trace(&record, &dir.join(format!("chain-{j}.trace.csv")))?;
    info!(
        "chain {j}: mean K = {:.2} over {} samples",
        record.mean_clusters(),
        record.samples.len()
    );
    Ok(())
}

fn write_trace<P: Serialize + DeserializeOwned, G: Serialize + DeserializeOwned>(
    rec: &ChainRecord<P, G>,
    path: &Path,
) -> anyhow::Result<()> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = BufWriter::new(f);
    rec.write_trace_csv(&mut w)?;
    w.flush()?;
    Ok(())
}
