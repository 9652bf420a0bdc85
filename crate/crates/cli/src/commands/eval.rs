use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use nsp::eval::{compare_cluster_count, heldout_log_likelihood, posterior_co_occupancy, SpeckledMask};
use nsp::models::ClusterModel;
use nsp::{ChainRecord, Partition};

use super::{load_config, load_mask, with_model};
use crate::data::{read_chain, DataFile};
use crate::Common;

pub fn run(
    common: &Common,
    data: &Path,
    chains: &[PathBuf],
    mask: Option<&Path>,
    use_truth: bool,
    out: Option<&Path>,
) -> anyhow::Result<()> {
    let (cfg, _) = load_config(common)?;
    let mask = mask.map(|p| load_mask(p, &cfg)).transpose()?;
    let data = DataFile::load(data)?;
    let truth = data.z.clone().filter(|_| use_truth);
    if truth.is_none() && mask.is_none() {
        anyhow::bail!("nothing to evaluate: the dataset has no ground truth `z` and no --mask was given");
    }
    let rows = with_model!(&cfg, |model| metrics(&model, &data, truth.as_ref(), mask.as_ref(), chains)?);
    let mut w: Box<dyn Write> = match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    };
    writeln!(w, "metric,value")?;
    for (k, v) in rows {
        writeln!(w, "{k},{v}")?;
    }
    w.flush()?;
    Ok(())
}

fn metrics<M: ClusterModel>(
    model: &M,
    data: &DataFile,
    truth: Option<&Partition>,
    mask: Option<&SpeckledMask>,
    paths: &[PathBuf],
) -> anyhow::Result<Vec<(&'static str, String)>> {
    let records = paths
        .iter()
        .map(|p| read_chain::<M::Param, M::Globals>(p))
        .collect::<anyhow::Result<Vec<ChainRecord<_, _>>>>()?;
    // Chains fit under a mask only saw the points outside it.
    let kept: Vec<usize> = (0..data.points.len())
        .filter(|&i| mask.is_none_or(|m| !m.contains(model, &data.points[i])))
        .collect();
    for (p, r) in paths.iter().zip(&records) {
        if let Some(s) = r.samples.iter().find(|s| s.z.n_total() != kept.len()) {
            anyhow::bail!(
                "{}: sample at sweep {} has {} points, expected {}",
                p.display(),
                s.sweep,
                s.z.n_total(),
                kept.len()
            );
        }
    }
    let truth = truth.map(|t| {
        let labels = t.labels();
        Partition::from_labels(&kept.iter().map(|&i| labels[i]).collect::<Vec<_>>())
    });

    let mut rows = vec![
        ("n_points", data.points.len().to_string()),
        ("n_fit", kept.len().to_string()),
        ("n_chains", records.len().to_string()),
    ];
    let k = compare_cluster_count(&records, truth.as_ref().map(Partition::n_clusters), 0.95);
    rows.push(("n_samples", k.n_samples.to_string()));
    rows.push(("clusters_mean", k.mean.to_string()));
    rows.push(("clusters_lower95", k.lower.to_string()));
    rows.push(("clusters_upper95", k.upper.to_string()));
    if let Some(t) = &truth {
        rows.push(("clusters_truth", t.n_clusters().to_string()));
        rows.push(("clusters_bias", k.bias.unwrap_or(f64::NAN).to_string()));
        rows.push(("clusters_covered", k.covered.unwrap_or(false).to_string()));
        let acc = posterior_co_occupancy(records.iter().flat_map(|r| r.samples.iter().map(|s| &s.z)), t)?;
        rows.push(("co_occupancy", acc.to_string()));
    }
    if let Some(m) = mask {
        let (_, heldout) = m.split(model, &data.points);
        let samples: Vec<_> = records.into_iter().flat_map(|r| r.samples).collect();
        let h = heldout_log_likelihood(model, &samples, &heldout, m)?;
        rows.push(("heldout_points", h.n_heldout.to_string()));
        rows.push(("heldout_pooled", h.pooled.to_string()));
        rows.push(("heldout_per_point", h.per_point.to_string()));
    }
    Ok(rows)
}
