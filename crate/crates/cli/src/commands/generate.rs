use std::path::Path;

use log::info;
use nsp::eval::SpeckledMask;
use nsp::rng::streams;
use nsp::{generate, Construction, RngStream};

use super::{load_config, with_model};
use crate::data::write_json;
use crate::Common;

const MASK_STREAM: u64 = 1;

pub fn run(common: &Common, out: &Path, construction: Option<Construction>, mask_out: Option<&Path>) -> anyhow::Result<()> {
    let (cfg, seed) = load_config(common)?;
    let mut opts = cfg.generate.clone();
    if let Some(c) = construction {
        opts.construction = c;
    }
    let root = RngStream::new(seed, streams::GENERATE);
    with_model!(&cfg, |model| {
        let mut rng = root.clone();
        let data = generate(&model, &cfg.prior, &cfg.background, &opts, &mut rng)?;
        info!(
            "{}: {} points, {} clusters, {} background ({})",
            cfg.model.name(),
            data.len(),
            data.z.n_clusters(),
            data.z.n_background(),
            opts.construction
        );
        write_json(out, &data)?;
    });
    if let Some(path) = mask_out {
        let Some(spec) = &cfg.mask else {
            anyhow::bail!("--mask-out needs a `mask` section in {}", common.config.display());
        };
        let mask = SpeckledMask::random(&cfg.domain, &spec.sides, spec.per_group, spec.groups, &mut root.child(MASK_STREAM))?;
        info!("mask boxes have total measure {:.3}", mask.total_measure());
        write_json(path, &mask)?;
    }
    Ok(())
}
