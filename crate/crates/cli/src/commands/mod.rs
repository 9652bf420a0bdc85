pub mod eval;
pub mod fit;
pub mod generate;
pub mod oracle;
pub mod urns;

use nsp::eval::SpeckledMask;

use crate::config::{read_json, RunConfig};
use crate::Common;

/// Builds the configured model and evaluates `$body` with it bound to
/// `$m`; each arm is monomorphised separately.
macro_rules! with_model {
    ($cfg:expr, |$m:ident| $body:expr) => {{
        let cfg: &$crate::config::RunConfig = $cfg;
        match &cfg.model {
            $crate::config::ModelSpec::Gaussian2d(c) => {
                let $m = nsp::models::GaussianModel::new(c, &cfg.domain)?;
                $body
            }
            $crate::config::ModelSpec::Sequence(c) => {
                let $m = nsp::models::SequenceModel::new(c, &cfg.domain)?;
                $body
            }
            $crate::config::ModelSpec::Document(c) => {
                let $m = nsp::models::DocumentModel::new(c, &cfg.domain)?;
                $body
            }
        }
    }};
}
pub(crate) use with_model;

pub fn load_config(common: &Common) -> anyhow::Result<(RunConfig, u64)> {
    let cfg = RunConfig::load(&common.config)?;
    let seed = common.seed.unwrap_or(cfg.seed);
    Ok((cfg, seed))
}

pub fn load_mask(path: &std::path::Path, cfg: &RunConfig) -> anyhow::Result<SpeckledMask> {
    let mask: SpeckledMask = read_json(path)?;
    mask.validate(&cfg.domain)
        .map_err(|e| crate::config::SchemaError::invalid(path, "regions", e))?;
    Ok(mask)
}
