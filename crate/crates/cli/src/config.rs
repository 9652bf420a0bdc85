//! Run configuration: one JSON file describing the model, its domain and
//! priors, and how to simulate and fit it.

use std::fmt;
use std::fs;
use std::path::Path;

use nsp::gibbs::ChainConfig;
use nsp::models::{DocumentConfig, GaussianConfig, SequenceConfig};
use nsp::{BackgroundModel, Domain, GammaWeightPrior, GenerateOptions};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// A malformed or invalid input file. Reported with exit code 2.
#[derive(Debug)]
pub struct SchemaError {
    pub origin: String,
    pub location: Option<(usize, usize)>,
    pub field: String,
    pub message: String,
}

impl fmt::Display for SchemaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.origin)?;
        if let Some((line, col)) = self.location {
            write!(f, ":{line}:{col}")?;
        }
        if !self.field.is_empty() && self.field != "." {
            write!(f, ": field `{}`", self.field)?;
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for SchemaError {}

impl SchemaError {
    pub fn invalid(origin: &Path, field: &str, message: impl fmt::Display) -> Self {
        Self {
            origin: origin.display().to_string(),
            location: None,
            field: field.into(),
            message: message.to_string(),
        }
    }
}

/// Parses JSON, reporting the line, column and field path of the first error.
pub fn parse_json<T: DeserializeOwned>(text: &str, origin: &Path) -> Result<T, SchemaError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        // serde_json appends " at line L column C"; we report it separately.
        let message = inner.to_string();
        let message = match message.rfind(" at line ") {
            Some(i) => message[..i].to_string(),
            None => message,
        };
        SchemaError {
            origin: origin.display().to_string(),
            location: (inner.line() > 0).then(|| (inner.line(), inner.column())),
            field,
            message,
        }
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))?;
    Ok(parse_json(&text, path)?)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelSpec {
    Gaussian2d(GaussianConfig),
    Sequence(SequenceConfig),
    Document(DocumentConfig),
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Gaussian2d(_) => "gaussian2d",
            ModelSpec::Sequence(_) => "sequence",
            ModelSpec::Document(_) => "document",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParallelSpec {
    pub shards: usize,
    /// Coordinate along which the domain is cut into shards.
    pub axis: usize,
    /// Give each shard its own share of L̄ instead of the full-domain value.
    pub rescale_lbar: bool,
}

impl Default for ParallelSpec {
    fn default() -> Self {
        Self {
            shards: 1,
            axis: 0,
            rescale_lbar: false,
        }
    }
}

/// Random hold-out boxes written next to a generated dataset.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskSpec {
    pub sides: Vec<f64>,
    pub per_group: usize,
    /// One set of boxes per mark group (neuron or author) when set.
    #[serde(default)]
    pub groups: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UrnsSpec {
    pub n: usize,
    pub draws: usize,
    pub beta: f64,
    pub alphas: Vec<f64>,
    pub gammas: Vec<f64>,
    /// Discount of the Pitman–Yor baseline rows (skipped when 0).
    pub pitman_yor_discount: f64,
    pub labelings: usize,
}

impl Default for UrnsSpec {
    fn default() -> Self {
        Self {
            n: 100,
            draws: 10_000,
            beta: 1.0,
            alphas: vec![0.0, 1.0, 100.0, 10_000.0],
            gammas: vec![1.0, 10.0],
            pitman_yor_discount: 0.25,
            labelings: 3,
        }
    }
}

fn three() -> usize {
    3
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub domain: Domain,
    pub prior: GammaWeightPrior,
    #[serde(default)]
    pub background: BackgroundModel,
    #[serde(default)]
    pub generate: GenerateOptions,
    #[serde(default)]
    pub sampler: ChainConfig,
    #[serde(default)]
    pub parallel: ParallelSpec,
    #[serde(default = "three")]
    pub chains: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mask: Option<MaskSpec>,
    #[serde(default)]
    pub urns: UrnsSpec,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let cfg: RunConfig = read_json(path)?;
        cfg.validate(path)?;
        Ok(cfg)
    }

    /// Checks that go beyond the shape of the JSON.
    pub fn validate(&self, origin: &Path) -> Result<(), SchemaError> {
        let bad = |field: &str, msg: String| Err(SchemaError::invalid(origin, field, msg));
        let dim = self.domain.dim();
        match &self.model {
            ModelSpec::Gaussian2d(_) if dim != 2 => return bad("domain", format!("gaussian2d needs a 2-D domain, got {dim}-D")),
            ModelSpec::Sequence(_) | ModelSpec::Document(_) if dim != 1 => {
                return bad("domain", format!("{} needs a 1-D (time) domain, got {dim}-D", self.model.name()))
            }
            _ => {}
        }
        if let Err(e) = self.background.validate() {
            return bad("background", e.to_string());
        }
        if let Err(e) = self.sampler.validate() {
            return bad("sampler", e.to_string());
        }
        if self.chains == 0 {
            return bad("chains", "need at least one chain".into());
        }
        if self.parallel.shards == 0 {
            return bad("parallel.shards", "need at least one shard".into());
        }
        if self.parallel.axis >= dim {
            return bad(
                "parallel.axis",
                format!("axis {} out of range for a {dim}-D domain", self.parallel.axis),
            );
        }
        if let Some(m) = &self.mask {
            if m.sides.len() != dim {
                return bad("mask.sides", format!("need {dim} side lengths"));
            }
        }
        Ok(())
    }
}
