//! Collapsed Gibbs sampling over parent assignments.
//!
//! Each sweep resamples every point's parent with the latent events
//! integrated out, then the background rate, the occupied clusters' latent
//! events and (optionally) the hyperparameters: the empty-event count, the
//! latent-event rate ν̄, the weight rate β and the model's shared globals.

mod record;
mod run;
mod state;
#[cfg(test)]
mod tests;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{NspError, Result};

pub use record::{ChainRecord, ChainSample, TraceRow};
pub use run::{run_chain, run_chain_with, run_from_state};
pub use state::ChainState;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerMode {
    /// Gamma-weight Neyman–Scott partition law.
    #[default]
    Nsp,
    /// Its Dirichlet-process limit: join ∝ |C_k|, new ∝ γ.
    DpmmLimit,
}

impl fmt::Display for SamplerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Nsp => "nsp",
            Self::DpmmLimit => "dpmm-limit",
        })
    }
}

impl FromStr for SamplerMode {
    type Err = NspError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nsp" => Ok(Self::Nsp),
            "dpmm-limit" | "dpmm" => Ok(Self::DpmmLimit),
            other => Err(NspError::InvalidConfig(format!(
                "unknown sampler mode {other:?} (expected nsp or dpmm-limit)"
            ))),
        }
    }
}

/// Tempering of the weight prior: at temperature T the sampler uses
/// Ga(α/T, β/T), which keeps the mean weight and scales its variance by T.
/// Temperatures fall geometrically from `initial_temperature` to exactly 1
/// on the last stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnealSchedule {
    pub stages: usize,
    pub sweeps_per_stage: usize,
    pub initial_temperature: f64,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        Self {
            stages: 20,
            sweeps_per_stage: 100,
            initial_temperature: 500.0,
        }
    }
}

impl AnnealSchedule {
    pub fn none() -> Self {
        Self {
            stages: 0,
            sweeps_per_stage: 0,
            initial_temperature: 1.0,
        }
    }

    pub fn new(stages: usize, sweeps_per_stage: usize, initial_temperature: f64) -> Result<Self> {
        let s = Self {
            stages,
            sweeps_per_stage,
            initial_temperature,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.initial_temperature >= 1.0 && self.initial_temperature.is_finite()) {
            return Err(NspError::InvalidConfig("initial_temperature must be >= 1".into()));
        }
        Ok(())
    }

    pub fn total_sweeps(&self) -> usize {
        self.stages * self.sweeps_per_stage
    }

    pub fn temperature(&self, stage: usize) -> f64 {
        if self.stages <= 1 || stage + 1 >= self.stages {
            return 1.0;
        }
        let frac = (self.stages - 1 - stage) as f64 / (self.stages - 1) as f64;
        self.initial_temperature.powf(frac)
    }
}

/// Gamma hyperpriors on ν̄ and β.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HyperPriors {
    pub nu_shape: f64,
    pub nu_rate: f64,
    pub beta_shape: f64,
    pub beta_rate: f64,
}

impl Default for HyperPriors {
    fn default() -> Self {
        Self {
            nu_shape: 1.0,
            nu_rate: 1.0,
            beta_shape: 1.0,
            beta_rate: 1.0,
        }
    }
}

/// Random-walk Metropolis on log α with a Ga(shape, rate) prior.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaMove {
    pub step: f64,
    pub shape: f64,
    pub rate: f64,
}

fn yes() -> bool {
    true
}
fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn default_samples() -> usize {
    1000
}
fn default_audit() -> usize {
    100
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    #[serde(default)]
    pub mode: SamplerMode,
    /// New-cluster weight γ in `dpmm-limit` mode.
    #[serde(default = "one")]
    pub dpmm_gamma: f64,
    #[serde(default)]
    pub anneal: AnnealSchedule,
    /// Retained samples after warmup.
    #[serde(default = "default_samples")]
    pub n_samples: usize,
    /// Sweeps at temperature 1 discarded before retaining; defaults to
    /// `n_samples · thin`, i.e. half of the post-anneal run.
    #[serde(default)]
    pub warmup: Option<usize>,
    #[serde(default = "one_usize")]
    pub thin: usize,
    #[serde(default = "yes")]
    pub resample_hyperparameters: bool,
    #[serde(default = "yes")]
    pub resample_globals: bool,
    #[serde(default = "yes")]
    pub resample_background: bool,
    #[serde(default)]
    pub random_scan: bool,
    #[serde(default)]
    pub alpha_move: Option<AlphaMove>,
    #[serde(default)]
    pub hyperpriors: HyperPriors,
    /// Check cached statistics every this many sweeps (0 disables).
    #[serde(default = "default_audit")]
    pub audit_every: usize,
    #[serde(default = "yes")]
    pub record_latents: bool,
    #[serde(default = "yes")]
    pub record_globals: bool,
}

impl Default for ChainConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        self.anneal.validate()?;
        if !(self.dpmm_gamma > 0.0 && self.dpmm_gamma.is_finite()) {
            return Err(NspError::InvalidConfig("dpmm_gamma must be positive".into()));
        }
        if self.thin == 0 {
            return Err(NspError::InvalidConfig("thin must be >= 1".into()));
        }
        let h = &self.hyperpriors;
        if [h.nu_shape, h.nu_rate, h.beta_shape, h.beta_rate]
            .iter()
            .any(|v| !(*v > 0.0 && v.is_finite()))
        {
            return Err(NspError::InvalidConfig("hyperpriors must be positive".into()));
        }
        if let Some(a) = &self.alpha_move {
            if !(a.step > 0.0 && a.shape > 0.0 && a.rate > 0.0) {
                return Err(NspError::InvalidConfig("alpha_move parameters must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn warmup_sweeps(&self) -> usize {
        self.warmup.unwrap_or(self.n_samples * self.thin)
    }

    pub fn total_sweeps(&self) -> usize {
        self.anneal.total_sweeps() + self.warmup_sweeps() + self.n_samples * self.thin
    }

    /// A quick configuration without annealing.
    pub fn plain(n_samples: usize, warmup: usize) -> Self {
        Self {
            anneal: AnnealSchedule::none(),
            n_samples,
            warmup: Some(warmup),
            ..Self::default()
        }
    }
}
