use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ClusterModel;
use crate::domain::MarkedPoint;
use crate::error::{NspError, Result};
use crate::math::sample_gamma;

fn default_shape() -> f64 {
    1.0
}

/// Homogeneous background intensity λ̄0 with a Ga(shape, rate) prior. The
/// mark component lives in the cluster model's globals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackgroundModel {
    pub rate: f64,
    #[serde(default = "default_shape")]
    pub rate_shape: f64,
    #[serde(default = "default_shape")]
    pub rate_rate: f64,
}

impl Default for BackgroundModel {
    fn default() -> Self {
        Self {
            rate: 0.0,
            rate_shape: 1.0,
            rate_rate: 1.0,
        }
    }
}

impl BackgroundModel {
    pub fn new(rate: f64, rate_shape: f64, rate_rate: f64) -> Result<Self> {
        let b = Self {
            rate,
            rate_shape,
            rate_rate,
        };
        b.validate()?;
        Ok(b)
    }

    /// No background at all: λ̄0 = 0.
    pub fn none() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate >= 0.0 && self.rate.is_finite()) {
            return Err(NspError::InvalidConfig(format!("background rate must be >= 0, got {}", self.rate)));
        }
        if !(self.rate_shape > 0.0 && self.rate_rate > 0.0) {
            return Err(NspError::InvalidConfig("background rate prior must be positive".into()));
        }
        Ok(())
    }

    /// Integrated intensity w0 over a window of the given measure.
    pub fn w0(&self, exposure: f64) -> f64 {
        self.rate * exposure
    }
}

/// log λ0(x, y) = log λ̄0 + log (background mark density).
pub fn background_log_density<M: ClusterModel>(bg: &BackgroundModel, model: &M, p: &MarkedPoint) -> f64 {
    bg.rate.ln() + model.background_log_mark_density(p)
}

/// Draw from Ga(α0 + |C0|, β0 + exposure).
pub fn resample_background_rate<R: Rng + ?Sized>(bg: &BackgroundModel, n_background: usize, exposure: f64, rng: &mut R) -> f64 {
    sample_gamma(bg.rate_shape + n_background as f64, bg.rate_rate + exposure, rng)
}
