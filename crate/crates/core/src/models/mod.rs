//! Observation models: emission densities, conjugate sufficient statistics
//! and the marginal / predictive likelihoods the collapsed sampler needs.

mod background;

pub mod document;
pub mod gaussian;
pub mod sequence;

use std::fmt::Debug;

use rand::Rng;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::domain::{Domain, Mark, MarkedPoint};
use crate::error::Result;

pub use background::{background_log_density, resample_background_rate, BackgroundModel};

pub use document::{DocumentConfig, DocumentGlobals, DocumentModel, DocumentParam};
pub use gaussian::{GaussianConfig, GaussianModel, GaussianParam};
pub use sequence::{geometric_warp_grid, SequenceConfig, SequenceGlobals, SequenceModel, SequenceParam, SequencePriors};

/// A cluster's sampled parameters together with its member points.
pub struct ClusterView<'a, P> {
    pub m: &'a [f64],
    pub theta: &'a P,
    pub points: Vec<&'a MarkedPoint>,
}

/// The contract every observation model fulfils.
///
/// Locations `m` are integrated under a flat prior scaled by the uniform
/// density on the domain; see the individual models for the details.
pub trait ClusterModel: Clone + Debug + Send + Sync {
    type Stats: Clone + Debug + Send + Sync;
    type Param: Clone + Debug + PartialEq + Serialize + DeserializeOwned + Send + Sync;
    type Globals: Clone + Debug + PartialEq + Serialize + DeserializeOwned + Send + Sync;

    fn domain(&self) -> &Domain;

    /// Checks dimension and mark support.
    fn check_point(&self, p: &MarkedPoint) -> Result<()>;

    fn empty_stats(&self) -> Self::Stats;
    fn stats_size(&self, s: &Self::Stats) -> usize;
    fn stats_add(&self, s: &mut Self::Stats, p: &MarkedPoint);
    /// Removes a previously added point. Panics on empty stats.
    fn stats_remove(&self, s: &mut Self::Stats, p: &MarkedPoint);

    /// log p(x, y) under a fresh cluster.
    fn log_marginal_new(&self, p: &MarkedPoint) -> f64;
    /// log p(x, y | points already in `s`).
    fn log_predictive(&self, s: &Self::Stats, p: &MarkedPoint) -> f64;
    /// log p(all points in `s`) under one cluster; 0 for empty stats.
    fn log_cluster_marginal(&self, s: &Self::Stats) -> f64;

    fn sample_posterior_params<R: Rng + ?Sized>(&self, s: &Self::Stats, rng: &mut R) -> (Vec<f64>, Self::Param);
    fn sample_prior_params<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, Self::Param);
    /// One draw from p(x, y | m, θ), not truncated to the domain.
    fn sample_point<R: Rng + ?Sized>(&self, m: &[f64], theta: &Self::Param, rng: &mut R) -> MarkedPoint;
    fn log_emission(&self, m: &[f64], theta: &Self::Param, p: &MarkedPoint) -> f64;
    /// Probability that one emission lands in `region` with mark in `group`.
    fn emission_mass(&self, m: &[f64], theta: &Self::Param, region: &Domain, group: Option<usize>) -> Result<f64>;

    /// Mark group used by grouped hold-out masks (neuron or author).
    fn mark_group(&self, _p: &MarkedPoint) -> Option<usize> {
        None
    }

    /// log of the background mark density at `p` (0 for unmarked models).
    fn background_log_mark_density(&self, _p: &MarkedPoint) -> f64 {
        0.0
    }
    /// Background probability of a mark in `group` (1 when ungrouped).
    fn background_group_prob(&self, group: Option<usize>) -> f64 {
        let _ = group;
        1.0
    }
    fn sample_background_mark<R: Rng + ?Sized>(&self, _rng: &mut R) -> Option<Mark> {
        None
    }

    fn globals(&self) -> Self::Globals;
    fn set_globals(&mut self, g: Self::Globals);
    /// Conditional update of shared parameters. Cached statistics depending
    /// on them must be rebuilt afterwards.
    fn resample_globals<R: Rng + ?Sized>(&mut self, clusters: &[ClusterView<'_, Self::Param>], background: &[&MarkedPoint], rng: &mut R);
    /// Whether sufficient statistics depend on the globals.
    fn stats_depend_on_globals(&self) -> bool {
        false
    }

    fn stats_from<'a>(&self, points: impl IntoIterator<Item = &'a MarkedPoint>) -> Self::Stats {
        let mut s = self.empty_stats();
        for p in points {
            self.stats_add(&mut s, p);
        }
        s
    }
}
