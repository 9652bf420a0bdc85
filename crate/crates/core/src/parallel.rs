//! Approximate parallel sampling: the domain is cut into P slabs along one
//! axis, assignments are resampled per slab in parallel with clusters kept
//! local to their slab, and the coordinator updates everything global.
//!
//! A cluster that straddles a cut cannot be represented and is split in
//! two; the error is small when clusters are narrow relative to the slabs.

use serde::{Deserialize, Serialize};

use crate::domain::{Domain, GammaWeightPrior, MarkedPoint};
use crate::error::{NspError, Result};
use crate::gibbs::{run_from_state, ChainConfig, ChainRecord, ChainState};
use crate::models::{BackgroundModel, ClusterModel};
use crate::rng::RngStream;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShardPlan {
    n_shards: usize,
    axis: usize,
    boundaries: Vec<f64>,
}

impl ShardPlan {
    /// `n_shards` equal slabs along `axis`.
    pub fn new(domain: &Domain, n_shards: usize, axis: usize) -> Result<Self> {
        if n_shards == 0 {
            return Err(NspError::InvalidConfig("need at least one shard".into()));
        }
        if axis >= domain.dim() {
            return Err(NspError::InvalidConfig(format!("shard axis {axis} out of range")));
        }
        let (lo, hi) = (domain.lower()[axis], domain.upper()[axis]);
        let mut boundaries: Vec<f64> = (0..=n_shards).map(|i| lo + (hi - lo) * i as f64 / n_shards as f64).collect();
        boundaries[n_shards] = hi;
        Self::from_boundaries(domain, axis, boundaries)
    }

    pub fn from_boundaries(domain: &Domain, axis: usize, boundaries: Vec<f64>) -> Result<Self> {
        if axis >= domain.dim() {
            return Err(NspError::InvalidConfig(format!("shard axis {axis} out of range")));
        }
        let bad = || NspError::InvalidConfig("shard boundaries must increase strictly and cover the domain".into());
        if boundaries.len() < 2 || boundaries[0] != domain.lower()[axis] || *boundaries.last().unwrap() != domain.upper()[axis] {
            return Err(bad());
        }
        if boundaries.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(bad());
        }
        Ok(Self {
            n_shards: boundaries.len() - 1,
            axis,
            boundaries,
        })
    }

    pub fn n_shards(&self) -> usize {
        self.n_shards
    }

    pub fn axis(&self) -> usize {
        self.axis
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn width(&self, shard: usize) -> f64 {
        self.boundaries[shard + 1] - self.boundaries[shard]
    }

    /// Half-open slabs; the upper domain edge belongs to the last one.
    pub fn shard_of(&self, x: &[f64]) -> usize {
        let v = x[self.axis];
        let inner = &self.boundaries[1..self.n_shards];
        inner.partition_point(|b| *b <= v)
    }

    pub fn fraction(&self, shard: usize) -> f64 {
        self.width(shard) / (self.boundaries[self.n_shards] - self.boundaries[0])
    }

    pub fn assign(&self, points: &[MarkedPoint]) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_shards];
        for (i, p) in points.iter().enumerate() {
            out[self.shard_of(&p.x)].push(i);
        }
        out
    }
}

/// Runs one chain with assignments resampled per shard in parallel.
///
/// With `rescale_lbar` each shard's new-cluster weight uses its own share
/// of L̄ instead of the full-domain value.
#[allow(clippy::too_many_arguments)]
pub fn run_parallel_chain<M: ClusterModel>(
    model: M,
    points: Vec<MarkedPoint>,
    prior: GammaWeightPrior,
    background: BackgroundModel,
    config: &ChainConfig,
    plan: ShardPlan,
    rescale_lbar: bool,
    rng: RngStream,
) -> Result<ChainRecord<M::Param, M::Globals>> {
    let state = ChainState::new(model, points, prior, background, config, None, rng)?.with_plan(plan, rescale_lbar)?;
    run_from_state(state, config, |_| Ok(()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shards_cover_the_domain() {
        let d = Domain::new(vec![0.0, 0.0], vec![4.0, 1.0]).unwrap();
        let p = ShardPlan::new(&d, 4, 0).unwrap();
        assert_eq!(p.boundaries(), &[0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(p.shard_of(&[0.0, 0.5]), 0);
        assert_eq!(p.shard_of(&[1.0, 0.5]), 1);
        assert_eq!(p.shard_of(&[3.99, 0.5]), 3);
        assert_eq!(p.shard_of(&[4.0, 0.5]), 3);
        assert!((p.fraction(2) - 0.25).abs() < 1e-15);
        assert!(ShardPlan::from_boundaries(&d, 0, vec![0.0, 2.0, 3.9]).is_err());
        assert!(ShardPlan::from_boundaries(&d, 0, vec![0.0, 2.0, 2.0, 4.0]).is_err());
        assert!(ShardPlan::new(&d, 2, 2).is_err());
        let single = ShardPlan::new(&d, 1, 1).unwrap();
        assert_eq!(single.shard_of(&[3.0, 0.7]), 0);
    }

    #[test]
    fn assignment_is_idempotent() {
        let d = Domain::unit(1).unwrap();
        let p = ShardPlan::new(&d, 3, 0).unwrap();
        let pts: Vec<MarkedPoint> = (0..30).map(|i| MarkedPoint::unchecked(vec![i as f64 / 30.0], None)).collect();
        let a = p.assign(&pts);
        assert_eq!(a, p.assign(&pts));
        assert_eq!(a.iter().map(Vec::len).sum::<usize>(), 30);
    }
}
