use serde::{Deserialize, Serialize};

use super::stats::{mean, quantile};
use crate::gibbs::ChainRecord;

/// Posterior summary of the number of clusters against a known truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterCountSummary {
    pub n_samples: usize,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
    pub truth: Option<usize>,
    pub bias: Option<f64>,
    pub covered: Option<bool>,
}

/// Pools retained samples of several chains (their warmup is already
/// discarded) into a mean and a central `level` interval.
pub fn compare_cluster_count<P, G>(chains: &[ChainRecord<P, G>], truth: Option<usize>, level: f64) -> ClusterCountSummary {
    let ks: Vec<f64> = chains.iter().flat_map(|c| c.samples.iter().map(|s| s.n_clusters as f64)).collect();
    if ks.is_empty() {
        return ClusterCountSummary {
            n_samples: 0,
            mean: f64::NAN,
            lower: f64::NAN,
            upper: f64::NAN,
            truth,
            bias: None,
            covered: None,
        };
    }
    let m = mean(&ks);
    let tail = 0.5 * (1.0 - level);
    let (lower, upper) = (quantile(&ks, tail), quantile(&ks, 1.0 - tail));
    ClusterCountSummary {
        n_samples: ks.len(),
        mean: m,
        lower,
        upper,
        truth,
        bias: truth.map(|t| m - t as f64),
        covered: truth.map(|t| lower <= t as f64 && t as f64 <= upper),
    }
}
