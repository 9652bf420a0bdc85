//! Random partitions of point indices: the exchangeable partition law,
//! V-coefficients, urn schemes and an enumeration oracle.

mod enumerate;
mod eppf;
mod prior;
mod urn;
mod vcoef;

use serde::{Deserialize, Serialize};

use crate::error::{NspError, Result};

pub use enumerate::{bell_number, enumerate_partitions, enumerate_partitions_with_background, MAX_ENUMERATE};
pub use eppf::{log_eppf, log_eppf_sizes, log_eppf_with_background};
pub use prior::PartitionPrior;
pub use urn::{
    sample_empty_cluster_count, sample_nsp_size, sample_partition, sample_sequential_urn, urn_log_weights, urn_step, LatentCountSampler,
    PartitionSampler, UrnConfig,
};
pub use vcoef::{LatentCountPosterior, VCoefficientTable, DEFAULT_TRUNCATION_TOL};

/// Background block plus disjoint non-empty clusters over `0..n_total`.
///
/// Always stored in canonical form: every block sorted, clusters ordered by
/// their smallest member. Equality and hashing therefore ignore labels.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Partition {
    background: Vec<usize>,
    clusters: Vec<Vec<usize>>,
    n_total: usize,
}

impl Partition {
    pub fn new(n_total: usize, background: Vec<usize>, clusters: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; n_total];
        let blocks = std::iter::once(&background).chain(clusters.iter());
        for (b, block) in blocks.enumerate() {
            if b > 0 && block.is_empty() {
                return Err(NspError::Contract("clusters must be non-empty".into()));
            }
            for &i in block {
                if i >= n_total || seen[i] {
                    return Err(NspError::Contract(format!("index {i} is out of range or assigned twice")));
                }
                seen[i] = true;
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(NspError::Contract(format!("index {i} is unassigned")));
        }
        Ok(Self::canonical(n_total, background, clusters))
    }

    fn canonical(n_total: usize, mut background: Vec<usize>, mut clusters: Vec<Vec<usize>>) -> Self {
        background.sort_unstable();
        for c in &mut clusters {
            c.sort_unstable();
        }
        clusters.sort_unstable_by_key(|c| c[0]);
        Self {
            background,
            clusters,
            n_total,
        }
    }

    /// The one-block partition {{0}}.
    pub fn singleton() -> Self {
        Self {
            background: Vec::new(),
            clusters: vec![vec![0]],
            n_total: 1,
        }
    }

    /// Builds a partition from labels: 0 is background, any other value
    /// names a cluster.
    pub fn from_labels(z: &[usize]) -> Self {
        let mut background = Vec::new();
        let mut by_label: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for (i, &l) in z.iter().enumerate() {
            if l == 0 {
                background.push(i);
            } else {
                by_label.entry(l).or_default().push(i);
            }
        }
        Self::canonical(z.len(), background, by_label.into_values().collect())
    }

    /// Canonical labels: 0 for background, 1..=K by smallest member.
    pub fn labels(&self) -> Vec<usize> {
        let mut z = vec![0; self.n_total];
        for (k, c) in self.clusters.iter().enumerate() {
            for &i in c {
                z[i] = k + 1;
            }
        }
        z
    }

    pub fn background(&self) -> &[usize] {
        &self.background
    }

    pub fn clusters(&self) -> &[Vec<usize>] {
        &self.clusters
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }

    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn n_background(&self) -> usize {
        self.background.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.clusters.iter().map(Vec::len).collect()
    }

    /// Cluster sizes in decreasing order.
    pub fn sorted_sizes(&self) -> Vec<usize> {
        let mut s = self.sizes();
        s.sort_unstable_by(|a, b| b.cmp(a));
        s
    }

    /// Applies `perm` (old index -> new index) to every point.
    pub fn relabel_points(&self, perm: &[usize]) -> Self {
        let map = |b: &Vec<usize>| b.iter().map(|&i| perm[i]).collect::<Vec<_>>();
        Self::canonical(self.n_total, map(&self.background), self.clusters.iter().map(map).collect())
    }
}

impl Serialize for Partition {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.labels().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Partition {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Vec::<usize>::deserialize(d).map(|z| Partition::from_labels(&z))
    }
}
