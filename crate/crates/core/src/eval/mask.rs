//! Speckled hold-out masks: scattered boxes of the domain, optionally tied
//! to one mark group (a neuron or an author).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{Domain, MarkedPoint};
use crate::error::{NspError, Result};
use crate::models::ClusterModel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskRegion {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    #[serde(default)]
    pub group: Option<usize>,
}

impl MaskRegion {
    pub fn boxed(&self) -> Result<Domain> {
        Domain::new(self.lower.clone(), self.upper.clone())
    }

    pub fn measure(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).product()
    }

    fn contains_x(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| *v >= *l && *v < *u)
    }

    fn may_share_points(&self, other: &MaskRegion) -> bool {
        match (self.group, other.group) {
            (Some(a), Some(b)) => a == b,
            _ => true,
        }
    }

    fn overlaps(&self, other: &MaskRegion) -> bool {
        self.lower
            .iter()
            .zip(&self.upper)
            .zip(other.lower.iter().zip(&other.upper))
            .all(|((l1, u1), (l2, u2))| l1 < u2 && l2 < u1)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeckledMask {
    pub regions: Vec<MaskRegion>,
}

impl SpeckledMask {
    /// Validated mask: regions inside `domain` and pairwise disjoint
    /// whenever they can hold the same points.
    pub fn new(domain: &Domain, regions: Vec<MaskRegion>) -> Result<Self> {
        let mask = Self { regions };
        mask.validate(domain)?;
        Ok(mask)
    }

    pub fn validate(&self, domain: &Domain) -> Result<()> {
        for (i, r) in self.regions.iter().enumerate() {
            let b = r.boxed().map_err(|e| NspError::InvalidConfig(format!("mask region {i}: {e}")))?;
            if !domain.contains_domain(&b) {
                return Err(NspError::InvalidConfig(format!("mask region {i} leaves the domain")));
            }
            for (j, s) in self.regions.iter().enumerate().skip(i + 1) {
                if r.may_share_points(s) && r.overlaps(s) {
                    return Err(NspError::InvalidConfig(format!("mask regions {i} and {j} overlap")));
                }
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    /// Σ |R| over regions (each group's regions counted separately).
    pub fn total_measure(&self) -> f64 {
        self.regions.iter().map(MaskRegion::measure).sum()
    }

    pub fn masked_fraction(&self, domain: &Domain) -> f64 {
        self.total_measure() / domain.measure()
    }

    /// Whether a point is held out.
    pub fn contains<M: ClusterModel>(&self, model: &M, p: &MarkedPoint) -> bool {
        self.regions
            .iter()
            .any(|r| r.contains_x(&p.x) && r.group.is_none_or(|g| model.mark_group(p) == Some(g)))
    }

    /// (training points, held-out points), order preserved.
    pub fn split<M: ClusterModel>(&self, model: &M, points: &[MarkedPoint]) -> (Vec<MarkedPoint>, Vec<MarkedPoint>) {
        points.iter().cloned().partition(|p| !self.contains(model, p))
    }

    /// Measure of the domain still observed by the background,
    /// |X| − Σ_R |R| · P_bg(group of R).
    pub fn exposure<M: ClusterModel>(&self, model: &M) -> f64 {
        model.domain().measure()
            - self
                .regions
                .iter()
                .map(|r| r.measure() * model.background_group_prob(r.group))
                .sum::<f64>()
    }

    /// `per_group` random boxes with the given side lengths for each group
    /// (one ungrouped set when `groups` is `None`), non-overlapping within
    /// a group.
    pub fn random<R: Rng + ?Sized>(domain: &Domain, sides: &[f64], per_group: usize, groups: Option<usize>, rng: &mut R) -> Result<Self> {
        if sides.len() != domain.dim()
            || sides
                .iter()
                .zip(domain.lower().iter().zip(domain.upper()))
                .any(|(s, (l, u))| !(*s > 0.0 && *s <= u - l))
        {
            return Err(NspError::InvalidConfig("mask sides must be positive and fit the domain".into()));
        }
        let group_ids: Vec<Option<usize>> = match groups {
            Some(g) => (0..g).map(Some).collect(),
            None => vec![None],
        };
        let mut regions = Vec::new();
        for g in group_ids {
            let mut placed: Vec<MaskRegion> = Vec::new();
            let mut tries = 0;
            while placed.len() < per_group {
                tries += 1;
                if tries > 10_000 * per_group.max(1) {
                    return Err(NspError::InvalidConfig("could not place non-overlapping mask regions".into()));
                }
                let lower: Vec<f64> = (0..domain.dim())
                    .map(|d| domain.lower()[d] + rng.random::<f64>() * (domain.upper()[d] - domain.lower()[d] - sides[d]))
                    .collect();
                let upper = lower.iter().zip(sides).map(|(l, s)| l + s).collect();
                let r = MaskRegion { lower, upper, group: g };
                if placed.iter().all(|q| !q.overlaps(&r)) {
                    placed.push(r);
                }
            }
            regions.extend(placed);
        }
        Self::new(domain, regions)
    }
}
