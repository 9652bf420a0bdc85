use std::collections::BTreeMap;

use crate::domain::{GammaWeightPrior, MarkedPoint};
use crate::error::{NspError, Result};
use crate::math::log_sum_exp;
use crate::models::{BackgroundModel, ClusterModel};
use crate::partition::{enumerate_partitions_with_background, log_eppf_with_background, Partition, PartitionPrior, VCoefficientTable};

/// Largest dataset [`enumerate_posterior`] accepts.
pub const MAX_POSTERIOR_POINTS: usize = 8;

/// An exact distribution over (background, clusters) configurations.
#[derive(Clone, Debug)]
pub struct PosteriorTable {
    pub probs: BTreeMap<Vec<usize>, f64>,
}

impl PosteriorTable {
    /// Probability of a configuration, keyed by canonical labels.
    pub fn prob(&self, p: &Partition) -> f64 {
        self.probs.get(&p.labels()).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.probs.values().sum()
    }

    pub fn cluster_count_distribution(&self) -> BTreeMap<usize, f64> {
        let mut out = BTreeMap::new();
        for (z, p) in &self.probs {
            *out.entry(Partition::from_labels(z).n_clusters()).or_insert(0.0) += p;
        }
        out
    }
}

fn tabulate<M: ClusterModel>(
    model: &M,
    points: &[MarkedPoint],
    background: &BackgroundModel,
    log_prior: impl Fn(&Partition) -> f64,
) -> Result<PosteriorTable> {
    if points.len() > MAX_POSTERIOR_POINTS {
        return Err(NspError::TooLarge {
            what: "posterior enumeration",
            n: points.len(),
            max: MAX_POSTERIOR_POINTS,
        });
    }
    for p in points {
        model.check_point(p)?;
    }
    let measure = model.domain().measure();
    let mut configs = Vec::new();
    let mut logs = Vec::new();
    for part in enumerate_partitions_with_background(points.len())? {
        if background.rate == 0.0 && part.n_background() > 0 {
            continue;
        }
        let clusters: f64 = part
            .clusters()
            .iter()
            .map(|c| model.log_cluster_marginal(&model.stats_from(c.iter().map(|&i| &points[i]))))
            .sum();
        let bg: f64 = part
            .background()
            .iter()
            .map(|&i| model.background_log_mark_density(&points[i]) - measure.ln())
            .sum();
        logs.push(log_prior(&part) + clusters + bg);
        configs.push(part.labels());
    }
    let norm = log_sum_exp(&logs);
    Ok(PosteriorTable {
        probs: configs.into_iter().zip(logs).map(|(z, l)| (z, (l - norm).exp())).collect(),
    })
}

/// Exact p(C0, C | data) for a handful of points, with the background rate
/// and weight prior held fixed.
pub fn enumerate_posterior<M: ClusterModel>(
    model: &M,
    points: &[MarkedPoint],
    prior: &GammaWeightPrior,
    background: &BackgroundModel,
) -> Result<PosteriorTable> {
    let table = VCoefficientTable::new(prior, model.domain());
    let w0 = background.w0(model.domain().measure());
    tabulate(model, points, background, |p| log_eppf_with_background(p, &table, w0))
}

/// Same, under an arbitrary partition law (e.g. the DPMM limit).
pub fn enumerate_posterior_with<M: ClusterModel>(
    model: &M,
    points: &[MarkedPoint],
    prior: &PartitionPrior,
    background: &BackgroundModel,
) -> Result<PosteriorTable> {
    let w0 = background.w0(model.domain().measure());
    tabulate(model, points, background, |p| prior.log_joint(&p.sizes(), p.n_background(), w0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Domain;
    use crate::models::{GaussianConfig, GaussianModel};

    fn model() -> GaussianModel {
        GaussianModel::new(&GaussianConfig::isotropic(1, 4.0, 0.01), &Domain::interval(1.0).unwrap()).unwrap()
    }

    fn pts(xs: &[f64]) -> Vec<MarkedPoint> {
        xs.iter().map(|&x| MarkedPoint::unchecked(vec![x], None)).collect()
    }

    #[test]
    fn single_point_without_background() {
        let prior = GammaWeightPrior::new(1.0, 1.0, 2.0).unwrap();
        let t = enumerate_posterior(&model(), &pts(&[0.3]), &prior, &BackgroundModel::none()).unwrap();
        assert_eq!(t.probs.len(), 1);
        assert!((t.prob(&Partition::from_labels(&[1])) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normalised_and_symmetric() {
        let prior = GammaWeightPrior::new(1.5, 0.7, 3.0).unwrap();
        let bg = BackgroundModel::new(2.0, 1.0, 1.0).unwrap();
        let t = enumerate_posterior(&model(), &pts(&[0.4, 0.6]), &prior, &bg).unwrap();
        assert!((t.total() - 1.0).abs() < 1e-10);
        assert_eq!(t.probs.len(), 5);
        let a = t.prob(&Partition::from_labels(&[0, 1]));
        let b = t.prob(&Partition::from_labels(&[1, 0]));
        assert!((a - b).abs() < 1e-12);
        let t3 = enumerate_posterior(&model(), &pts(&[0.1, 0.5, 0.52]), &prior, &bg).unwrap();
        assert!((t3.total() - 1.0).abs() < 1e-10);
        assert_eq!(t3.probs.len(), 15);
    }

    #[test]
    fn eppf_and_closed_form_agree() {
        let prior = GammaWeightPrior::new(0.8, 1.3, 1.7).unwrap();
        let bg = BackgroundModel::new(0.5, 1.0, 1.0).unwrap();
        let m = model();
        let x = pts(&[0.2, 0.25, 0.9]);
        let a = enumerate_posterior(&m, &x, &prior, &bg).unwrap();
        let pp = PartitionPrior::nsp(prior.alpha(), prior.beta(), prior.lbar(m.domain()));
        let b = enumerate_posterior_with(&m, &x, &pp, &bg).unwrap();
        for (z, p) in &a.probs {
            assert!((p - b.probs[z]).abs() < 1e-10);
        }
    }

    #[test]
    fn refuses_large_inputs() {
        let prior = GammaWeightPrior::new(1.0, 1.0, 1.0).unwrap();
        let x = pts(&[0.5; MAX_POSTERIOR_POINTS + 1]);
        assert!(matches!(
            enumerate_posterior(&model(), &x, &prior, &BackgroundModel::none()),
            Err(NspError::TooLarge { .. })
        ));
    }
}
