//! Observation windows, marked points, latent events and the gamma weight prior.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NspError, Result};

/// An axis-aligned box in R^D.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDomain", into = "RawDomain")]
pub struct Domain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl TryFrom<RawDomain> for Domain {
    type Error = NspError;

    fn try_from(raw: RawDomain) -> Result<Self> {
        Domain::new(raw.lower, raw.upper)
    }
}

impl From<Domain> for RawDomain {
    fn from(d: Domain) -> Self {
        RawDomain {
            lower: d.lower,
            upper: d.upper,
        }
    }
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(NspError::Domain(format!(
                "bounds must be non-empty and of equal length (got {} and {})",
                lower.len(),
                upper.len()
            )));
        }
        for (d, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(NspError::Domain(format!("axis {d}: need finite lower < upper, got [{lo}, {hi}]")));
            }
        }
        let domain = Self { lower, upper };
        if !(domain.measure().is_finite() && domain.measure() > 0.0) {
            return Err(NspError::Domain("measure is not finite and positive".into()));
        }
        Ok(domain)
    }

    /// The interval `[0, t]`.
    pub fn interval(t: f64) -> Result<Self> {
        Self::new(vec![0.0], vec![t])
    }

    /// The unit cube `[0, 1]^dim`.
    pub fn unit(dim: usize) -> Result<Self> {
        Self::new(vec![0.0; dim], vec![1.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Lebesgue measure |X|.
    pub fn measure(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(lo, hi)| hi - lo).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    pub fn contains_domain(&self, other: &Domain) -> bool {
        other.dim() == self.dim() && self.contains(other.lower()) && self.contains(other.upper())
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(lo, hi)| 0.5 * (lo + hi)).collect()
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| lo + (hi - lo) * rng.random::<f64>())
            .collect()
    }

    /// Measure of the intersection with another box of the same dimension.
    pub fn overlap(&self, other: &Domain) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .zip(other.lower.iter().zip(&other.upper))
            .map(|((a0, a1), (b0, b1))| (a1.min(*b1) - a0.max(*b0)).max(0.0))
            .product()
    }
}

/// Sparse word-count vector, sorted by word index with no zero entries.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "BTreeMap<u32, u32>", into = "BTreeMap<u32, u32>")]
pub struct WordCounts(Vec<(u32, u32)>);

impl WordCounts {
    pub fn new(entries: impl IntoIterator<Item = (u32, u32)>) -> Self {
        let mut map = BTreeMap::new();
        for (w, c) in entries {
            *map.entry(w).or_insert(0) += c;
        }
        map.into()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.0.iter().copied()
    }

    pub fn total(&self) -> u64 {
        self.0.iter().map(|&(_, c)| c as u64).sum()
    }

    pub fn nnz(&self) -> usize {
        self.0.len()
    }

    pub fn max_index(&self) -> Option<u32> {
        self.0.last().map(|&(w, _)| w)
    }
}

impl From<BTreeMap<u32, u32>> for WordCounts {
    fn from(map: BTreeMap<u32, u32>) -> Self {
        WordCounts(map.into_iter().filter(|&(_, c)| c > 0).collect())
    }
}

impl From<WordCounts> for BTreeMap<u32, u32> {
    fn from(w: WordCounts) -> Self {
        w.0.into_iter().collect()
    }
}

/// Model-specific payload attached to an observed point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
#[serde(try_from = "RawMark")]
pub enum Mark {
    Neuron { neuron: usize },
    Document { author: usize, words: WordCounts },
}

// Untagged enums buffer their input, which loses integer map keys; parse
// through a flat struct instead.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMark {
    neuron: Option<usize>,
    author: Option<usize>,
    words: Option<BTreeMap<u32, u32>>,
}

impl TryFrom<RawMark> for Mark {
    type Error = String;

    fn try_from(raw: RawMark) -> std::result::Result<Self, String> {
        match raw {
            RawMark {
                neuron: Some(neuron),
                author: None,
                words: None,
            } => Ok(Mark::Neuron { neuron }),
            RawMark {
                neuron: None,
                author: Some(author),
                words,
            } => Ok(Mark::Document {
                author,
                words: words.unwrap_or_default().into(),
            }),
            _ => Err("a mark is either {\"neuron\"} or {\"author\", \"words\"}".into()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkedPoint {
    pub x: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mark: Option<Mark>,
}

impl MarkedPoint {
    /// Builds a point, checking that it lies inside `domain` (boundary inclusive).
    pub fn new(domain: &Domain, x: Vec<f64>, mark: Option<Mark>) -> Result<Self> {
        if !domain.contains(&x) {
            return Err(NspError::Domain(format!("point {x:?} lies outside the domain")));
        }
        Ok(Self { x, mark })
    }

    /// Builds a point without a containment check (untruncated simulation).
    pub fn unchecked(x: Vec<f64>, mark: Option<Mark>) -> Self {
        Self { x, mark }
    }

    pub fn neuron(&self) -> Option<usize> {
        match self.mark {
            Some(Mark::Neuron { neuron }) => Some(neuron),
            _ => None,
        }
    }

    pub fn document(&self) -> Option<(usize, &WordCounts)> {
        match &self.mark {
            Some(Mark::Document { author, words }) => Some((*author, words)),
            _ => None,
        }
    }
}

/// A cluster seed. The weight is `None` when a construction integrates it out.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentEvent<P> {
    pub m: Vec<f64>,
    pub w: Option<f64>,
    pub theta: P,
}

/// Gamma(α, β) weights with homogeneous latent-event rate ν̄.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPrior", into = "RawPrior")]
pub struct GammaWeightPrior {
    alpha: f64,
    beta: f64,
    nu_bar: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPrior {
    alpha: f64,
    beta: f64,
    nu_bar: f64,
}

impl TryFrom<RawPrior> for GammaWeightPrior {
    type Error = NspError;

    fn try_from(raw: RawPrior) -> Result<Self> {
        GammaWeightPrior::new(raw.alpha, raw.beta, raw.nu_bar)
    }
}

impl From<GammaWeightPrior> for RawPrior {
    fn from(p: GammaWeightPrior) -> Self {
        RawPrior {
            alpha: p.alpha,
            beta: p.beta,
            nu_bar: p.nu_bar,
        }
    }
}

impl GammaWeightPrior {
    pub fn new(alpha: f64, beta: f64, nu_bar: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(NspError::InvalidConfig(format!("alpha must be positive, got {alpha}")));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(NspError::InvalidConfig(format!("beta must be positive, got {beta}")));
        }
        if !(nu_bar >= 0.0 && nu_bar.is_finite()) {
            return Err(NspError::InvalidConfig(format!("nu_bar must be non-negative, got {nu_bar}")));
        }
        Ok(Self { alpha, beta, nu_bar })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn nu_bar(&self) -> f64 {
        self.nu_bar
    }

    /// Expected number of latent events, L̄(X) = ν̄·|X|.
    pub fn lbar(&self, domain: &Domain) -> f64 {
        self.nu_bar * domain.measure()
    }

    pub fn with_nu_bar(self, nu_bar: f64) -> Result<Self> {
        Self::new(self.alpha, self.beta, nu_bar)
    }

    pub fn with_shape_rate(self, alpha: f64, beta: f64) -> Result<Self> {
        Self::new(alpha, beta, self.nu_bar)
    }

    /// Mean weight α/β.
    pub fn mean_weight(&self) -> f64 {
        self.alpha / self.beta
    }

    /// log of (β/(1+β))^α, the probability that a latent event emits nothing.
    pub fn log_empty_prob(&self) -> f64 {
        self.alpha * (self.beta / (1.0 + self.beta)).ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use proptest::prelude::*;

    #[test]
    fn measures() {
        assert_eq!(Domain::unit(2).unwrap().measure(), 1.0);
        assert_eq!(Domain::interval(40.0).unwrap().measure(), 40.0);
        assert_eq!(Domain::new(vec![0.0, 1.0], vec![2.0, 4.0]).unwrap().measure(), 6.0);
    }

    #[test]
    fn invalid_domains_rejected() {
        assert!(Domain::new(vec![0.0], vec![0.0]).is_err());
        assert!(Domain::new(vec![1.0], vec![0.0]).is_err());
        assert!(Domain::new(vec![0.0, 0.0], vec![1.0]).is_err());
        assert!(Domain::new(vec![], vec![]).is_err());
        assert!(Domain::new(vec![0.0], vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn lbar_values() {
        let t = Domain::interval(2000.0).unwrap();
        let p = GammaWeightPrior::new(1.0, 1.0, 0.02).unwrap();
        assert!((p.lbar(&t) - 40.0).abs() < 1e-12);
        let p0 = GammaWeightPrior::new(1.0, 1.0, 0.0).unwrap();
        assert_eq!(p0.lbar(&t), 0.0);
        let p10 = GammaWeightPrior::new(1.0, 1.0, 10.0).unwrap();
        assert_eq!(p10.lbar(&Domain::unit(2).unwrap()), 10.0);
    }

    #[test]
    fn prior_validation() {
        assert!(GammaWeightPrior::new(0.0, 1.0, 1.0).is_err());
        assert!(GammaWeightPrior::new(1.0, -1.0, 1.0).is_err());
        assert!(GammaWeightPrior::new(1.0, 1.0, -0.1).is_err());
    }

    #[test]
    fn point_containment_is_boundary_inclusive() {
        let d = Domain::unit(2).unwrap();
        assert!(MarkedPoint::new(&d, vec![0.0, 1.0], None).is_ok());
        assert!(MarkedPoint::new(&d, vec![1.0 + 1e-12, 0.5], None).is_err());
        assert!(MarkedPoint::new(&d, vec![0.5], None).is_err());
    }

    #[test]
    fn mark_json_shapes() {
        let p = MarkedPoint::unchecked(vec![1.0], Some(Mark::Neuron { neuron: 3 }));
        assert_eq!(serde_json::to_string(&p).unwrap(), r#"{"x":[1.0],"mark":{"neuron":3}}"#);
        let doc = MarkedPoint::unchecked(
            vec![2.0],
            Some(Mark::Document {
                author: 1,
                words: WordCounts::new([(5, 2), (0, 1)]),
            }),
        );
        let s = serde_json::to_string(&doc).unwrap();
        assert_eq!(s, r#"{"x":[2.0],"mark":{"author":1,"words":{"0":1,"5":2}}}"#);
        let back: MarkedPoint = serde_json::from_str(&s).unwrap();
        assert_eq!(back, doc);
        let bare: MarkedPoint = serde_json::from_str(r#"{"x":[0.5,0.5]}"#).unwrap();
        assert_eq!(bare.mark, None);
        assert!(serde_json::from_str::<MarkedPoint>(r#"{"x":[0.5],"color":1}"#).is_err());
    }

    #[test]
    fn word_counts_drop_zeros_and_merge() {
        let w = WordCounts::new([(3, 0), (1, 2), (1, 1)]);
        assert_eq!(w.iter().collect::<Vec<_>>(), vec![(1, 3)]);
        assert_eq!(w.total(), 3);
    }

    proptest! {
        #[test]
        fn uniform_samples_stay_inside(
            lo in proptest::collection::vec(-100.0f64..100.0, 1..4),
            widths in proptest::collection::vec(0.001f64..50.0, 4),
            seed in any::<u64>(),
        ) {
            let hi: Vec<f64> = lo.iter().zip(&widths).map(|(l, w)| l + w).collect();
            let d = Domain::new(lo.clone(), hi).unwrap();
            let mut rng = RngStream::new(seed, 0);
            for _ in 0..20 {
                let x = d.sample_uniform(&mut rng);
                prop_assert!(MarkedPoint::new(&d, x, None).is_ok());
            }
            let outside: Vec<f64> = lo.iter().map(|l| l - 1.0).collect();
            prop_assert!(MarkedPoint::new(&d, outside, None).is_err());
        }
    }
}
