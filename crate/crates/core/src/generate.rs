//! Forward simulation of Neyman–Scott processes.
//!
//! Five constructions share one law for the observed points:
//! - `V1`: L ~ Po(L̄); each event draws w ~ Ga(α, β) and N_l ~ Po(w).
//! - `V2`: as `V1`, but N ~ Po(Σw) and parents ~ Cat(w / Σw).
//! - `V3`: total weight W ~ Ga(Lα, β) independent of π ~ Dir(α 1_L).
//! - `V4`: W integrated out, N ~ NB(Lα, 1/(1+β)).
//! - `V5`: N from its marginal, then the partition from p(C | N).

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{GammaWeightPrior, LatentEvent, MarkedPoint};
use crate::error::{NspError, Result};
use crate::math::{sample_categorical, sample_dirichlet, sample_gamma, sample_neg_binomial, sample_poisson};
use crate::models::{BackgroundModel, ClusterModel};
use crate::partition::{sample_empty_cluster_count, sample_nsp_size, sample_partition, Partition, UrnConfig};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Construction {
    #[default]
    V1,
    V2,
    V3,
    V4,
    V5,
}

impl Construction {
    pub const ALL: [Construction; 5] = [Self::V1, Self::V2, Self::V3, Self::V4, Self::V5];
}

impl fmt::Display for Construction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::V1 => "v1",
            Self::V2 => "v2",
            Self::V3 => "v3",
            Self::V4 => "v4",
            Self::V5 => "v5",
        };
        f.write_str(s)
    }
}

impl FromStr for Construction {
    type Err = NspError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "v1" => Ok(Self::V1),
            "v2" => Ok(Self::V2),
            "v3" => Ok(Self::V3),
            "v4" => Ok(Self::V4),
            "v5" => Ok(Self::V5),
            other => Err(NspError::InvalidConfig(format!("unknown construction {other:?} (expected v1..v5)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerateOptions {
    pub construction: Construction,
    /// Redraw emissions that fall outside the domain.
    pub truncate: bool,
    pub max_points: usize,
    /// Redraws allowed per emission before giving up.
    pub max_redraws: usize,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        Self {
            construction: Construction::V1,
            truncate: true,
            max_points: 5_000_000,
            max_redraws: 100_000,
        }
    }
}

impl GenerateOptions {
    pub fn with_construction(mut self, c: Construction) -> Self {
        self.construction = c;
        self
    }

    pub fn untruncated(mut self) -> Self {
        self.truncate = false;
        self
    }
}

/// Simulated points with their ground truth. Cluster `k` of `z` (label
/// `k + 1`) was emitted by `latents[k]`; label 0 is background.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratedDataset<P> {
    pub points: Vec<MarkedPoint>,
    pub z: Partition,
    pub latents: Vec<LatentEvent<P>>,
    #[serde(default = "Vec::new")]
    pub empty_latents: Vec<LatentEvent<P>>,
    pub background_rate: f64,
}

impl<P> GeneratedDataset<P> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn n_latents(&self) -> usize {
        self.latents.len() + self.empty_latents.len()
    }
}

struct Assembly<P> {
    events: Vec<LatentEvent<P>>,
    counts: Vec<usize>,
}

fn draw_latents<M: ClusterModel, R: Rng + ?Sized>(model: &M, l: u64, weights: &[Option<f64>], rng: &mut R) -> Vec<LatentEvent<M::Param>> {
    (0..l as usize)
        .map(|i| {
            let (m, theta) = model.sample_prior_params(rng);
            LatentEvent { m, w: weights[i], theta }
        })
        .collect()
}

fn check_size(n: u64, opts: &GenerateOptions) -> Result<usize> {
    if n as usize > opts.max_points {
        return Err(NspError::TooLarge {
            what: "generated dataset",
            n: n as usize,
            max: opts.max_points,
        });
    }
    Ok(n as usize)
}

fn categorical_counts<R: Rng + ?Sized>(n: usize, probs: &[f64], rng: &mut R) -> Vec<usize> {
    let mut counts = vec![0; probs.len()];
    for _ in 0..n {
        counts[sample_categorical(probs, rng).expect("at least one latent event")] += 1;
    }
    counts
}

fn cluster_counts<M: ClusterModel, R: Rng + ?Sized>(
    model: &M,
    prior: &GammaWeightPrior,
    opts: &GenerateOptions,
    rng: &mut R,
) -> Result<Assembly<M::Param>> {
    let lbar = prior.lbar(model.domain());
    let (alpha, beta) = (prior.alpha(), prior.beta());
    match opts.construction {
        Construction::V1 | Construction::V2 => {
            let l = sample_poisson(lbar, rng);
            let w: Vec<Option<f64>> = (0..l).map(|_| Some(sample_gamma(alpha, beta, rng))).collect();
            let events = draw_latents(model, l, &w, rng);
            let weights: Vec<f64> = w.iter().map(|w| w.unwrap()).collect();
            let counts = if opts.construction == Construction::V1 {
                let c: Vec<u64> = weights.iter().map(|w| sample_poisson(*w, rng)).collect();
                check_size(c.iter().sum(), opts)?;
                c.into_iter().map(|c| c as usize).collect()
            } else {
                let total: f64 = weights.iter().sum();
                let n = check_size(sample_poisson(total, rng), opts)?;
                if n == 0 {
                    vec![0; weights.len()]
                } else {
                    categorical_counts(n, &weights, rng)
                }
            };
            Ok(Assembly { events, counts })
        }
        Construction::V3 | Construction::V4 => {
            let l = sample_poisson(lbar, rng);
            if l == 0 {
                return Ok(Assembly {
                    events: vec![],
                    counts: vec![],
                });
            }
            let pi = sample_dirichlet(&vec![alpha; l as usize], rng);
            let (n, w) = if opts.construction == Construction::V3 {
                let total = sample_gamma(l as f64 * alpha, beta, rng);
                let n = sample_poisson(total, rng);
                (n, pi.iter().map(|p| Some(total * p)).collect::<Vec<_>>())
            } else {
                (sample_neg_binomial(l as f64 * alpha, beta, rng), vec![None; l as usize])
            };
            let n = check_size(n, opts)?;
            let events = draw_latents(model, l, &w, rng);
            Ok(Assembly {
                events,
                counts: categorical_counts(n, &pi, rng),
            })
        }
        Construction::V5 => {
            let n = check_size(sample_nsp_size(prior, model.domain(), rng), opts)?;
            let sizes = if n == 0 {
                vec![]
            } else {
                sample_partition(n, &UrnConfig::nsp(prior, model.domain()), rng)?.sizes()
            };
            let empty = sample_empty_cluster_count(prior, model.domain(), rng);
            let mut counts = sizes;
            counts.extend(std::iter::repeat_n(0, empty as usize));
            let events = draw_latents(model, counts.len() as u64, &vec![None; counts.len()], rng);
            Ok(Assembly { events, counts })
        }
    }
}

fn emit<M: ClusterModel, R: Rng + ?Sized>(
    model: &M,
    ev: &LatentEvent<M::Param>,
    opts: &GenerateOptions,
    rng: &mut R,
) -> Result<MarkedPoint> {
    for _ in 0..opts.max_redraws.max(1) {
        let p = model.sample_point(&ev.m, &ev.theta, rng);
        if !opts.truncate || model.domain().contains(&p.x) {
            return Ok(p);
        }
    }
    Err(NspError::Domain(format!(
        "emission around {:?} kept landing outside the domain",
        ev.m
    )))
}

/// Draws a dataset: NSP clusters by the chosen construction, plus a
/// homogeneous background with intensity `background.rate`.
pub fn generate<M: ClusterModel, R: Rng + ?Sized>(
    model: &M,
    prior: &GammaWeightPrior,
    background: &BackgroundModel,
    opts: &GenerateOptions,
    rng: &mut R,
) -> Result<GeneratedDataset<M::Param>> {
    background.validate()?;
    let Assembly { events, counts } = cluster_counts(model, prior, opts, rng)?;
    let mut labelled: Vec<(MarkedPoint, usize)> = Vec::new();
    let mut latents = Vec::new();
    let mut empty_latents = Vec::new();
    for (ev, c) in events.into_iter().zip(counts) {
        if c == 0 {
            empty_latents.push(ev);
            continue;
        }
        latents.push(ev);
        let ev = latents.last().unwrap();
        for _ in 0..c {
            labelled.push((emit(model, ev, opts, rng)?, latents.len()));
        }
    }
    let dom = model.domain();
    let n0 = sample_poisson(background.w0(dom.measure()), rng);
    check_size(n0 + labelled.len() as u64, opts)?;
    for _ in 0..n0 {
        let x = dom.sample_uniform(rng);
        labelled.push((MarkedPoint::unchecked(x, model.sample_background_mark(rng)), 0));
    }
    labelled.sort_by(|a, b| a.0.x[0].total_cmp(&b.0.x[0]));
    let labels: Vec<usize> = labelled.iter().map(|(_, l)| *l).collect();
    let z = Partition::from_labels(&labels);
    // reorder latents to the canonical cluster order
    let mut slots: Vec<Option<LatentEvent<M::Param>>> = latents.into_iter().map(Some).collect();
    let latents = z
        .clusters()
        .iter()
        .map(|c| slots[labels[c[0]] - 1].take().expect("each latent owns one cluster"))
        .collect();
    Ok(GeneratedDataset {
        points: labelled.into_iter().map(|(p, _)| p).collect(),
        z,
        latents,
        empty_latents,
        background_rate: background.rate,
    })
}

/// NSP points without background.
pub fn sample_nsp<M: ClusterModel, R: Rng + ?Sized>(
    model: &M,
    prior: &GammaWeightPrior,
    opts: &GenerateOptions,
    rng: &mut R,
) -> Result<GeneratedDataset<M::Param>> {
    generate(model, prior, &BackgroundModel::none(), opts, rng)
}
