//! Joint-distribution test of the sampler: alternate one Gibbs sweep with a
//! fresh draw of the data given the current latent events, and check that
//! the hyperparameters keep their prior moments.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::stats::{batch_means_se, mean};
use crate::domain::{GammaWeightPrior, LatentEvent, MarkedPoint};
use crate::error::Result;
use crate::gibbs::{AnnealSchedule, ChainConfig, ChainState, HyperPriors};
use crate::math::{sample_gamma, sample_poisson};
use crate::models::{BackgroundModel, ClusterModel};
use crate::partition::Partition;
use crate::rng::{streams, RngStream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GewekeConfig {
    pub alpha: f64,
    pub hyperpriors: HyperPriors,
    pub background_shape: f64,
    pub background_rate: f64,
    pub cycles: usize,
    pub batches: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentCheck {
    pub name: String,
    pub prior_mean: f64,
    pub mean: f64,
    pub se: f64,
}

impl MomentCheck {
    pub fn z(&self) -> f64 {
        (self.mean - self.prior_mean) / self.se
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GewekeReport {
    pub cycles: usize,
    pub mean_points: f64,
    pub checks: Vec<MomentCheck>,
}

fn simulate<M: ClusterModel, R: rand::Rng + ?Sized>(
    model: &M,
    events: &[LatentEvent<M::Param>],
    background_rate: f64,
    rng: &mut R,
) -> (Vec<MarkedPoint>, Partition) {
    let mut points = Vec::new();
    let mut labels = Vec::new();
    let mut k = 0;
    for e in events {
        let n = sample_poisson(e.w.expect("weighted event"), rng);
        if n > 0 {
            k += 1;
        }
        for _ in 0..n {
            points.push(model.sample_point(&e.m, &e.theta, rng));
            labels.push(k);
        }
    }
    let n0 = sample_poisson(background_rate * model.domain().measure(), rng);
    for _ in 0..n0 {
        let x = model.domain().sample_uniform(rng);
        points.push(MarkedPoint::unchecked(x, model.sample_background_mark(rng)));
        labels.push(0);
    }
    // A systematic scan is not permutation-equivariant, so the order of the
    // points must carry no information about their labels.
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.shuffle(rng);
    let points = order.iter().map(|&i| points[i].clone()).collect();
    let labels: Vec<usize> = order.iter().map(|&i| labels[i]).collect();
    (points, Partition::from_labels(&labels))
}

/// Successive-conditional simulation with α fixed and ν̄, β, λ̄0 drawn from
/// their priors. Emissions are not truncated to the domain, so the model
/// should use a proper location prior.
pub fn geweke_successive<M: ClusterModel>(model: M, cfg: &GewekeConfig, rng: RngStream) -> Result<GewekeReport> {
    let h = &cfg.hyperpriors;
    let mut draw = rng.child(streams::ORACLE);
    let nu = sample_gamma(h.nu_shape, h.nu_rate, &mut draw);
    let beta = sample_gamma(h.beta_shape, h.beta_rate, &mut draw);
    let lam0 = sample_gamma(cfg.background_shape, cfg.background_rate, &mut draw);
    let measure = model.domain().measure();
    let events: Vec<_> = (0..sample_poisson(nu * measure, &mut draw))
        .map(|_| {
            let (m, theta) = model.sample_prior_params(&mut draw);
            LatentEvent {
                m,
                w: Some(sample_gamma(cfg.alpha, beta, &mut draw)),
                theta,
            }
        })
        .collect();
    let (points, part) = simulate(&model, &events, lam0, &mut draw);

    let config = ChainConfig {
        anneal: AnnealSchedule::none(),
        hyperpriors: h.clone(),
        audit_every: 0,
        ..ChainConfig::plain(0, 0)
    };
    let background = BackgroundModel::new(lam0, cfg.background_shape, cfg.background_rate)?;
    let prior = GammaWeightPrior::new(cfg.alpha, beta, nu)?;
    let mut state = ChainState::new(model, Vec::new(), prior, background, &config, None, rng.child(streams::FIT))?;
    state.replace_data(points, &part)?;

    let (mut nus, mut betas, mut lams, mut sizes) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for _ in 0..cfg.cycles {
        state.sweep()?;
        nus.push(state.prior().nu_bar());
        betas.push(state.prior().beta());
        lams.push(state.background().rate);
        let events: Vec<_> = state.latents().iter().chain(state.empty_latents()).cloned().collect();
        let (points, part) = simulate(state.model(), &events, state.background().rate, &mut draw);
        sizes.push(points.len() as f64);
        state.replace_data(points, &part)?;
    }
    let check = |name: &str, prior_mean: f64, xs: &[f64]| MomentCheck {
        name: name.into(),
        prior_mean,
        mean: mean(xs),
        se: batch_means_se(xs, cfg.batches),
    };
    Ok(GewekeReport {
        cycles: cfg.cycles,
        mean_points: mean(&sizes),
        checks: vec![
            check("nu_bar", h.nu_shape / h.nu_rate, &nus),
            check("beta", h.beta_shape / h.beta_rate, &betas),
            check("background_rate", cfg.background_shape / cfg.background_rate, &lams),
        ],
    })
}
