use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SpeckledMask;
use crate::domain::MarkedPoint;
use crate::error::{NspError, Result};
use crate::gibbs::ChainSample;
use crate::math::{log_add_exp, log_mean_exp};
use crate::models::ClusterModel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeldOutScore {
    pub n_heldout: usize,
    pub n_samples: usize,
    /// log-mean-exp over samples of the masked-region Poisson log-likelihood.
    pub pooled: f64,
    /// `pooled / n_heldout`.
    pub per_point: f64,
}

/// Poisson-process log-likelihood of the held-out points (and their count)
/// on the masked region, given one sample's latent events and background.
pub fn heldout_sample_ll<M: ClusterModel>(
    model: &M,
    sample: &ChainSample<M::Param, M::Globals>,
    heldout: &[MarkedPoint],
    mask: &SpeckledMask,
) -> Result<f64> {
    if sample.n_clusters > 0 && sample.latents.is_empty() {
        return Err(NspError::Contract("held-out scoring needs recorded latent events".into()));
    }
    let mut model = model.clone();
    if let Some(g) = &sample.globals {
        model.set_globals(g.clone());
    }
    let events: Vec<_> = sample.latents.iter().chain(&sample.empty_latents).collect();
    if events.iter().any(|e| e.w.is_none()) {
        return Err(NspError::Contract("latent events without weights".into()));
    }
    let log_l0 = if sample.background_rate > 0.0 {
        sample.background_rate.ln()
    } else {
        f64::NEG_INFINITY
    };
    let mut ll = 0.0;
    for p in heldout {
        let mut lam = log_l0 + model.background_log_mark_density(p);
        for e in &events {
            lam = log_add_exp(lam, e.w.unwrap().ln() + model.log_emission(&e.m, &e.theta, p));
        }
        ll += lam;
    }
    let mut integral = 0.0;
    for r in &mask.regions {
        let b = r.boxed()?;
        integral += sample.background_rate * r.measure() * model.background_group_prob(r.group);
        for e in &events {
            integral += e.w.unwrap() * model.emission_mass(&e.m, &e.theta, &b, r.group)?;
        }
    }
    Ok(ll - integral)
}

/// Scores held-out points against a chain fit with them masked out.
pub fn heldout_log_likelihood<M: ClusterModel>(
    model: &M,
    samples: &[ChainSample<M::Param, M::Globals>],
    heldout: &[MarkedPoint],
    mask: &SpeckledMask,
) -> Result<HeldOutScore> {
    if mask.is_empty() {
        return Err(NspError::InvalidConfig("held-out scoring needs a non-empty mask".into()));
    }
    if heldout.is_empty() {
        return Err(NspError::InvalidConfig("no held-out points fall inside the mask".into()));
    }
    if samples.is_empty() {
        return Err(NspError::InvalidConfig("no retained samples".into()));
    }
    if let Some(i) = heldout.iter().position(|p| !mask.contains(model, p)) {
        return Err(NspError::Contract(format!("held-out point {i} lies outside the mask")));
    }
    let lls = samples
        .par_iter()
        .map(|s| heldout_sample_ll(model, s, heldout, mask))
        .collect::<Result<Vec<f64>>>()?;
    let pooled = log_mean_exp(&lls);
    Ok(HeldOutScore {
        n_heldout: heldout.len(),
        n_samples: samples.len(),
        pooled,
        per_point: pooled / heldout.len() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Domain, LatentEvent};
    use crate::eval::MaskRegion;
    use crate::models::{GaussianConfig, GaussianModel, GaussianParam};
    use crate::partition::Partition;

    fn sample(rate: f64, latents: Vec<LatentEvent<GaussianParam>>) -> ChainSample<GaussianParam, ()> {
        ChainSample {
            sweep: 0,
            temperature: 1.0,
            z: Partition::from_labels(&vec![1; latents.len()]),
            n_clusters: latents.len(),
            n_background: 0,
            background_rate: rate,
            log_joint: 0.0,
            alpha: 1.0,
            beta: 1.0,
            nu_bar: 1.0,
            latents,
            empty_latents: Vec::new(),
            globals: None,
        }
    }

    fn setup() -> (GaussianModel, SpeckledMask) {
        let d = Domain::unit(2).unwrap();
        let m = GaussianModel::new(&GaussianConfig::isotropic(2, 4.0, 0.01), &d).unwrap();
        let mask = SpeckledMask::new(
            &d,
            vec![
                MaskRegion {
                    lower: vec![0.0, 0.0],
                    upper: vec![0.2, 0.5],
                    group: None,
                },
                MaskRegion {
                    lower: vec![0.5, 0.5],
                    upper: vec![0.8, 0.6],
                    group: None,
                },
            ],
        )
        .unwrap();
        (m, mask)
    }

    #[test]
    fn pure_background_matches_poisson_formula() {
        let (m, mask) = setup();
        let held = vec![
            MarkedPoint::unchecked(vec![0.1, 0.1], None),
            MarkedPoint::unchecked(vec![0.6, 0.55], None),
        ];
        let lam: f64 = 7.0;
        let s = heldout_log_likelihood(&m, &[sample(lam, Vec::new())], &held, &mask).unwrap();
        let want = -lam * mask.total_measure() + 2.0 * lam.ln();
        assert!((s.pooled - want).abs() < 1e-12);
        assert!((s.per_point - want / 2.0).abs() < 1e-12);
    }

    #[test]
    fn order_invariant_and_finite() {
        let (m, mask) = setup();
        let cov = vec![0.01, 0.0, 0.0, 0.01];
        let ev = |x: f64| LatentEvent {
            m: vec![x, 0.3],
            w: Some(4.0),
            theta: GaussianParam { cov: cov.clone() },
        };
        let a = sample(1.0, vec![ev(0.1), ev(0.7)]);
        let b = sample(0.5, vec![ev(0.15)]);
        let held = vec![MarkedPoint::unchecked(vec![0.1, 0.3], None)];
        let s1 = heldout_log_likelihood(&m, &[a.clone(), b.clone()], &held, &mask).unwrap();
        let s2 = heldout_log_likelihood(&m, &[b, a.clone()], &held, &mask).unwrap();
        assert!((s1.pooled - s2.pooled).abs() < 1e-12 && s1.pooled.is_finite());
        let mut rev = a.clone();
        rev.latents.reverse();
        let (x, y) = (
            heldout_sample_ll(&m, &a, &held, &mask).unwrap(),
            heldout_sample_ll(&m, &rev, &held, &mask).unwrap(),
        );
        assert!((x - y).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let (m, mask) = setup();
        let s = sample(1.0, Vec::new());
        let inside = vec![MarkedPoint::unchecked(vec![0.1, 0.1], None)];
        assert!(heldout_log_likelihood(&m, std::slice::from_ref(&s), &inside, &SpeckledMask::default()).is_err());
        assert!(heldout_log_likelihood(&m, std::slice::from_ref(&s), &[], &mask).is_err());
        let outside = vec![MarkedPoint::unchecked(vec![0.9, 0.9], None)];
        assert!(heldout_log_likelihood(&m, &[s], &outside, &mask).is_err());
    }
}
