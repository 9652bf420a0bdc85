use std::collections::BTreeMap;

use super::*;
use crate::domain::{Domain, GammaWeightPrior, MarkedPoint};
use crate::eval::stats::tv_distance;
use crate::eval::{enumerate_posterior, enumerate_posterior_with};
use crate::models::{BackgroundModel, ClusterModel, GaussianConfig, GaussianModel};
use crate::partition::Partition;
use crate::partition::PartitionPrior;
use crate::rng::RngStream;

fn model() -> GaussianModel {
    GaussianModel::new(&GaussianConfig::isotropic(1, 4.0, 0.02), &Domain::interval(1.0).unwrap()).unwrap()
}

fn pts(xs: &[f64]) -> Vec<MarkedPoint> {
    xs.iter().map(|&x| MarkedPoint::unchecked(vec![x], None)).collect()
}

fn fixed(n: usize) -> ChainConfig {
    ChainConfig {
        resample_hyperparameters: false,
        resample_globals: false,
        resample_background: false,
        record_latents: false,
        audit_every: 500,
        ..ChainConfig::plain(n, 100)
    }
}

fn frequencies(rec: &ChainRecord<crate::models::GaussianParam, ()>) -> BTreeMap<Vec<usize>, u64> {
    crate::eval::stats::counts(rec.samples.iter().map(|s| s.z.labels()))
}

#[test]
fn matches_enumeration_with_background() {
    let x = pts(&[0.3, 0.36, 0.8]);
    let prior = GammaWeightPrior::new(1.5, 1.0, 2.0).unwrap();
    let bg = BackgroundModel::new(1.5, 1.0, 1.0).unwrap();
    let exact = enumerate_posterior(&model(), &x, &prior, &bg).unwrap();
    let rec = run_chain(model(), x, prior, bg, &fixed(30_000), None, RngStream::new(1, 0)).unwrap();
    let tv = tv_distance(&exact.probs, &frequencies(&rec));
    assert!(tv < 0.03, "tv {tv}");
}

#[test]
fn dpmm_mode_matches_its_enumeration() {
    let x = pts(&[0.2, 0.25]);
    let prior = GammaWeightPrior::new(1.0, 2.0, 1.0).unwrap();
    let cfg = ChainConfig {
        mode: SamplerMode::DpmmLimit,
        dpmm_gamma: 0.7,
        ..fixed(30_000)
    };
    let exact = enumerate_posterior_with(&model(), &x, &PartitionPrior::dpmm(0.7, 2.0), &BackgroundModel::none()).unwrap();
    let rec = run_chain(model(), x, prior, BackgroundModel::none(), &cfg, None, RngStream::new(2, 0)).unwrap();
    assert!(tv_distance(&exact.probs, &frequencies(&rec)) < 0.03);
    assert!(rec.samples.iter().all(|s| s.empty_latents.is_empty()));
}

#[test]
fn deterministic_under_seed() {
    let x = pts(&[0.1, 0.12, 0.5, 0.55, 0.9]);
    let prior = GammaWeightPrior::new(1.0, 1.0, 3.0).unwrap();
    let bg = BackgroundModel::new(0.5, 1.0, 1.0).unwrap();
    let cfg = ChainConfig {
        anneal: AnnealSchedule::new(3, 5, 10.0).unwrap(),
        ..ChainConfig::plain(20, 10)
    };
    let a = run_chain(model(), x.clone(), prior, bg, &cfg, None, RngStream::new(9, 0)).unwrap();
    let b = run_chain(model(), x.clone(), prior, bg, &cfg, None, RngStream::new(9, 0)).unwrap();
    let c = run_chain(model(), x, prior, bg, &cfg, None, RngStream::new(10, 0)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.samples, c.samples);
    assert_eq!(a.trace.len(), cfg.total_sweeps());
    assert_eq!(a.trace[0].temperature, 10.0);
    assert!(a.samples.iter().all(|s| s.temperature == 1.0 && s.log_joint.is_finite()));
}

#[test]
fn latents_follow_canonical_order_and_posterior_weights() {
    let x = pts(&[0.1, 0.11, 0.12, 0.7]);
    let prior = GammaWeightPrior::new(2.0, 1.0, 2.0).unwrap();
    let mut st = ChainState::new(model(), x, prior, BackgroundModel::none(), &fixed(0), None, RngStream::new(3, 0)).unwrap();
    st.set_partition(&Partition::from_labels(&[1, 1, 1, 2])).unwrap();
    let mut w3 = Vec::new();
    for _ in 0..20_000 {
        st.resample_latent_events();
        assert_eq!(st.latents().len(), 2);
        w3.push(st.latents()[0].w.unwrap());
    }
    // Ga(α + 3, β + 1) has mean 2.5.
    let m = crate::eval::stats::mean(&w3);
    assert!((m - 2.5).abs() < 0.03, "{m}");
}

#[test]
fn joint_density_orders_configurations() {
    let x = pts(&[0.3, 0.302, 0.9]);
    let prior = GammaWeightPrior::new(1.0, 1.0, 2.0).unwrap();
    let mut st = ChainState::new(
        model(),
        x.clone(),
        prior,
        BackgroundModel::none(),
        &fixed(0),
        None,
        RngStream::new(4, 0),
    )
    .unwrap();
    let exact = enumerate_posterior(&model(), &x, &prior, &BackgroundModel::none()).unwrap();
    let mut pairs = Vec::new();
    for (z, p) in &exact.probs {
        st.set_partition(&Partition::from_labels(z)).unwrap();
        pairs.push((st.joint_log_density(), p.ln()));
    }
    let shift = pairs[0].0 - pairs[0].1;
    for (j, l) in pairs {
        assert!((j - l - shift).abs() < 1e-9);
    }
}

#[test]
fn background_only_start_and_audit() {
    let x = pts(&[0.1, 0.5, 0.9]);
    let prior = GammaWeightPrior::new(1.0, 1.0, 2.0).unwrap();
    let bg = BackgroundModel::new(3.0, 1.0, 1.0).unwrap();
    let mut st = ChainState::new(model(), x, prior, bg, &ChainConfig::plain(1, 1), None, RngStream::new(5, 0)).unwrap();
    assert_eq!(st.partition().n_background(), 3);
    for _ in 0..50 {
        st.sweep().unwrap();
        st.audit().unwrap();
    }
    assert!(st.set_background_rate(0.0).is_err());
}

#[test]
fn rejects_points_outside_domain_or_mask() {
    let prior = GammaWeightPrior::new(1.0, 1.0, 2.0).unwrap();
    let cfg = ChainConfig::plain(1, 1);
    let bad = ChainState::new(
        model(),
        pts(&[1.5]),
        prior,
        BackgroundModel::none(),
        &cfg,
        None,
        RngStream::new(0, 0),
    );
    assert!(bad.is_err());
    let mask = crate::eval::SpeckledMask::new(
        model().domain(),
        vec![crate::eval::MaskRegion {
            lower: vec![0.0],
            upper: vec![0.2],
            group: None,
        }],
    )
    .unwrap();
    let masked = ChainState::new(
        model(),
        pts(&[0.1]),
        prior,
        BackgroundModel::none(),
        &cfg,
        Some(mask),
        RngStream::new(0, 0),
    );
    assert!(masked.is_err());
}

#[test]
fn hyperparameter_moves_run_only_at_unit_temperature() {
    let x = pts(&[0.1, 0.12, 0.5, 0.55, 0.9]);
    let prior = GammaWeightPrior::new(1.0, 1.0, 3.0).unwrap();
    let cfg = ChainConfig {
        alpha_move: Some(AlphaMove {
            step: 0.3,
            shape: 2.0,
            rate: 2.0,
        }),
        ..ChainConfig::plain(1, 1)
    };
    let mut st = ChainState::new(model(), x, prior, BackgroundModel::none(), &cfg, None, RngStream::new(6, 0)).unwrap();
    st.set_temperature(5.0);
    for _ in 0..10 {
        st.sweep().unwrap();
    }
    assert_eq!(*st.prior(), prior);
    st.set_temperature(1.0);
    for _ in 0..10 {
        st.sweep().unwrap();
    }
    assert_ne!(st.prior().nu_bar(), prior.nu_bar());
    assert_ne!(st.prior().alpha(), prior.alpha());
}
