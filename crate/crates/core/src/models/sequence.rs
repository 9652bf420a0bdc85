//! Neural sequences: each latent event has a time `m`, a sequence type `s`
//! and (optionally) a warp index `f`. A spike on neuron `y` lands at
//! `N(m + τ_f b[s][y], τ_f σ²[s][y])` with neuron drawn from `a_s`.
//!
//! The discrete parameters and the event time are integrated out exactly:
//! for each (s, f) the likelihood is Gaussian in `m`, so the statistics keep
//! its natural parameters and the marginal is a finite mixture.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ClusterModel, ClusterView};
use crate::domain::{Domain, Mark, MarkedPoint};
use crate::error::{NspError, Result};
use crate::math::{
    log_sum_exp, normal_cdf, sample_categorical, sample_dirichlet, sample_inv_gamma, sample_log_categorical, sample_normal, LN_2PI,
    VAR_FLOOR,
};

/// Hyperparameters of the global-parameter priors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SequencePriors {
    pub type_conc: f64,
    pub neuron_conc: f64,
    pub background_conc: f64,
    pub offset_mean: f64,
    pub offset_kappa: f64,
    pub width_shape: f64,
    pub width_scale: f64,
}

impl Default for SequencePriors {
    fn default() -> Self {
        Self {
            type_conc: 1.0,
            neuron_conc: 1.0,
            background_conc: 1.0,
            offset_mean: 0.0,
            offset_kappa: 1.0,
            width_shape: 2.0,
            width_scale: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceConfig {
    pub n_neurons: usize,
    pub n_types: usize,
    /// π; uniform when absent.
    #[serde(default)]
    pub type_probs: Option<Vec<f64>>,
    /// a_s, one row per type; uniform when absent.
    #[serde(default)]
    pub neuron_probs: Option<Vec<Vec<f64>>>,
    /// `b[s][y]` in time units; zero when absent.
    #[serde(default)]
    pub offsets: Option<Vec<Vec<f64>>>,
    /// `σ[s][y]` (standard deviations); one when absent.
    #[serde(default)]
    pub widths: Option<Vec<Vec<f64>>>,
    /// a_0 for background spikes; uniform when absent.
    #[serde(default)]
    pub background_neuron_probs: Option<Vec<f64>>,
    /// Explicit warp grid. Takes precedence over `n_warps`/`max_warp`.
    #[serde(default)]
    pub warp_values: Option<Vec<f64>>,
    /// Size of the default geometric grid; 1 means no warping.
    #[serde(default = "one")]
    pub n_warps: usize,
    #[serde(default = "default_max_warp")]
    pub max_warp: f64,
    #[serde(default)]
    pub priors: SequencePriors,
}

fn one() -> usize {
    1
}

fn default_max_warp() -> f64 {
    1.5
}

impl SequenceConfig {
    pub fn new(n_neurons: usize, n_types: usize) -> Self {
        Self {
            n_neurons,
            n_types,
            type_probs: None,
            neuron_probs: None,
            offsets: None,
            widths: None,
            background_neuron_probs: None,
            warp_values: None,
            n_warps: 1,
            max_warp: default_max_warp(),
            priors: SequencePriors::default(),
        }
    }
}

/// `n` values geometrically spaced on [1/max, max]; `[1.0]` for n = 1.
pub fn geometric_warp_grid(n: usize, max_warp: f64) -> Vec<f64> {
    if n <= 1 {
        return vec![1.0];
    }
    let lm = max_warp.ln();
    (0..n).map(|f| (lm * (2.0 * f as f64 / (n - 1) as f64 - 1.0)).exp()).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceParam {
    pub seq_type: usize,
    /// Warp index; absent for unwarped models.
    pub warp: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceGlobals {
    pub type_probs: Vec<f64>,
    pub neuron_probs: Vec<Vec<f64>>,
    pub offsets: Vec<Vec<f64>>,
    /// `σ²[s][y]`.
    pub variances: Vec<Vec<f64>>,
    pub background_neuron_probs: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct SequenceModel {
    domain: Domain,
    n_neurons: usize,
    n_types: usize,
    warps: Vec<f64>,
    warped: bool,
    priors: SequencePriors,
    globals: SequenceGlobals,
    // caches, rebuilt from globals
    log_pi: Vec<f64>,
    log_a: Vec<f64>,
    log_a0: Vec<f64>,
    log_t: f64,
    log_f: f64,
}

/// Per-(s, f) Gaussian natural parameters of the likelihood in `m`.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceStats {
    n: usize,
    j: Vec<f64>,
    h: Vec<f64>,
    c: Vec<f64>,
    la: Vec<f64>,
    log_z: f64,
}

fn check_prob(v: &[f64], len: usize, what: &str) -> Result<Vec<f64>> {
    if v.len() != len || v.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(NspError::InvalidConfig(format!("{what} must have {len} non-negative entries")));
    }
    let total: f64 = v.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(NspError::InvalidConfig(format!("{what} must sum to 1, got {total}")));
    }
    Ok(v.iter().map(|p| p / total).collect())
}

fn check_matrix(m: &[Vec<f64>], s: usize, y: usize, what: &str) -> Result<()> {
    if m.len() != s || m.iter().any(|r| r.len() != y) {
        return Err(NspError::InvalidConfig(format!("{what} must be {s}x{y}")));
    }
    Ok(())
}

impl SequenceModel {
    pub fn new(config: &SequenceConfig, domain: &Domain) -> Result<Self> {
        let bad = |m: &str| NspError::InvalidConfig(m.into());
        if domain.dim() != 1 {
            return Err(bad("sequence model needs a 1-D time domain"));
        }
        let (s_n, y_n) = (config.n_types, config.n_neurons);
        if s_n == 0 || y_n == 0 {
            return Err(bad("n_types and n_neurons must be positive"));
        }
        let uniform = |k: usize| vec![1.0 / k as f64; k];
        let type_probs = match &config.type_probs {
            Some(p) => check_prob(p, s_n, "type_probs")?,
            None => uniform(s_n),
        };
        let neuron_probs = match &config.neuron_probs {
            Some(rows) => {
                check_matrix(rows, s_n, y_n, "neuron_probs")?;
                rows.iter().map(|r| check_prob(r, y_n, "neuron_probs row")).collect::<Result<_>>()?
            }
            None => vec![uniform(y_n); s_n],
        };
        let offsets = match &config.offsets {
            Some(m) => {
                check_matrix(m, s_n, y_n, "offsets")?;
                if m.iter().flatten().any(|b| !b.is_finite()) {
                    return Err(bad("offsets must be finite"));
                }
                m.clone()
            }
            None => vec![vec![0.0; y_n]; s_n],
        };
        let variances = match &config.widths {
            Some(m) => {
                check_matrix(m, s_n, y_n, "widths")?;
                if m.iter().flatten().any(|w| !(w.is_finite() && *w > 0.0)) {
                    return Err(bad("widths must be positive"));
                }
                m.iter().map(|r| r.iter().map(|w| w * w).collect()).collect()
            }
            None => vec![vec![1.0; y_n]; s_n],
        };
        let background_neuron_probs = match &config.background_neuron_probs {
            Some(p) => check_prob(p, y_n, "background_neuron_probs")?,
            None => uniform(y_n),
        };
        let (warps, warped) = match &config.warp_values {
            Some(w) => (w.clone(), true),
            None => (geometric_warp_grid(config.n_warps, config.max_warp), config.n_warps > 1),
        };
        if warps.is_empty() || warps.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(bad("warp values must be positive"));
        }
        if !(config.max_warp >= 1.0) {
            return Err(bad("max_warp must be >= 1"));
        }
        let p = &config.priors;
        if [
            p.type_conc,
            p.neuron_conc,
            p.background_conc,
            p.offset_kappa,
            p.width_shape,
            p.width_scale,
        ]
        .iter()
        .any(|v| !(v.is_finite() && *v > 0.0))
            || !p.offset_mean.is_finite()
        {
            return Err(bad("sequence priors must be positive"));
        }
        let mut model = Self {
            domain: domain.clone(),
            n_neurons: y_n,
            n_types: s_n,
            log_f: (warps.len() as f64).ln(),
            warps,
            warped,
            priors: p.clone(),
            globals: SequenceGlobals {
                type_probs,
                neuron_probs,
                offsets,
                variances,
                background_neuron_probs,
            },
            log_pi: vec![],
            log_a: vec![],
            log_a0: vec![],
            log_t: domain.measure().ln(),
        };
        model.rebuild();
        Ok(model)
    }

    fn rebuild(&mut self) {
        let g = &self.globals;
        self.log_pi = g.type_probs.iter().map(|p| p.ln()).collect();
        self.log_a = g.neuron_probs.iter().flatten().map(|p| p.ln()).collect();
        self.log_a0 = g.background_neuron_probs.iter().map(|p| p.ln()).collect();
    }

    pub fn n_neurons(&self) -> usize {
        self.n_neurons
    }

    pub fn n_types(&self) -> usize {
        self.n_types
    }

    pub fn warps(&self) -> &[f64] {
        &self.warps
    }

    pub fn is_warped(&self) -> bool {
        self.warped
    }

    fn n_sf(&self) -> usize {
        self.n_types * self.warps.len()
    }

    fn neuron_of(p: &MarkedPoint) -> usize {
        p.neuron().expect("sequence model points carry a neuron mark")
    }

    /// Mean shift and variance of a spike on `y` under (s, f).
    fn shift_var(&self, s: usize, f: usize, y: usize) -> (f64, f64) {
        let tau = self.warps[f];
        (
            tau * self.globals.offsets[s][y],
            (tau * self.globals.variances[s][y]).max(VAR_FLOOR),
        )
    }

    fn term(&self, k: usize, n: usize, j: f64, h: f64, c: f64, la: f64) -> f64 {
        let s = k / self.warps.len();
        let base = self.log_pi[s] - self.log_f;
        if n == 0 {
            return base;
        }
        base - self.log_t + la + c + h * h / (2.0 * j) + 0.5 * (LN_2PI - j.ln())
    }

    fn log_z(&self, st: &SequenceStats) -> f64 {
        if st.n == 0 {
            return 0.0;
        }
        let f_n = self.warps.len();
        let terms: Vec<f64> = (0..self.n_sf())
            .map(|k| self.term(k, st.n, st.j[k], st.h[k], st.c[k], st.la[k / f_n]))
            .collect();
        log_sum_exp(&terms)
    }

    fn update(&self, st: &mut SequenceStats, p: &MarkedPoint, sign: f64) {
        let y = Self::neuron_of(p);
        let x = p.x[0];
        let f_n = self.warps.len();
        for k in 0..self.n_sf() {
            let (s, f) = (k / f_n, k % f_n);
            let (shift, var) = self.shift_var(s, f, y);
            let r = x - shift;
            st.j[k] += sign / var;
            st.h[k] += sign * r / var;
            st.c[k] += sign * (-0.5 * (LN_2PI + var.ln()) - r * r / (2.0 * var));
        }
        for s in 0..self.n_types {
            st.la[s] += sign * self.log_a[s * self.n_neurons + y];
        }
    }

    fn sf_log_weights(&self, st: &SequenceStats) -> Vec<f64> {
        let f_n = self.warps.len();
        (0..self.n_sf())
            .map(|k| self.term(k, st.n, st.j[k], st.h[k], st.c[k], st.la[k / f_n]))
            .collect()
    }

    fn param(&self, s: usize, f: usize) -> SequenceParam {
        SequenceParam {
            seq_type: s,
            warp: self.warped.then_some(f),
        }
    }

    fn check_param(&self, theta: &SequenceParam) -> (usize, usize) {
        (theta.seq_type, theta.warp.unwrap_or(0))
    }
}

impl ClusterModel for SequenceModel {
    type Stats = SequenceStats;
    type Param = SequenceParam;
    type Globals = SequenceGlobals;

    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn check_point(&self, p: &MarkedPoint) -> Result<()> {
        if p.x.len() != 1 {
            return Err(NspError::Domain("spike times are one-dimensional".into()));
        }
        match p.neuron() {
            Some(y) if y < self.n_neurons => Ok(()),
            Some(y) => Err(NspError::Domain(format!("neuron {y} out of range (Y = {})", self.n_neurons))),
            None => Err(NspError::Domain("spike is missing its neuron mark".into())),
        }
    }

    fn empty_stats(&self) -> SequenceStats {
        let k = self.n_sf();
        SequenceStats {
            n: 0,
            j: vec![0.0; k],
            h: vec![0.0; k],
            c: vec![0.0; k],
            la: vec![0.0; self.n_types],
            log_z: 0.0,
        }
    }

    fn stats_size(&self, s: &SequenceStats) -> usize {
        s.n
    }

    fn stats_add(&self, s: &mut SequenceStats, p: &MarkedPoint) {
        self.update(s, p, 1.0);
        s.n += 1;
        s.log_z = self.log_z(s);
    }

    fn stats_remove(&self, s: &mut SequenceStats, p: &MarkedPoint) {
        assert!(s.n > 0, "removing a spike from empty statistics");
        if s.n == 1 {
            *s = self.empty_stats();
            return;
        }
        self.update(s, p, -1.0);
        s.n -= 1;
        s.log_z = self.log_z(s);
    }

    fn log_marginal_new(&self, p: &MarkedPoint) -> f64 {
        self.log_predictive(&self.empty_stats(), p)
    }

    fn log_predictive(&self, st: &SequenceStats, p: &MarkedPoint) -> f64 {
        let y = Self::neuron_of(p);
        let x = p.x[0];
        let f_n = self.warps.len();
        let terms: Vec<f64> = (0..self.n_sf())
            .map(|k| {
                let (s, f) = (k / f_n, k % f_n);
                let (shift, var) = self.shift_var(s, f, y);
                let r = x - shift;
                let j = st.j[k] + 1.0 / var;
                let h = st.h[k] + r / var;
                let c = st.c[k] + (-0.5 * (LN_2PI + var.ln()) - r * r / (2.0 * var));
                let la = st.la[s] + self.log_a[s * self.n_neurons + y];
                self.term(k, st.n + 1, j, h, c, la)
            })
            .collect();
        log_sum_exp(&terms) - st.log_z
    }

    fn log_cluster_marginal(&self, s: &SequenceStats) -> f64 {
        s.log_z
    }

    fn sample_posterior_params<R: Rng + ?Sized>(&self, st: &SequenceStats, rng: &mut R) -> (Vec<f64>, SequenceParam) {
        if st.n == 0 {
            return self.sample_prior_params(rng);
        }
        let k = sample_log_categorical(&self.sf_log_weights(st), rng).expect("finite mixture weights");
        let f_n = self.warps.len();
        let m = sample_normal(st.h[k] / st.j[k], 1.0 / st.j[k], rng);
        (vec![m], self.param(k / f_n, k % f_n))
    }

    fn sample_prior_params<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, SequenceParam) {
        let s = sample_categorical(&self.globals.type_probs, rng).expect("valid type probabilities");
        let f = if self.warps.len() > 1 {
            rng.random_range(0..self.warps.len())
        } else {
            0
        };
        let m = self.domain.sample_uniform(rng);
        (m, self.param(s, f))
    }

    fn sample_point<R: Rng + ?Sized>(&self, m: &[f64], theta: &SequenceParam, rng: &mut R) -> MarkedPoint {
        let (s, f) = self.check_param(theta);
        let y = sample_categorical(&self.globals.neuron_probs[s], rng).expect("valid neuron probabilities");
        let (shift, var) = self.shift_var(s, f, y);
        let x = sample_normal(m[0] + shift, var, rng);
        MarkedPoint::unchecked(vec![x], Some(Mark::Neuron { neuron: y }))
    }

    fn log_emission(&self, m: &[f64], theta: &SequenceParam, p: &MarkedPoint) -> f64 {
        let (s, f) = self.check_param(theta);
        let y = Self::neuron_of(p);
        let (shift, var) = self.shift_var(s, f, y);
        let r = p.x[0] - m[0] - shift;
        self.log_a[s * self.n_neurons + y] - 0.5 * (LN_2PI + var.ln()) - r * r / (2.0 * var)
    }

    fn emission_mass(&self, m: &[f64], theta: &SequenceParam, region: &Domain, group: Option<usize>) -> Result<f64> {
        let (s, f) = self.check_param(theta);
        let neurons: Vec<usize> = match group {
            Some(y) if y < self.n_neurons => vec![y],
            Some(y) => return Err(NspError::Domain(format!("neuron {y} out of range"))),
            None => (0..self.n_neurons).collect(),
        };
        let (lo, hi) = (region.lower()[0], region.upper()[0]);
        Ok(neurons
            .into_iter()
            .map(|y| {
                let (shift, var) = self.shift_var(s, f, y);
                let (mu, sd) = (m[0] + shift, var.sqrt());
                self.globals.neuron_probs[s][y] * (normal_cdf((hi - mu) / sd) - normal_cdf((lo - mu) / sd)).max(0.0)
            })
            .sum())
    }

    fn mark_group(&self, p: &MarkedPoint) -> Option<usize> {
        p.neuron()
    }

    fn background_log_mark_density(&self, p: &MarkedPoint) -> f64 {
        self.log_a0[Self::neuron_of(p)]
    }

    fn background_group_prob(&self, group: Option<usize>) -> f64 {
        group.map_or(1.0, |y| self.globals.background_neuron_probs[y])
    }

    fn sample_background_mark<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<Mark> {
        let y = sample_categorical(&self.globals.background_neuron_probs, rng).expect("valid background probabilities");
        Some(Mark::Neuron { neuron: y })
    }

    fn globals(&self) -> SequenceGlobals {
        self.globals.clone()
    }

    fn set_globals(&mut self, g: SequenceGlobals) {
        self.globals = g;
        self.rebuild();
    }

    fn resample_globals<R: Rng + ?Sized>(&mut self, clusters: &[ClusterView<'_, SequenceParam>], background: &[&MarkedPoint], rng: &mut R) {
        let (s_n, y_n) = (self.n_types, self.n_neurons);
        let pr = self.priors.clone();
        let mut type_counts = vec![pr.type_conc; s_n];
        let mut neuron_counts = vec![vec![pr.neuron_conc; y_n]; s_n];
        // weighted residual moments per (s, y): Σw, Σw r, Σw r², count
        let mut mom = vec![[0.0f64; 4]; s_n * y_n];
        for cl in clusters {
            let (s, f) = self.check_param(cl.theta);
            let tau = self.warps[f];
            type_counts[s] += 1.0;
            for p in &cl.points {
                let y = Self::neuron_of(p);
                neuron_counts[s][y] += 1.0;
                let r = (p.x[0] - cl.m[0]) / tau;
                let e = &mut mom[s * y_n + y];
                e[0] += tau;
                e[1] += tau * r;
                e[2] += tau * r * r;
                e[3] += 1.0;
            }
        }
        let mut bg_counts = vec![pr.background_conc; y_n];
        for p in background {
            bg_counts[Self::neuron_of(p)] += 1.0;
        }
        let mut g = SequenceGlobals {
            type_probs: sample_dirichlet(&type_counts, rng),
            neuron_probs: neuron_counts.iter().map(|c| sample_dirichlet(c, rng)).collect(),
            offsets: vec![vec![0.0; y_n]; s_n],
            variances: vec![vec![0.0; y_n]; s_n],
            background_neuron_probs: vec![],
        };
        for s in 0..s_n {
            for y in 0..y_n {
                let [sw, swr, swr2, cnt] = mom[s * y_n + y];
                let kappa = pr.offset_kappa + sw;
                let mean = (pr.offset_kappa * pr.offset_mean + swr) / kappa;
                let ss = if sw > 0.0 {
                    let rbar = swr / sw;
                    (swr2 - sw * rbar * rbar).max(0.0) + pr.offset_kappa * sw / kappa * (rbar - pr.offset_mean).powi(2)
                } else {
                    0.0
                };
                let var = sample_inv_gamma(pr.width_shape + 0.5 * cnt, pr.width_scale + 0.5 * ss, rng).max(VAR_FLOOR);
                g.variances[s][y] = var;
                g.offsets[s][y] = sample_normal(mean, var / kappa, rng);
            }
        }
        g.background_neuron_probs = sample_dirichlet(&bg_counts, rng);
        self.set_globals(g);
    }

    fn stats_depend_on_globals(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{sample_normal, standard_normal};
    use crate::models::contract;
    use crate::rng::RngStream;

    fn spike(x: f64, y: usize) -> MarkedPoint {
        MarkedPoint::unchecked(vec![x], Some(Mark::Neuron { neuron: y }))
    }

    fn config(warps: Option<Vec<f64>>) -> SequenceConfig {
        let mut c = SequenceConfig::new(3, 2);
        c.type_probs = Some(vec![0.3, 0.7]);
        c.neuron_probs = Some(vec![vec![0.5, 0.3, 0.2], vec![0.1, 0.2, 0.7]]);
        c.offsets = Some(vec![vec![-1.0, 0.0, 1.0], vec![1.0, 0.0, -1.0]]);
        c.widths = Some(vec![vec![0.5, 0.4, 0.6], vec![0.3, 0.5, 0.4]]);
        c.warp_values = warps;
        c
    }

    fn model(warps: Option<Vec<f64>>) -> SequenceModel {
        SequenceModel::new(&config(warps), &Domain::interval(20.0).unwrap()).unwrap()
    }

    fn burst(seed: u64) -> Vec<MarkedPoint> {
        let mut rng = RngStream::new(seed, 0);
        (0..6).map(|i| spike(10.0 + 0.5 * standard_normal(&mut rng), i % 3)).collect()
    }

    #[test]
    fn single_type_marginal_collapses() {
        let mut c = SequenceConfig::new(4, 1);
        c.widths = Some(vec![vec![0.3; 4]]);
        let m = SequenceModel::new(&c, &Domain::interval(8.0).unwrap()).unwrap();
        let want = (0.25f64 / 8.0).ln();
        assert!((m.log_marginal_new(&spike(3.0, 2)) - want).abs() < 1e-12);
    }

    #[test]
    fn two_spike_predictive_matches_monte_carlo() {
        let mut c = SequenceConfig::new(2, 1);
        c.offsets = Some(vec![vec![0.5, -0.3]]);
        c.widths = Some(vec![vec![0.4, 0.7]]);
        c.warp_values = Some(vec![1.5]);
        let m = SequenceModel::new(&c, &Domain::interval(10.0).unwrap()).unwrap();
        let s = m.stats_from([spike(4.0, 0)].iter());
        // closed form: x2 ~ N(x1 - τb0 + τb1, τσ0² + τσ1²), times a[y]
        let tau = 1.5;
        let mean = 4.0 - tau * 0.5 + tau * -0.3;
        let var = tau * 0.16 + tau * 0.49;
        let want = 0.5f64.ln() + crate::math::log_normal_pdf(3.2, mean, var);
        assert!((m.log_predictive(&s, &spike(3.2, 1)) - want).abs() < 1e-12);
        // simulation oracle: m | x1 then x2 | m, probability of a window
        let mut rng = RngStream::new(4, 0);
        let n = 1_000_000;
        let (lo, hi) = (3.0, 3.4);
        let hits = (0..n)
            .filter(|_| {
                let mm = sample_normal(4.0 - tau * 0.5, tau * 0.16, &mut rng);
                let x2 = sample_normal(mm + tau * -0.3, tau * 0.49, &mut rng);
                (lo..hi).contains(&x2)
            })
            .count() as f64
            / n as f64;
        let exact = normal_cdf((hi - mean) / var.sqrt()) - normal_cdf((lo - mean) / var.sqrt());
        assert!((hits - exact).abs() < 4.0 * (exact / n as f64).sqrt());
    }

    #[test]
    fn contract_checks() {
        for w in [None, Some(vec![0.8, 1.0, 1.25])] {
            let m = model(w);
            let pts = burst(1);
            contract::add_remove_roundtrip(&m, &pts, 1e-10);
            contract::exchangeable(&m, &pts, 2);
            contract::predictive_coherence(&m, &pts[..3], &spike(10.2, 1), 100_000);
        }
    }

    #[test]
    fn warped_emission_moments() {
        let mut c = SequenceConfig::new(1, 1);
        c.offsets = Some(vec![vec![0.4]]);
        c.widths = Some(vec![vec![0.5]]);
        c.warp_values = Some(vec![2.0]);
        let m = SequenceModel::new(&c, &Domain::interval(10.0).unwrap()).unwrap();
        let th = SequenceParam {
            seq_type: 0,
            warp: Some(0),
        };
        let mut rng = RngStream::new(5, 0);
        let xs: Vec<f64> = (0..200_000).map(|_| m.sample_point(&[3.0], &th, &mut rng).x[0]).collect();
        let mu = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / xs.len() as f64;
        assert!((mu - 3.8).abs() < 0.01);
        assert!((var - 0.5).abs() < 0.01);
    }

    #[test]
    fn unit_warp_is_bitwise_unwarped() {
        let plain = model(None);
        let warped = model(Some(vec![1.0]));
        assert!(!plain.is_warped() && warped.is_warped());
        let pts = burst(3);
        let (mut a, mut b) = (plain.empty_stats(), warped.empty_stats());
        for p in &pts {
            assert_eq!(plain.log_predictive(&a, p).to_bits(), warped.log_predictive(&b, p).to_bits());
            plain.stats_add(&mut a, p);
            warped.stats_add(&mut b, p);
        }
        assert_eq!(a, b);
        let (mut r1, mut r2) = (RngStream::new(8, 0), RngStream::new(8, 0));
        for _ in 0..50 {
            let (m1, t1) = plain.sample_posterior_params(&a, &mut r1);
            let (m2, t2) = warped.sample_posterior_params(&b, &mut r2);
            assert_eq!(m1, m2);
            assert_eq!(t1.seq_type, t2.seq_type);
            assert_eq!((t1.warp, t2.warp), (None, Some(0)));
            assert_eq!(plain.sample_point(&m1, &t1, &mut r1), warped.sample_point(&m2, &t2, &mut r2));
        }
    }

    #[test]
    fn background_and_globals() {
        let mut c = SequenceConfig::new(4, 1);
        c.background_neuron_probs = Some(vec![0.25; 4]);
        let mut m = SequenceModel::new(&c, &Domain::interval(5.0).unwrap()).unwrap();
        assert!((m.background_log_mark_density(&spike(1.0, 2)) - 0.25f64.ln()).abs() < 1e-15);
        // all spikes on neuron 2 → a_1 concentrates there
        let pts: Vec<MarkedPoint> = (0..200).map(|i| spike(2.0 + 0.001 * i as f64, 2)).collect();
        let th = SequenceParam { seq_type: 0, warp: None };
        let mloc = [2.1];
        let view = ClusterView {
            m: &mloc,
            theta: &th,
            points: pts.iter().collect(),
        };
        let mut rng = RngStream::new(6, 0);
        m.resample_globals(&[view], &[], &mut rng);
        assert!(m.globals().neuron_probs[0][2] > 0.95);
        // no clusters: draws from the prior stay valid
        m.resample_globals(&[], &[], &mut rng);
        let g = m.globals();
        assert!((g.type_probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(g.variances[0].iter().all(|v| *v > 0.0));
    }

    #[test]
    fn emission_mass_sums_over_neurons() {
        let m = model(Some(vec![0.8, 1.25]));
        let th = SequenceParam {
            seq_type: 1,
            warp: Some(1),
        };
        let all = m.emission_mass(&[10.0], &th, &Domain::interval(20.0).unwrap(), None).unwrap();
        assert!((all - 1.0).abs() < 1e-12);
        let parts: f64 = (0..3)
            .map(|y| {
                m.emission_mass(&[10.0], &th, &Domain::new(vec![9.0], vec![11.0]).unwrap(), Some(y))
                    .unwrap()
            })
            .sum();
        let whole = m
            .emission_mass(&[10.0], &th, &Domain::new(vec![9.0], vec![11.0]).unwrap(), None)
            .unwrap();
        assert!((parts - whole).abs() < 1e-14);
    }

    #[test]
    fn warp_grid_is_symmetric() {
        let g = geometric_warp_grid(5, 2.0);
        for (a, b) in g.iter().zip(g.iter().rev()) {
            assert!((a * b - 1.0).abs() < 1e-12);
        }
        assert_eq!(geometric_warp_grid(1, 3.0), vec![1.0]);
    }

    #[test]
    fn rejects_bad_input() {
        let m = model(None);
        assert!(m.check_point(&spike(1.0, 3)).is_err());
        assert!(m.check_point(&MarkedPoint::unchecked(vec![1.0], None)).is_err());
        let mut c = config(None);
        c.type_probs = Some(vec![0.5, 0.6]);
        assert!(SequenceModel::new(&c, &Domain::interval(1.0).unwrap()).is_err());
        let mut c = config(None);
        c.widths = Some(vec![vec![0.0; 3]; 2]);
        assert!(SequenceModel::new(&c, &Domain::interval(1.0).unwrap()).is_err());
    }
}
