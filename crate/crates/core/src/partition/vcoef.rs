use std::collections::HashMap;
use std::sync::RwLock;

use crate::domain::{Domain, GammaWeightPrior};
use crate::error::{NspError, Result};
use crate::math::{ln_factorial, log_neg_binomial, log_poisson, log_sum_exp};

pub const DEFAULT_TRUNCATION_TOL: f64 = 1e-12;

/// Tail mass above which a truncated latent-count posterior is flagged.
const TAIL_WARN: f64 = 1e-9;

/// V-coefficients and the size marginal p(N) for one (α, β, L̄).
///
/// The Poisson-weighted series defining V_{N,K} sums in closed form:
/// with q = (β/(1+β))^α,
///
/// ```text
/// log V_{N,K} = -log N! - N log(1+β) + K log(L̄ q) - L̄ (1 - q)
/// ```
///
/// so `log_v` is O(1) and exact. p(N) has no such form and is summed,
/// then memoized.
#[derive(Debug)]
pub struct VCoefficientTable {
    alpha: f64,
    beta: f64,
    lbar: f64,
    truncation_tol: f64,
    log_p_n: RwLock<HashMap<u64, f64>>,
}

impl Clone for VCoefficientTable {
    fn clone(&self) -> Self {
        Self {
            alpha: self.alpha,
            beta: self.beta,
            lbar: self.lbar,
            truncation_tol: self.truncation_tol,
            log_p_n: RwLock::new(self.log_p_n.read().expect("poisoned cache").clone()),
        }
    }
}

/// Normalized posterior over the latent-event count L given N.
#[derive(Clone, Debug)]
pub struct LatentCountPosterior {
    pub probs: Vec<f64>,
    /// Mass beyond `l_max` lost to truncation.
    pub tail_mass: f64,
    pub truncated: bool,
}

impl VCoefficientTable {
    pub fn new(prior: &GammaWeightPrior, domain: &Domain) -> Self {
        Self::from_parts(prior.alpha(), prior.beta(), prior.lbar(domain))
    }

    pub fn from_parts(alpha: f64, beta: f64, lbar: f64) -> Self {
        Self {
            alpha,
            beta,
            lbar,
            truncation_tol: DEFAULT_TRUNCATION_TOL,
            log_p_n: RwLock::new(HashMap::new()),
        }
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.truncation_tol = tol;
        self.log_p_n.get_mut().expect("poisoned cache").clear();
        self
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn lbar(&self) -> f64 {
        self.lbar
    }

    pub fn truncation_tol(&self) -> f64 {
        self.truncation_tol
    }

    /// log (β/(1+β))^α.
    pub fn log_q(&self) -> f64 {
        self.alpha * (self.beta / (1.0 + self.beta)).ln()
    }

    /// log V_{N,K+1} − log V_{N,K} = log L̄ + α log(β/(1+β)).
    pub fn log_ratio(&self) -> f64 {
        self.lbar.ln() + self.log_q()
    }

    pub fn log_v(&self, n: u64, k: u64) -> Result<f64> {
        if k > n {
            return Err(NspError::Domain(format!("cluster count {k} exceeds point count {n}")));
        }
        Ok(self.log_v_unchecked(n, k))
    }

    pub(crate) fn log_v_unchecked(&self, n: u64, k: u64) -> f64 {
        let q = self.log_q().exp();
        let cluster_term = if k == 0 { 0.0 } else { k as f64 * self.log_ratio() };
        -ln_factorial(n) - n as f64 * self.beta.ln_1p() + cluster_term - self.lbar * (1.0 - q)
    }

    fn log_term(&self, l: u64, n: u64) -> f64 {
        log_poisson(l, self.lbar) + log_neg_binomial(n, l as f64 * self.alpha, self.beta)
    }

    /// log p(N = n) = log Σ_L Po(L | L̄) NB(n | Lα, 1/(1+β)).
    pub fn log_p_n(&self, n: u64) -> f64 {
        if let Some(&v) = self.log_p_n.read().expect("poisoned cache").get(&n) {
            return v;
        }
        let v = self.sum_series(n);
        self.log_p_n.write().expect("poisoned cache").insert(n, v);
        v
    }

    fn sum_series(&self, n: u64) -> f64 {
        if self.lbar == 0.0 {
            return if n == 0 { 0.0 } else { f64::NEG_INFINITY };
        }
        let floor = self.lbar + 10.0 * self.lbar.sqrt() + n as f64;
        let log_tol = self.truncation_tol.ln();
        let mut acc = f64::NEG_INFINITY;
        let mut l = 0u64;
        loop {
            let t = self.log_term(l, n);
            acc = crate::math::log_add_exp(acc, t);
            if l as f64 > floor && t < acc + log_tol {
                return acc;
            }
            l += 1;
        }
    }

    /// p(L | N = n) for L = 0..=l_max.
    pub fn latent_count_posterior(&self, n: u64, l_max: u64) -> LatentCountPosterior {
        let norm = self.log_p_n(n);
        let logs: Vec<f64> = (0..=l_max).map(|l| self.log_term(l, n) - norm).collect();
        let kept = log_sum_exp(&logs).exp();
        let tail_mass = (1.0 - kept).max(0.0);
        let truncated = tail_mass > TAIL_WARN;
        if truncated {
            log::warn!("latent-count posterior truncated at {l_max} loses mass {tail_mass:.3e}");
        }
        let mut probs: Vec<f64> = logs.iter().map(|l| l.exp()).collect();
        probs.iter_mut().for_each(|p| *p /= kept);
        LatentCountPosterior {
            probs,
            tail_mass,
            truncated,
        }
    }
}
