use serde::{Deserialize, Serialize};

use crate::math::{ln_factorial, ln_gamma, xlny};

/// The partition law used by the Gibbs sampler: either the gamma-weight
/// NSP law or its Dirichlet-process limit (α → 0 with αL̄ → γ).
///
/// L̄ is stored as a logarithm so very concentrated weight priors do not
/// overflow.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum PartitionPrior {
    Nsp { alpha: f64, beta: f64, log_lbar: f64 },
    DpmmLimit { gamma: f64, beta: f64 },
}

impl PartitionPrior {
    pub fn nsp(alpha: f64, beta: f64, lbar: f64) -> Self {
        PartitionPrior::Nsp {
            alpha,
            beta,
            log_lbar: lbar.ln(),
        }
    }

    pub fn dpmm(gamma: f64, beta: f64) -> Self {
        PartitionPrior::DpmmLimit { gamma, beta }
    }

    pub fn beta(&self) -> f64 {
        match *self {
            PartitionPrior::Nsp { beta, .. } | PartitionPrior::DpmmLimit { beta, .. } => beta,
        }
    }

    /// Unnormalized log weight for joining a cluster of `size` points.
    pub fn log_existing(&self, size: usize) -> f64 {
        match *self {
            PartitionPrior::Nsp { alpha, .. } => (size as f64 + alpha).ln(),
            PartitionPrior::DpmmLimit { .. } => (size as f64).ln(),
        }
    }

    /// Unnormalized log weight for opening a new cluster.
    pub fn log_new(&self) -> f64 {
        match *self {
            PartitionPrior::Nsp { alpha, beta, log_lbar } => alpha.ln() + log_lbar + alpha * (beta / (1.0 + beta)).ln(),
            PartitionPrior::DpmmLimit { gamma, .. } => gamma.ln(),
        }
    }

    /// Factor multiplying the background intensity in the assignment step.
    pub fn log_background_boost(&self) -> f64 {
        self.beta().ln_1p()
    }

    /// log p(N, C0, C) given cluster sizes, background count and w0.
    pub fn log_joint(&self, sizes: &[usize], n_background: usize, w0: f64) -> f64 {
        let m: usize = sizes.iter().sum();
        let n = m + n_background;
        let k = sizes.len() as f64;
        let beta = self.beta();
        let head = ln_factorial(m as u64) - ln_factorial(n as u64) - w0 + xlny(n_background as f64, w0)
            - ln_factorial(m as u64)
            - m as f64 * beta.ln_1p();
        match *self {
            PartitionPrior::Nsp { alpha, log_lbar, .. } => {
                let log_q = alpha * (beta / (1.0 + beta)).ln();
                let lg_a = ln_gamma(alpha);
                let clusters = if sizes.is_empty() { 0.0 } else { k * (log_lbar + log_q) };
                head + clusters - log_lbar.exp() * (1.0 - log_q.exp())
                    + sizes.iter().map(|&s| ln_gamma(s as f64 + alpha) - lg_a).sum::<f64>()
            }
            PartitionPrior::DpmmLimit { gamma, .. } => {
                head + k * gamma.ln() - gamma * ((1.0 + beta) / beta).ln() + sizes.iter().map(|&s| ln_gamma(s as f64)).sum::<f64>()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::log_sum_exp;
    use crate::partition::{enumerate_partitions_with_background, log_eppf_with_background, VCoefficientTable};

    #[test]
    fn nsp_joint_matches_eppf() {
        let (a, b, l, w0) = (1.4, 0.6, 3.3, 0.7);
        let prior = PartitionPrior::nsp(a, b, l);
        let t = VCoefficientTable::from_parts(a, b, l);
        for p in enumerate_partitions_with_background(4).unwrap() {
            let got = prior.log_joint(&p.sizes(), p.n_background(), w0);
            let want = log_eppf_with_background(&p, &t, w0);
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn dpmm_joint_is_the_small_alpha_limit() {
        let (gamma, b, w0): (f64, f64, f64) = (1.5, 2.0, 0.3);
        let alpha: f64 = 1e-7;
        let log_q = alpha * (b / (1.0 + b)).ln();
        let lbar = gamma / alpha / log_q.exp();
        let nsp = PartitionPrior::nsp(alpha, b, lbar);
        let dp = PartitionPrior::dpmm(gamma, b);
        for p in enumerate_partitions_with_background(4).unwrap() {
            let (s, c0) = (p.sizes(), p.n_background());
            assert!((nsp.log_joint(&s, c0, w0) - dp.log_joint(&s, c0, w0)).abs() < 1e-5);
        }
        assert!((nsp.log_new() - dp.log_new()).abs() < 1e-12);
    }

    #[test]
    fn dpmm_joint_normalizes_over_partitions_and_sizes() {
        // Σ_N Σ_{C0,C} p(N, C0, C) = 1 for the limit law too.
        let dp = PartitionPrior::dpmm(0.8, 1.2);
        let w0 = 0.5;
        let mut total = Vec::new();
        for n in 0..=7 {
            for p in enumerate_partitions_with_background(n).unwrap() {
                total.push(dp.log_joint(&p.sizes(), p.n_background(), w0));
            }
        }
        let mass = log_sum_exp(&total).exp();
        assert!(mass < 1.0 && mass > 0.95, "{mass}");
    }
}
