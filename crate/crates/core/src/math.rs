//! Log-space numerics and the handful of samplers the crate needs beyond
//! `rand_distr`.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal, Poisson, StandardNormal};
use statrs::function::erf::erfc;
pub use statrs::function::gamma::ln_gamma;

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Variance floor for degenerate clusters.
pub const VAR_FLOOR: f64 = 1e-12;

/// Probability floor applied to Dirichlet draws before renormalizing.
pub const PROB_FLOOR: f64 = 1e-300;

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// log(e^a + e^b).
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Mean of exp(xs) in log space.
pub fn log_mean_exp(xs: &[f64]) -> f64 {
    log_sum_exp(xs) - (xs.len() as f64).ln()
}

/// log Γ_D(a), the multivariate gamma function.
pub fn ln_multi_gamma(dim: usize, a: f64) -> f64 {
    let d = dim as f64;
    0.25 * d * (d - 1.0) * std::f64::consts::PI.ln() + (0..dim).map(|j| ln_gamma(a - 0.5 * j as f64)).sum::<f64>()
}

pub fn ln_factorial(n: u64) -> f64 {
    ln_gamma(n as f64 + 1.0)
}

/// x·ln(y) with the convention 0·ln 0 = 0.
pub fn xlny(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

pub fn log_normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (LN_2PI + var.ln() + d * d / var)
}

/// log NB(n | r, p) with success probability p = 1/(1+β), i.e. the
/// Poisson–Gamma(r, β) mixture. r = 0 is the point mass at zero.
pub fn log_neg_binomial(n: u64, r: f64, beta: f64) -> f64 {
    if r == 0.0 {
        return if n == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let nf = n as f64;
    ln_gamma(nf + r) - ln_gamma(nf + 1.0) - ln_gamma(r) + r * (beta / (1.0 + beta)).ln() - nf * (1.0 + beta).ln()
}

pub fn log_poisson(n: u64, mean: f64) -> f64 {
    if mean == 0.0 {
        return if n == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let nf = n as f64;
    nf * mean.ln() - mean - ln_gamma(nf + 1.0)
}

/// Index drawn with probability proportional to exp(log_weights).
///
/// Returns `None` if every weight is -inf or any weight is NaN.
pub fn sample_log_categorical<R: Rng + ?Sized>(log_weights: &[f64], rng: &mut R) -> Option<usize> {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() || log_weights.iter().any(|w| w.is_nan()) {
        return None;
    }
    let total: f64 = log_weights.iter().map(|w| (w - max).exp()).sum();
    let mut u = rng.random::<f64>() * total;
    let mut last = 0;
    for (i, w) in log_weights.iter().enumerate() {
        let p = (w - max).exp();
        if p > 0.0 {
            last = i;
            if u < p {
                return Some(i);
            }
            u -= p;
        }
    }
    Some(last)
}

/// Index drawn with probability proportional to non-negative `weights`.
pub fn sample_categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return None;
    }
    let mut u = rng.random::<f64>() * total;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last = i;
            if u < w {
                return Some(i);
            }
            u -= w;
        }
    }
    Some(last)
}

/// Gamma(shape, rate) draw; shape 0 gives 0.
pub fn sample_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    if shape == 0.0 {
        return 0.0;
    }
    Gamma::new(shape, 1.0 / rate)
        .expect("gamma parameters must be positive and finite")
        .sample(rng)
}

/// log of a Gamma(shape, 1) draw, accurate for shapes far below 1 where the
/// draw itself underflows.
pub fn sample_log_gamma<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape >= 1.0 {
        return sample_gamma(shape, 1.0, rng).ln();
    }
    // G(a) = G(a+1) · U^{1/a}
    let g = sample_gamma(shape + 1.0, 1.0, rng);
    let u: f64 = rng.random::<f64>();
    g.ln() + u.max(f64::MIN_POSITIVE).ln() / shape
}

/// Dirichlet draw, computed in log space and floored at [`PROB_FLOOR`].
pub fn sample_dirichlet<R: Rng + ?Sized>(conc: &[f64], rng: &mut R) -> Vec<f64> {
    let logs: Vec<f64> = conc.iter().map(|&a| sample_log_gamma(a, rng)).collect();
    let norm = log_sum_exp(&logs);
    let mut p: Vec<f64> = logs.iter().map(|l| (l - norm).exp().max(PROB_FLOOR)).collect();
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    p
}

pub fn sample_poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("finite poisson mean").sample(rng) as u64
}

/// NB(r, 1/(1+β)) via its Poisson–Gamma representation.
pub fn sample_neg_binomial<R: Rng + ?Sized>(r: f64, beta: f64, rng: &mut R) -> u64 {
    if r == 0.0 {
        return 0;
    }
    let rate = sample_gamma(r, beta, rng);
    sample_poisson(rate, rng)
}

pub fn sample_normal<R: Rng + ?Sized>(mean: f64, var: f64, rng: &mut R) -> f64 {
    Normal::new(mean, var.max(0.0).sqrt())
        .expect("finite normal parameters")
        .sample(rng)
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Inverse-gamma(shape, scale) draw.
pub fn sample_inv_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> f64 {
    scale / sample_gamma(shape, 1.0, rng)
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi's initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 {
                1.0
            } else if n == 1 {
                x
            } else {
                p1
            };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}
