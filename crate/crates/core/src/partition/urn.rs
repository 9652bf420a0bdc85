use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Partition;
use crate::domain::{Domain, GammaWeightPrior};
use crate::error::{NspError, Result};
use crate::math::{sample_categorical, sample_log_categorical, sample_neg_binomial, sample_poisson};

/// Sequential (urn) constructions of random partitions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum UrnConfig {
    /// Gamma-weight NSP urn: join ∝ |C_k| + α, new ∝ α L̄ (β/(1+β))^α.
    Nsp { alpha: f64, beta: f64, log_lbar: f64 },
    /// Blackwell–MacQueen urn: join ∝ |C_k|, new ∝ γ.
    DpmmLimit { gamma: f64 },
    /// Two-parameter urn: join ∝ |C_k| − δ, new ∝ γ + |C| δ.
    PitmanYor { gamma: f64, delta: f64 },
    /// NSP urn with a homogeneous background block, weight w0 (1+β).
    BackgroundNsp { alpha: f64, beta: f64, log_lbar: f64, w0: f64 },
}

impl UrnConfig {
    pub fn nsp(prior: &GammaWeightPrior, domain: &Domain) -> Self {
        Self::Nsp {
            alpha: prior.alpha(),
            beta: prior.beta(),
            log_lbar: prior.lbar(domain).ln(),
        }
    }

    /// NSP urn whose new-cluster weight α L̄ (β/(1+β))^α equals `gamma`.
    pub fn nsp_with_new_weight(alpha: f64, beta: f64, gamma: f64) -> Self {
        let log_q = alpha * (beta / (1.0 + beta)).ln();
        Self::Nsp {
            alpha,
            beta,
            log_lbar: gamma.ln() - alpha.ln() - log_q,
        }
    }

    pub fn dpmm(gamma: f64) -> Self {
        Self::DpmmLimit { gamma }
    }

    pub fn pitman_yor(gamma: f64, delta: f64) -> Result<Self> {
        let c = Self::PitmanYor { gamma, delta };
        c.validate()?;
        Ok(c)
    }

    pub fn background_nsp(prior: &GammaWeightPrior, domain: &Domain, w0: f64) -> Self {
        Self::BackgroundNsp {
            alpha: prior.alpha(),
            beta: prior.beta(),
            log_lbar: prior.lbar(domain).ln(),
            w0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(NspError::InvalidConfig(m));
        match *self {
            UrnConfig::Nsp { alpha, beta, .. } | UrnConfig::BackgroundNsp { alpha, beta, .. } if !(alpha > 0.0 && beta > 0.0) => {
                bad(format!("urn needs alpha, beta > 0, got {alpha}, {beta}"))
            }
            UrnConfig::BackgroundNsp { w0, .. } if !(w0 >= 0.0 && w0.is_finite()) => bad(format!("w0 must be non-negative, got {w0}")),
            UrnConfig::DpmmLimit { gamma } if !(gamma > 0.0 && gamma.is_finite()) => bad(format!("gamma must be positive, got {gamma}")),
            UrnConfig::PitmanYor { gamma, delta } => {
                if !(delta < 1.0) {
                    return bad(format!("discount must be below 1, got {delta}"));
                }
                if delta >= 0.0 && !(gamma > -delta) {
                    return bad(format!("need gamma > -delta, got gamma={gamma}, delta={delta}"));
                }
                if delta < 0.0 {
                    let l = gamma / -delta;
                    if !(l >= 1.0 && (l - l.round()).abs() < 1e-9) {
                        return bad(format!(
                            "negative discount needs gamma = L|delta| for integer L, got {gamma}, {delta}"
                        ));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    fn has_background(&self) -> bool {
        matches!(self, UrnConfig::BackgroundNsp { .. })
    }
}

fn nsp_new(alpha: f64, beta: f64, log_lbar: f64) -> f64 {
    alpha.ln() + log_lbar + alpha * (beta / (1.0 + beta)).ln()
}

/// Unnormalized log weights for the next index given cluster sizes:
/// one per existing cluster, then "new", then "background" when the
/// urn has one.
fn log_weights_from_sizes(sizes: &[usize], config: &UrnConfig, out: &mut Vec<f64>) -> Result<()> {
    out.clear();
    let k = sizes.len() as f64;
    match *config {
        UrnConfig::Nsp { alpha, beta, log_lbar } => {
            out.extend(sizes.iter().map(|&s| (s as f64 + alpha).ln()));
            out.push(nsp_new(alpha, beta, log_lbar));
        }
        UrnConfig::DpmmLimit { gamma } => {
            out.extend(sizes.iter().map(|&s| (s as f64).ln()));
            out.push(gamma.ln());
        }
        UrnConfig::PitmanYor { gamma, delta } => {
            out.extend(sizes.iter().map(|&s| (s as f64 - delta).ln()));
            let mut new = gamma + k * delta;
            if new.abs() < 1e-12 {
                new = 0.0;
            }
            if new < 0.0 {
                return Err(NspError::Domain(format!("new-cluster weight {new} is negative with {k} clusters")));
            }
            out.push(new.ln());
        }
        UrnConfig::BackgroundNsp { alpha, beta, log_lbar, w0 } => {
            out.extend(sizes.iter().map(|&s| (s as f64 + alpha).ln()));
            out.push(nsp_new(alpha, beta, log_lbar));
            out.push(w0.ln() + beta.ln_1p());
        }
    }
    Ok(())
}

/// Urn weights for adding index `partition.n_total()`, in the order
/// (clusters in canonical order, new, background?).
pub fn urn_log_weights(partition: &Partition, config: &UrnConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let mut out = Vec::new();
    log_weights_from_sizes(&partition.sizes(), config, &mut out)?;
    Ok(out)
}

/// Adds the next index to `partition` by one urn transition.
pub fn urn_step<R: Rng + ?Sized>(partition: &Partition, config: &UrnConfig, rng: &mut R) -> Result<Partition> {
    if partition.n_background() > 0 && !config.has_background() {
        return Err(NspError::Contract("urn without background got a background block".into()));
    }
    let lw = urn_log_weights(partition, config)?;
    let choice = sample_log_categorical(&lw, rng).ok_or_else(|| NspError::Domain("all urn weights are zero".into()))?;
    let n = partition.n_total();
    let k = partition.n_clusters();
    let mut background = partition.background().to_vec();
    let mut clusters = partition.clusters().to_vec();
    match choice {
        c if c < k => clusters[c].push(n),
        c if c == k => clusters.push(vec![n]),
        _ => background.push(n),
    }
    Partition::new(n + 1, background, clusters)
}

/// Draws a partition of `n` indices with law p(C | N = n).
///
/// The Dirichlet-process and Pitman–Yor urns are projective, so iterating
/// [`urn_step`] from {{0}} is exact. The NSP urns are not: their one-step
/// weights are exact only for the final index. Those draw the latent count
/// L (and background count) from their posterior given `n` first, then run
/// the finite Pólya urn with join ∝ |C_k| + α and new ∝ α (L − |C|).
pub fn sample_partition<R: Rng + ?Sized>(n: usize, config: &UrnConfig, rng: &mut R) -> Result<Partition> {
    PartitionSampler::new(n, config)?.sample(rng)
}

/// Precomputed sampler for repeated draws of p(C | N = n).
#[derive(Clone, Debug)]
pub struct PartitionSampler {
    n: usize,
    kind: SamplerKind,
}

#[derive(Clone, Debug)]
enum SamplerKind {
    Projective(UrnConfig),
    Nsp {
        alpha: f64,
        latent: LatentCountSampler,
    },
    Background {
        alpha: f64,
        /// CDF over the background count c0 = 0..=n.
        c0_cdf: Vec<f64>,
        /// Latent-count posterior for n − c0 cluster points, indexed by c0.
        latent: Vec<Option<LatentCountSampler>>,
    },
}

impl PartitionSampler {
    pub fn new(n: usize, config: &UrnConfig) -> Result<Self> {
        config.validate()?;
        let kind = match *config {
            UrnConfig::DpmmLimit { .. } | UrnConfig::PitmanYor { .. } => {
                if n == 0 {
                    return Err(NspError::Domain("urn needs at least one point".into()));
                }
                SamplerKind::Projective(*config)
            }
            UrnConfig::Nsp { alpha, beta, log_lbar } => {
                if n == 0 {
                    return Err(NspError::Domain("urn needs at least one point".into()));
                }
                SamplerKind::Nsp {
                    alpha,
                    latent: LatentCountSampler::new(alpha, beta, log_lbar, n as u64)?,
                }
            }
            UrnConfig::BackgroundNsp { alpha, beta, log_lbar, w0 } => {
                let lbar = log_lbar.exp();
                if !lbar.is_finite() {
                    return Err(NspError::Domain("background urn needs a finite latent rate".into()));
                }
                let mut logs = Vec::with_capacity(n + 1);
                let mut latent = Vec::with_capacity(n + 1);
                for c0 in 0..=n {
                    let m = (n - c0) as u64;
                    let bg = crate::math::log_poisson(c0 as u64, w0);
                    match LatentCountSampler::new(alpha, beta, log_lbar, m) {
                        Ok(s) => {
                            logs.push(bg + s.log_mass() - lbar);
                            latent.push(Some(s));
                        }
                        Err(_) => {
                            logs.push(f64::NEG_INFINITY);
                            latent.push(None);
                        }
                    }
                }
                SamplerKind::Background {
                    alpha,
                    c0_cdf: cdf_from_logs(&logs).ok_or_else(|| NspError::Domain("no configuration has positive mass".into()))?,
                    latent,
                }
            }
        };
        Ok(Self { n, kind })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Partition> {
        let n = self.n;
        match &self.kind {
            SamplerKind::Projective(config) => sample_sequential_urn(n, config, rng),
            SamplerKind::Nsp { alpha, latent } => {
                let l = latent.sample(rng);
                Ok(Partition::from_labels(&finite_urn(n, 0, l, *alpha, rng)))
            }
            SamplerKind::Background { alpha, c0_cdf, latent } => {
                let c0 = search_cdf(c0_cdf, rng);
                let l = latent[c0].as_ref().map_or(0, |s| s.sample(rng));
                Ok(Partition::from_labels(&finite_urn(n, c0, l, *alpha, rng)))
            }
        }
    }
}

/// Iterates the one-step transition [`urn_step`] from {{0}} (from the
/// empty partition for the background urn).
///
/// For the Dirichlet-process and Pitman–Yor urns this is exactly
/// p(C | N = n). For the NSP urns it is the plain sequential construction,
/// which is not exchangeable beyond two points; use [`sample_partition`]
/// for the exact law.
pub fn sample_sequential_urn<R: Rng + ?Sized>(n: usize, config: &UrnConfig, rng: &mut R) -> Result<Partition> {
    config.validate()?;
    let mut labels = Vec::with_capacity(n);
    let mut sizes: Vec<usize> = Vec::new();
    let mut lw = Vec::new();
    if !config.has_background() {
        if n == 0 {
            return Err(NspError::Domain("urn needs at least one point".into()));
        }
        labels.push(1);
        sizes.push(1);
    }
    while labels.len() < n {
        log_weights_from_sizes(&sizes, config, &mut lw)?;
        let k = sizes.len();
        match sample_log_categorical(&lw, rng).ok_or_else(|| NspError::Domain("all urn weights are zero".into()))? {
            c if c < k => {
                sizes[c] += 1;
                labels.push(c + 1);
            }
            c if c == k => {
                sizes.push(1);
                labels.push(k + 1);
            }
            _ => labels.push(0),
        }
    }
    Ok(Partition::from_labels(&labels))
}

/// Labels for `n` indices of which exactly `c0` (a uniformly random subset)
/// are background and the rest follow the Dirichlet-multinomial urn with
/// `l` components of concentration `alpha` each.
fn finite_urn<R: Rng + ?Sized>(n: usize, c0: usize, l: u64, alpha: f64, rng: &mut R) -> Vec<usize> {
    let mut labels = Vec::with_capacity(n);
    let mut sizes: Vec<usize> = Vec::new();
    let mut bg_left = c0;
    let mut weights = Vec::new();
    for m in 0..n {
        if bg_left > 0 && rng.random::<f64>() * ((n - m) as f64) < bg_left as f64 {
            bg_left -= 1;
            labels.push(0);
            continue;
        }
        weights.clear();
        weights.extend(sizes.iter().map(|&s| s as f64 + alpha));
        weights.push(alpha * (l as f64 - sizes.len() as f64));
        let c = sample_categorical(&weights, rng).expect("finite urn has positive mass");
        if c < sizes.len() {
            sizes[c] += 1;
            labels.push(c + 1);
        } else {
            sizes.push(1);
            labels.push(sizes.len());
        }
    }
    labels
}

fn cdf_from_logs(logs: &[f64]) -> Option<Vec<f64>> {
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let mut acc = 0.0;
    let mut cdf: Vec<f64> = logs
        .iter()
        .map(|l| {
            acc += (l - max).exp();
            acc
        })
        .collect();
    cdf.iter_mut().for_each(|c| *c /= acc);
    Some(cdf)
}

fn search_cdf<R: Rng + ?Sized>(cdf: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

/// Posterior p(L | N = n) ∝ Po(L | L̄) NB(n | Lα, 1/(1+β)), tabulated on
/// the window holding all but about e^-50 of its mass.
///
/// The log-density is concave in L, so the window is found by locating the
/// mode and walking outwards; this stays cheap when L̄ is huge.
#[derive(Clone, Debug)]
pub struct LatentCountSampler {
    first: u64,
    cdf: Vec<f64>,
    log_mass: f64,
}

impl LatentCountSampler {
    pub fn new(alpha: f64, beta: f64, log_lbar: f64, n: u64) -> Result<Self> {
        let lp = |l: u64| -> f64 {
            let prior = if l == 0 {
                0.0
            } else {
                l as f64 * log_lbar - crate::math::ln_factorial(l)
            };
            prior + crate::math::log_neg_binomial(n, l as f64 * alpha, beta)
        };
        let start = if n > 0 { 1 } else { 0 };
        if !lp(start).is_finite() {
            return Err(NspError::Domain(format!("{n} points cannot arise with no latent events")));
        }
        // Bracket then bisect for the first L where the log-density stops rising.
        let mut hi = start.max(1);
        while lp(hi + 1) > lp(hi) {
            hi *= 2;
        }
        let mut lo = start;
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if lp(mid + 1) > lp(mid) {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        let mode = lo;
        let top = lp(mode);
        let cut = top - 50.0;
        let mut first = mode;
        while first > start && lp(first - 1) > cut {
            first -= 1;
        }
        let mut logs = Vec::new();
        let mut l = first;
        loop {
            let v = lp(l);
            if l > mode && v < cut {
                break;
            }
            logs.push(v);
            l += 1;
        }
        let log_mass = crate::math::log_sum_exp(&logs);
        let cdf = cdf_from_logs(&logs).expect("mode is finite");
        Ok(Self { first, cdf, log_mass })
    }

    /// log Σ_L L̄^L/L! NB(n | Lα, ·) over the window; p(N = n) is this
    /// times e^{-L̄}.
    pub fn log_mass(&self) -> f64 {
        self.log_mass
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        self.first + search_cdf(&self.cdf, rng) as u64
    }
}

/// N for an NSP: L ~ Po(L̄), then N ~ NB(Lα, 1/(1+β)).
pub fn sample_nsp_size<R: Rng + ?Sized>(prior: &GammaWeightPrior, domain: &Domain, rng: &mut R) -> u64 {
    let l = sample_poisson(prior.lbar(domain), rng);
    sample_neg_binomial(l as f64 * prior.alpha(), prior.beta(), rng)
}

/// Number of latent events that emit nothing, Po(L̄ (β/(1+β))^α).
pub fn sample_empty_cluster_count<R: Rng + ?Sized>(prior: &GammaWeightPrior, domain: &Domain, rng: &mut R) -> u64 {
    sample_poisson(prior.lbar(domain) * prior.log_empty_prob().exp(), rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::log_sum_exp;
    use crate::partition::{
        enumerate_partitions, enumerate_partitions_with_background, log_eppf, log_eppf_with_background, VCoefficientTable,
    };
    use crate::rng::RngStream;
    use std::collections::HashMap;

    fn probs(lw: &[f64]) -> Vec<f64> {
        let z = log_sum_exp(lw);
        lw.iter().map(|l| (l - z).exp()).collect()
    }

    #[test]
    fn nsp_step_from_singleton() {
        let c = UrnConfig::Nsp {
            alpha: 1.0,
            beta: 1.0,
            log_lbar: 0.0,
        };
        let p = probs(&urn_log_weights(&Partition::singleton(), &c).unwrap());
        assert!((p[0] - 0.8).abs() < 1e-15 && (p[1] - 0.2).abs() < 1e-15);
        let d = probs(&urn_log_weights(&Partition::singleton(), &UrnConfig::dpmm(1.0)).unwrap());
        assert!((d[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn small_alpha_approaches_crp() {
        let nsp = UrnConfig::nsp_with_new_weight(1e-6, 1.0, 1.0);
        let crp = UrnConfig::dpmm(1.0);
        let mut rng = RngStream::new(5, 0);
        let mut part = Partition::singleton();
        for _ in 0..50 {
            let a = probs(&urn_log_weights(&part, &nsp).unwrap());
            let b = probs(&urn_log_weights(&part, &crp).unwrap());
            let max = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(max < 1e-4);
            part = urn_step(&part, &crp, &mut rng).unwrap();
        }
    }

    #[test]
    fn pitman_yor_validation() {
        assert!(UrnConfig::pitman_yor(1.0, 0.5).is_ok());
        assert!(UrnConfig::pitman_yor(3.0, -1.0).is_ok());
        assert!(UrnConfig::pitman_yor(2.5, -1.0).is_err());
        assert!(UrnConfig::pitman_yor(1.0, 1.0).is_err());
        // finite urn: never more than L = 3 clusters
        let c = UrnConfig::pitman_yor(3.0, -1.0).unwrap();
        let mut rng = RngStream::new(1, 0);
        for _ in 0..200 {
            assert!(sample_partition(20, &c, &mut rng).unwrap().n_clusters() <= 3);
        }
    }

    #[test]
    fn pitman_yor_negative_weight_is_domain_error() {
        let c = UrnConfig::PitmanYor { gamma: 1.0, delta: -1.0 };
        let p = Partition::from_labels(&[1, 2]);
        assert!(matches!(
            log_weights_from_sizes(&p.sizes(), &c, &mut vec![]),
            Err(NspError::Domain(_))
        ));
    }

    fn empirical(n: usize, c: &UrnConfig, draws: usize, seed: u64) -> HashMap<Partition, usize> {
        let mut rng = RngStream::new(seed, 0);
        let mut counts = HashMap::new();
        for _ in 0..draws {
            *counts.entry(sample_partition(n, c, &mut rng).unwrap()).or_insert(0) += 1;
        }
        counts
    }

    #[test]
    fn urn_law_matches_eppf() {
        let t = VCoefficientTable::from_parts(1.0, 1.0, 1.0);
        let c = UrnConfig::Nsp {
            alpha: 1.0,
            beta: 1.0,
            log_lbar: 0.0,
        };
        let draws = 200_000;
        let counts = empirical(4, &c, draws, 9);
        let parts = enumerate_partitions(4).unwrap();
        let norm = t.log_p_n(4);
        let mut tv = 0.0;
        for p in &parts {
            let want = (log_eppf(p, &t).unwrap() - norm).exp();
            let got = *counts.get(p).unwrap_or(&0) as f64 / draws as f64;
            tv += 0.5 * (want - got).abs();
        }
        assert!(tv < 0.01, "tv = {tv}");
    }

    #[test]
    fn background_urn_matches_eppf() {
        let prior = GammaWeightPrior::new(1.5, 0.5, 2.0).unwrap();
        let dom = Domain::unit(1).unwrap();
        let t = VCoefficientTable::new(&prior, &dom);
        let w0 = 1.2;
        let c = UrnConfig::background_nsp(&prior, &dom, w0);
        for n in 1..=4 {
            let parts = enumerate_partitions_with_background(n).unwrap();
            let lj: Vec<f64> = parts.iter().map(|p| log_eppf_with_background(p, &t, w0)).collect();
            let z = log_sum_exp(&lj);
            let draws = 100_000;
            let counts = empirical(n, &c, draws, 10 + n as u64);
            let tv: f64 = parts
                .iter()
                .zip(&lj)
                .map(|(p, l)| 0.5 * ((l - z).exp() - *counts.get(p).unwrap_or(&0) as f64 / draws as f64).abs())
                .sum();
            assert!(tv < 0.015, "n = {n}: tv = {tv}");
        }
    }

    #[test]
    fn sequential_urn_larger_alpha_fewer_clusters() {
        // new weight fixed at 1; joining gets easier as α grows
        let mut prev = f64::INFINITY;
        for &a in &[1e-3, 1.0, 10.0, 100.0] {
            let c = UrnConfig::nsp_with_new_weight(a, 1.0, 1.0);
            let mut rng = RngStream::new(3, 0);
            let mean = (0..4000)
                .map(|_| sample_sequential_urn(30, &c, &mut rng).unwrap().n_clusters() as f64)
                .sum::<f64>()
                / 4000.0;
            assert!(mean < prev, "alpha {a}: {mean} !< {prev}");
            prev = mean;
        }
    }

    #[test]
    fn huge_alpha_does_not_overflow() {
        let c = UrnConfig::nsp_with_new_weight(1e4, 2.0, 10.0);
        let lw = urn_log_weights(&Partition::singleton(), &c).unwrap();
        assert!(lw.iter().all(|w| w.is_finite()));
        assert!((lw[1] - 10f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn size_and_empty_counts() {
        let mut rng = RngStream::new(4, 0);
        let dom = Domain::unit(1).unwrap();
        let zero = GammaWeightPrior::new(1.0, 1.0, 0.0).unwrap();
        assert!((0..100).all(|_| sample_nsp_size(&zero, &dom, &mut rng) == 0));
        let p = GammaWeightPrior::new(1.0, 1.0, 4.0).unwrap();
        let n = 100_000;
        let mean = (0..n).map(|_| sample_empty_cluster_count(&p, &dom, &mut rng) as f64).sum::<f64>() / n as f64;
        assert!((mean - 2.0).abs() < 3.0 * (2.0 / n as f64).sqrt());
        let p = GammaWeightPrior::new(2.0, 1.0, 3.0).unwrap();
        let mean = (0..n).map(|_| sample_nsp_size(&p, &dom, &mut rng) as f64).sum::<f64>() / n as f64;
        // E[N] = L̄α/β = 6; Var = L̄α/β + L̄α(1+α)/β² = 6 + 18
        assert!((mean - 6.0).abs() < 3.5 * (24.0 / n as f64).sqrt());
    }

    #[test]
    fn latent_sampler_matches_posterior_table() {
        let t = VCoefficientTable::from_parts(1.0, 1.0, 1.0);
        let want = t.latent_count_posterior(5, 60);
        let s = LatentCountSampler::new(1.0, 1.0, 0.0, 5).unwrap();
        assert!((s.log_mass() - 1.0 - t.log_p_n(5)).abs() < 1e-12);
        let mut rng = RngStream::new(21, 0);
        let draws = 200_000;
        let mut counts = vec![0usize; 61];
        for _ in 0..draws {
            counts[s.sample(&mut rng).min(60) as usize] += 1;
        }
        for (l, &p) in want.probs.iter().enumerate() {
            let se = (p * (1.0 - p) / draws as f64).sqrt();
            assert!((counts[l] as f64 / draws as f64 - p).abs() <= 4.0 * se + 1e-12, "L = {l}");
        }
    }

    #[test]
    fn latent_sampler_handles_extreme_rates() {
        // L̄ = e^4000 with tiny emission probability, and L̄ = 10^6
        for &(a, b, log_lbar) in &[(1e4, 2.0, 4055.0), (1e-6, 1.0, 6.0 * 10f64.ln())] {
            for n in [0u64, 1, 50] {
                let s = LatentCountSampler::new(a, b, log_lbar, n).unwrap();
                assert!(s.log_mass().is_finite());
            }
        }
        assert!(LatentCountSampler::new(1.0, 1.0, f64::NEG_INFINITY, 2).is_err());
    }

    #[test]
    fn one_step_nsp_urn_is_not_exchangeable() {
        // Iterating the constant-weight transition from {{0}} favours early
        // joins: P(112) > P(121) at n = 3, although p(C | N) is symmetric.
        let c = UrnConfig::Nsp {
            alpha: 1.0,
            beta: 1.0,
            log_lbar: 0.0,
        };
        let step = |p: &Partition, k: usize| probs(&urn_log_weights(p, &c).unwrap())[k];
        let s = Partition::singleton();
        let joined = Partition::from_labels(&[1, 1]);
        let split = Partition::from_labels(&[1, 2]);
        let p112 = step(&s, 0) * step(&joined, 1);
        let p121 = step(&s, 1) * step(&split, 0);
        assert!((p112 - 0.8 * 0.5 / 3.5).abs() < 1e-12 && (p121 - 0.2 * 2.0 / 4.5).abs() < 1e-12);
        assert!(p112 > p121 + 0.02);
    }

    #[test]
    fn sampled_sizes_for_huge_alpha() {
        let c = UrnConfig::nsp_with_new_weight(1e4, 2.0, 1.0);
        let mut rng = RngStream::new(2, 0);
        // near-uniform Dirichlet(1e4) weights: clusters come out balanced
        for _ in 0..20 {
            let p = sample_partition(100, &c, &mut rng).unwrap();
            assert_eq!(p.n_total(), 100);
            let s = p.sorted_sizes();
            assert!(s[0] - s[s.len() - 1] <= 30, "{s:?}");
        }
    }
}
