//! Spatial clusters with Gaussian impulse responses and a normal–inverse-
//! Wishart prior on (m, Σ).
//!
//! With `niw_kappa = 0` the location prior is flat, scaled by 1/|X|. This
//! stands in for the uniform prior on the window and ignores truncation at
//! its boundary. With `niw_kappa > 0` the prior is a proper NIW, centred
//! at `niw_mu`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ClusterModel, ClusterView};
use crate::domain::{Domain, MarkedPoint};
use crate::error::{NspError, Result};
use crate::math::{gauss_legendre, ln_gamma, ln_multi_gamma, normal_cdf, sample_gamma, standard_normal};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianConfig {
    pub iw_dof: f64,
    /// Row-major D×D scale matrix Ψ.
    pub iw_scale: Vec<Vec<f64>>,
    #[serde(default)]
    pub niw_kappa: f64,
    /// Prior mean; the domain centre when absent.
    #[serde(default)]
    pub niw_mu: Option<Vec<f64>>,
}

impl GaussianConfig {
    /// Isotropic prior Ψ = scale·I with the given degrees of freedom.
    pub fn isotropic(dim: usize, iw_dof: f64, scale: f64) -> Self {
        let iw_scale = (0..dim)
            .map(|i| (0..dim).map(|j| if i == j { scale } else { 0.0 }).collect())
            .collect();
        Self {
            iw_dof,
            iw_scale,
            niw_kappa: 0.0,
            niw_mu: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianParam {
    /// Row-major covariance.
    pub cov: Vec<f64>,
}

impl GaussianParam {
    pub fn matrix(&self) -> DMatrix<f64> {
        let d = (self.cov.len() as f64).sqrt() as usize;
        DMatrix::from_row_slice(d, d, &self.cov)
    }
}

#[derive(Clone, Debug)]
pub struct GaussianModel {
    domain: Domain,
    dim: usize,
    nu0: f64,
    psi0: DMatrix<f64>,
    log_det_psi0: f64,
    kappa0: f64,
    mu0: DVector<f64>,
    log_measure: f64,
    prior_post: Option<Posterior>,
}

#[derive(Clone, Debug, PartialEq)]
struct Posterior {
    kappa: f64,
    nu: f64,
    mu: DVector<f64>,
    psi_inv: DMatrix<f64>,
    log_det: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianStats {
    n: usize,
    sum: DVector<f64>,
    sumsq: DMatrix<f64>,
    post: Option<Posterior>,
}

fn chol_log_det(m: &DMatrix<f64>) -> Option<(f64, DMatrix<f64>)> {
    let c = m.clone().cholesky()?;
    let log_det = 2.0 * c.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    Some((log_det, c.inverse()))
}

impl GaussianModel {
    pub fn new(config: &GaussianConfig, domain: &Domain) -> Result<Self> {
        let dim = domain.dim();
        let bad = |m: String| NspError::InvalidConfig(m);
        if config.iw_scale.len() != dim || config.iw_scale.iter().any(|r| r.len() != dim) {
            return Err(bad(format!("iw_scale must be {dim}x{dim}")));
        }
        if !(config.iw_dof > dim as f64 - 1.0) {
            return Err(bad(format!("iw_dof must exceed {}", dim as f64 - 1.0)));
        }
        if !(config.niw_kappa >= 0.0 && config.niw_kappa.is_finite()) {
            return Err(bad("niw_kappa must be >= 0".into()));
        }
        let flat: Vec<f64> = config.iw_scale.iter().flatten().copied().collect();
        let psi0 = DMatrix::from_row_slice(dim, dim, &flat);
        if (&psi0 - psi0.transpose()).amax() > 1e-12 * psi0.amax() {
            return Err(bad("iw_scale must be symmetric".into()));
        }
        let (log_det_psi0, _) = chol_log_det(&psi0).ok_or_else(|| bad("iw_scale must be positive definite".into()))?;
        let mu0 = match &config.niw_mu {
            Some(mu) if mu.len() == dim => DVector::from_column_slice(mu),
            Some(_) => return Err(bad(format!("niw_mu must have {dim} entries"))),
            None => DVector::from_vec(domain.center()),
        };
        let mut model = Self {
            domain: domain.clone(),
            dim,
            nu0: config.iw_dof,
            psi0,
            log_det_psi0,
            kappa0: config.niw_kappa,
            mu0,
            log_measure: domain.measure().ln(),
            prior_post: None,
        };
        let empty = GaussianStats {
            n: 0,
            sum: DVector::zeros(dim),
            sumsq: DMatrix::zeros(dim, dim),
            post: None,
        };
        model.prior_post = model.posterior(&empty);
        Ok(model)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_flat(&self) -> bool {
        self.kappa0 == 0.0
    }

    fn posterior(&self, s: &GaussianStats) -> Option<Posterior> {
        let n = s.n as f64;
        let (kappa, nu, mu, psi) = if self.is_flat() {
            if s.n == 0 {
                return None;
            }
            let mean = &s.sum / n;
            let scatter = &s.sumsq - &mean * mean.transpose() * n;
            (n, self.nu0 + n - 1.0, mean, &self.psi0 + scatter)
        } else {
            let kappa = self.kappa0 + n;
            let mu = (&self.mu0 * self.kappa0 + &s.sum) / kappa;
            let mut psi = self.psi0.clone();
            if s.n > 0 {
                let mean = &s.sum / n;
                let scatter = &s.sumsq - &mean * mean.transpose() * n;
                let dm = &mean - &self.mu0;
                psi += scatter + &dm * dm.transpose() * (self.kappa0 * n / kappa);
            }
            (kappa, self.nu0 + n, mu, psi)
        };
        let psi = (&psi + psi.transpose()) * 0.5;
        let (log_det, psi_inv) = chol_log_det(&psi).expect("posterior scale is positive definite");
        Some(Posterior {
            kappa,
            nu,
            mu,
            psi_inv,
            log_det,
        })
    }

    fn t_log_density(&self, post: &Posterior, x: &[f64]) -> f64 {
        let d = self.dim as f64;
        let u = DVector::from_column_slice(x) - &post.mu;
        let c = post.kappa / (post.kappa + 1.0);
        let quad = (u.transpose() * &post.psi_inv * &u)[(0, 0)];
        -0.5 * d * std::f64::consts::PI.ln() + ln_gamma(0.5 * (post.nu + 1.0))
            - ln_gamma(0.5 * (post.nu + 1.0 - d))
            - 0.5 * post.log_det
            - 0.5 * (post.nu + 1.0) * (c * quad).ln_1p()
            + 0.5 * d * c.ln()
    }

    fn psi_of(&self, post: &Posterior) -> DMatrix<f64> {
        post.psi_inv.clone().try_inverse().expect("invertible")
    }

    fn sample_niw<R: Rng + ?Sized>(
        &self,
        nu: f64,
        psi: &DMatrix<f64>,
        mean: Option<(&DVector<f64>, f64)>,
        rng: &mut R,
    ) -> (Vec<f64>, GaussianParam) {
        let sigma = sample_inverse_wishart(nu, psi, rng);
        let m = match mean {
            Some((mu, kappa)) => sample_mvn(mu, &(&sigma / kappa), rng),
            None => DVector::from_vec(self.domain.sample_uniform(rng)),
        };
        let cov = sigma.transpose().iter().copied().collect();
        (m.iter().copied().collect(), GaussianParam { cov })
    }
}

/// Σ ~ IW(ν, Ψ) via the Bartlett decomposition of W ~ Wishart(ν, Ψ⁻¹).
pub fn sample_inverse_wishart<R: Rng + ?Sized>(nu: f64, psi: &DMatrix<f64>, rng: &mut R) -> DMatrix<f64> {
    let d = psi.nrows();
    let psi_inv = psi.clone().cholesky().expect("scale is positive definite").inverse();
    let l = psi_inv.cholesky().expect("positive definite").l();
    let mut a = DMatrix::zeros(d, d);
    for i in 0..d {
        a[(i, i)] = (2.0 * sample_gamma(0.5 * (nu - i as f64), 1.0, rng)).sqrt();
        for j in 0..i {
            a[(i, j)] = standard_normal(rng);
        }
    }
    let la = l * a;
    let w = &la * la.transpose();
    let sigma = w.cholesky().expect("Wishart draw is positive definite").inverse();
    (&sigma + sigma.transpose()) * 0.5
}

fn sample_mvn<R: Rng + ?Sized>(mu: &DVector<f64>, cov: &DMatrix<f64>, rng: &mut R) -> DVector<f64> {
    let l = cov.clone().cholesky().expect("covariance is positive definite").l();
    let z = DVector::from_fn(mu.len(), |_, _| standard_normal(rng));
    mu + l * z
}

fn mvn_log_density(x: &[f64], m: &[f64], cov: &DMatrix<f64>) -> f64 {
    let d = x.len();
    let (log_det, inv) = chol_log_det(cov).expect("covariance is positive definite");
    let u = DVector::from_iterator(d, x.iter().zip(m).map(|(a, b)| a - b));
    -0.5 * (d as f64 * crate::math::LN_2PI + log_det + (u.transpose() * inv * &u)[(0, 0)])
}

/// P(a ≤ X ≤ b) for X ~ N(m, Σ) on a 1-D or 2-D box.
pub fn gaussian_box_mass(m: &[f64], cov: &DMatrix<f64>, lower: &[f64], upper: &[f64]) -> Result<f64> {
    match m.len() {
        1 => {
            let s = cov[(0, 0)].sqrt();
            Ok((normal_cdf((upper[0] - m[0]) / s) - normal_cdf((lower[0] - m[0]) / s)).max(0.0))
        }
        2 => {
            let s1 = cov[(0, 0)].sqrt();
            let lo = lower[0].max(m[0] - 9.0 * s1);
            let hi = upper[0].min(m[0] + 9.0 * s1);
            if lo >= hi {
                return Ok(0.0);
            }
            let slope = cov[(0, 1)] / cov[(0, 0)];
            let cond_sd = (cov[(1, 1)] - cov[(0, 1)] * slope).max(0.0).sqrt();
            let (nodes, weights) = gauss_legendre(64);
            let half = 0.5 * (hi - lo);
            let mid = 0.5 * (hi + lo);
            let mut total = 0.0;
            for (t, w) in nodes.iter().zip(&weights) {
                let x1 = mid + half * t;
                let z = (x1 - m[0]) / s1;
                let dens = (-0.5 * z * z).exp() / (s1 * (2.0 * std::f64::consts::PI).sqrt());
                let mu2 = m[1] + slope * (x1 - m[0]);
                let p2 = if cond_sd > 0.0 {
                    normal_cdf((upper[1] - mu2) / cond_sd) - normal_cdf((lower[1] - mu2) / cond_sd)
                } else if (lower[1]..=upper[1]).contains(&mu2) {
                    1.0
                } else {
                    0.0
                };
                total += w * dens * p2;
            }
            Ok((total * half).clamp(0.0, 1.0))
        }
        d => Err(NspError::InvalidConfig(format!(
            "box mass is only available in 1 or 2 dimensions, not {d}"
        ))),
    }
}

impl ClusterModel for GaussianModel {
    type Stats = GaussianStats;
    type Param = GaussianParam;
    type Globals = ();

    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn check_point(&self, p: &MarkedPoint) -> Result<()> {
        if p.x.len() != self.dim {
            return Err(NspError::Domain(format!(
                "point has {} coordinates, model has {}",
                p.x.len(),
                self.dim
            )));
        }
        if p.mark.is_some() {
            return Err(NspError::Domain("gaussian model points carry no mark".into()));
        }
        Ok(())
    }

    fn empty_stats(&self) -> GaussianStats {
        GaussianStats {
            n: 0,
            sum: DVector::zeros(self.dim),
            sumsq: DMatrix::zeros(self.dim, self.dim),
            post: self.prior_post.clone(),
        }
    }

    fn stats_size(&self, s: &GaussianStats) -> usize {
        s.n
    }

    fn stats_add(&self, s: &mut GaussianStats, p: &MarkedPoint) {
        let x = DVector::from_column_slice(&p.x);
        s.sumsq += &x * x.transpose();
        s.sum += x;
        s.n += 1;
        s.post = self.posterior(s);
    }

    fn stats_remove(&self, s: &mut GaussianStats, p: &MarkedPoint) {
        assert!(s.n > 0, "removing a point from empty statistics");
        if s.n == 1 {
            *s = self.empty_stats();
            return;
        }
        let x = DVector::from_column_slice(&p.x);
        s.sumsq -= &x * x.transpose();
        s.sum -= x;
        s.n -= 1;
        s.post = self.posterior(s);
    }

    fn log_marginal_new(&self, p: &MarkedPoint) -> f64 {
        match &self.prior_post {
            None => -self.log_measure,
            Some(post) => self.t_log_density(post, &p.x),
        }
    }

    fn log_predictive(&self, s: &GaussianStats, p: &MarkedPoint) -> f64 {
        match &s.post {
            None => -self.log_measure,
            Some(post) => self.t_log_density(post, &p.x),
        }
    }

    fn log_cluster_marginal(&self, s: &GaussianStats) -> f64 {
        if s.n == 0 {
            return 0.0;
        }
        let post = s.post.as_ref().expect("non-empty stats have a posterior");
        let d = self.dim as f64;
        let n = s.n as f64;
        let shared = 0.5 * self.nu0 * self.log_det_psi0 - 0.5 * post.nu * post.log_det + ln_multi_gamma(self.dim, 0.5 * post.nu)
            - ln_multi_gamma(self.dim, 0.5 * self.nu0);
        if self.is_flat() {
            -self.log_measure - 0.5 * (n - 1.0) * d * std::f64::consts::PI.ln() - 0.5 * d * n.ln() + shared
        } else {
            -0.5 * n * d * std::f64::consts::PI.ln() + 0.5 * d * (self.kappa0 / post.kappa).ln() + shared
        }
    }

    fn sample_posterior_params<R: Rng + ?Sized>(&self, s: &GaussianStats, rng: &mut R) -> (Vec<f64>, GaussianParam) {
        match &s.post {
            None => self.sample_prior_params(rng),
            Some(post) => self.sample_niw(post.nu, &self.psi_of(post), Some((&post.mu, post.kappa)), rng),
        }
    }

    fn sample_prior_params<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, GaussianParam) {
        if self.is_flat() {
            self.sample_niw(self.nu0, &self.psi0, None, rng)
        } else {
            self.sample_niw(self.nu0, &self.psi0, Some((&self.mu0, self.kappa0)), rng)
        }
    }

    fn sample_point<R: Rng + ?Sized>(&self, m: &[f64], theta: &GaussianParam, rng: &mut R) -> MarkedPoint {
        let x = sample_mvn(&DVector::from_column_slice(m), &theta.matrix(), rng);
        MarkedPoint::unchecked(x.iter().copied().collect(), None)
    }

    fn log_emission(&self, m: &[f64], theta: &GaussianParam, p: &MarkedPoint) -> f64 {
        mvn_log_density(&p.x, m, &theta.matrix())
    }

    fn emission_mass(&self, m: &[f64], theta: &GaussianParam, region: &Domain, group: Option<usize>) -> Result<f64> {
        if group.is_some() {
            return Err(NspError::InvalidConfig("gaussian model has no mark groups".into()));
        }
        gaussian_box_mass(m, &theta.matrix(), region.lower(), region.upper())
    }

    fn globals(&self) {}

    fn set_globals(&mut self, _g: ()) {}

    fn resample_globals<R: Rng + ?Sized>(&mut self, _c: &[ClusterView<'_, GaussianParam>], _b: &[&MarkedPoint], _rng: &mut R) {}
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::contract;
    use crate::rng::RngStream;
    use statrs::distribution::{Continuous, StudentsT};

    fn pt(x: &[f64]) -> MarkedPoint {
        MarkedPoint::unchecked(x.to_vec(), None)
    }

    fn model_1d(kappa: f64) -> GaussianModel {
        let mut c = GaussianConfig::isotropic(1, 3.0, 0.5);
        c.niw_kappa = kappa;
        c.niw_mu = Some(vec![0.3]);
        GaussianModel::new(&c, &Domain::interval(2.0).unwrap()).unwrap()
    }

    fn model_2d(kappa: f64) -> GaussianModel {
        let c = GaussianConfig {
            iw_dof: 5.0,
            iw_scale: vec![vec![0.02, 0.005], vec![0.005, 0.01]],
            niw_kappa: kappa,
            niw_mu: None,
        };
        GaussianModel::new(&c, &Domain::unit(2).unwrap()).unwrap()
    }

    fn cloud(n: usize, seed: u64) -> Vec<MarkedPoint> {
        let mut rng = RngStream::new(seed, 0);
        (0..n)
            .map(|_| pt(&[0.5 + 0.1 * standard_normal(&mut rng), 0.4 + 0.1 * standard_normal(&mut rng)]))
            .collect()
    }

    #[test]
    fn flat_single_point_is_uniform_density() {
        let m = model_2d(0.0);
        assert_eq!(m.log_marginal_new(&pt(&[0.2, 0.9])), 0.0);
        let m1 = model_1d(0.0);
        assert!((m1.log_marginal_new(&pt(&[0.1])) + 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn one_dim_predictive_is_student_t() {
        // NIW in 1-D: predictive is t_{ν_n}(μ_n, Ψ_n (κ_n+1)/(κ_n ν_n)).
        let m = model_1d(0.7);
        let xs = [0.1, 0.45, 0.2];
        let s = m.stats_from(xs.iter().map(|x| pt(&[*x])).collect::<Vec<_>>().iter());
        let n = 3.0;
        let kn = 0.7 + n;
        let mean = xs.iter().sum::<f64>() / n;
        let mun = (0.7 * 0.3 + n * mean) / kn;
        let scatter: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
        let psin = 0.5 + scatter + 0.7 * n / kn * (mean - 0.3).powi(2);
        let nun = 3.0 + n;
        let t = StudentsT::new(mun, (psin * (kn + 1.0) / (kn * nun)).sqrt(), nun).unwrap();
        for x in [-0.5, 0.0, 0.3, 1.7] {
            assert!((m.log_predictive(&s, &pt(&[x])) - t.ln_pdf(x)).abs() < 1e-12);
        }
        // flat: second point given one
        let f = model_1d(0.0);
        let s = f.stats_from([pt(&[0.4])].iter());
        let t = StudentsT::new(0.4, (0.5 * 2.0 / 3.0f64).sqrt(), 3.0).unwrap();
        assert!((f.log_predictive(&s, &pt(&[0.9])) - t.ln_pdf(0.9)).abs() < 1e-12);
    }

    #[test]
    fn contract_checks() {
        for kappa in [0.0, 0.05] {
            let m = model_2d(kappa);
            let pts = cloud(6, 3);
            contract::add_remove_roundtrip(&m, &pts, 1e-10);
            contract::exchangeable(&m, &pts, 4);
        }
    }

    #[test]
    fn posterior_predictive_coherence() {
        let m = model_2d(0.0);
        contract::predictive_coherence(&m, &cloud(8, 5), &pt(&[0.55, 0.45]), 100_000);
        let m = model_2d(1.0);
        contract::predictive_coherence(&m, &cloud(3, 6), &pt(&[0.5, 0.5]), 100_000);
    }

    #[test]
    fn location_spread_shrinks_with_size() {
        let m = model_2d(0.5);
        let mut rng = RngStream::new(9, 0);
        let var_of = |n: usize, rng: &mut RngStream| {
            let s = m.stats_from(cloud(n, 10).iter());
            let xs: Vec<f64> = (0..20_000).map(|_| m.sample_posterior_params(&s, rng).0[0]).collect();
            let mu = xs.iter().sum::<f64>() / xs.len() as f64;
            xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / xs.len() as f64
        };
        let (v4, v40) = (var_of(4, &mut rng), var_of(40, &mut rng));
        assert!(v40 < v4 / 2.0, "{v4} {v40}");
    }

    #[test]
    fn inverse_wishart_mean() {
        let psi = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let nu = 7.0;
        let mut rng = RngStream::new(12, 0);
        let n = 50_000;
        let mut acc = DMatrix::zeros(2, 2);
        for _ in 0..n {
            acc += sample_inverse_wishart(nu, &psi, &mut rng);
        }
        let mean = acc / n as f64;
        let want = &psi / (nu - 3.0);
        assert!((mean - want).amax() < 0.02);
    }

    #[test]
    fn box_mass_matches_monte_carlo() {
        let cov = DMatrix::from_row_slice(2, 2, &[0.04, 0.015, 0.015, 0.02]);
        let m = [0.5, 0.5];
        let (lo, hi) = ([0.45, 0.3], [0.8, 0.55]);
        let got = gaussian_box_mass(&m, &cov, &lo, &hi).unwrap();
        let mut rng = RngStream::new(13, 0);
        let n = 400_000;
        let mu = DVector::from_column_slice(&m);
        let hits = (0..n)
            .filter(|_| {
                let x = sample_mvn(&mu, &cov, &mut rng);
                (0..2).all(|i| x[i] >= lo[i] && x[i] <= hi[i])
            })
            .count();
        let p = hits as f64 / n as f64;
        assert!((got - p).abs() < 4.0 * (p * (1.0 - p) / n as f64).sqrt());
        let full = gaussian_box_mass(&m, &cov, &[-10.0, -10.0], &[10.0, 10.0]).unwrap();
        assert!((full - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_configs_and_points() {
        let dom = Domain::unit(2).unwrap();
        let mut c = GaussianConfig::isotropic(2, 0.5, 1.0);
        assert!(GaussianModel::new(&c, &dom).is_err());
        c.iw_dof = 4.0;
        c.iw_scale[0][1] = 5.0;
        assert!(GaussianModel::new(&c, &dom).is_err());
        let m = model_2d(0.0);
        assert!(m.check_point(&pt(&[0.1])).is_err());
        assert!(m
            .check_point(&MarkedPoint::unchecked(
                vec![0.1, 0.2],
                Some(crate::domain::Mark::Neuron { neuron: 0 })
            ))
            .is_err());
    }
}
