//! Document streams: a latent event has a time `m`, an author distribution
//! θ^(a) and per-word Poisson rates θ^(c). A document is a time, an author
//! and a sparse bag of word counts.
//!
//! Word factors use the gamma–Poisson identity over the whole vocabulary,
//! so predictive terms only touch the document's nonzero words.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ClusterModel, ClusterView};
use crate::domain::{Domain, Mark, MarkedPoint, WordCounts};
use crate::error::{NspError, Result};
use crate::math::{
    ln_factorial, ln_gamma, log_normal_pdf, normal_cdf, sample_categorical, sample_dirichlet, sample_gamma, sample_normal, sample_poisson,
    LN_2PI, PROB_FLOOR,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DocumentConfig {
    pub n_authors: usize,
    pub vocab_size: usize,
    /// σ, the spread of document times around the event time.
    pub time_width: f64,
    #[serde(default = "unit")]
    pub author_conc: f64,
    pub word_shape: f64,
    pub word_rate: f64,
    /// Gamma prior on the background rates `φ[a][v]`.
    #[serde(default = "unit")]
    pub background_word_shape: f64,
    #[serde(default = "unit")]
    pub background_word_rate: f64,
    #[serde(default = "unit")]
    pub background_author_conc: f64,
    /// Initial φ; the prior mean when absent.
    #[serde(default)]
    pub background_word_rates: Option<Vec<Vec<f64>>>,
    /// Initial θ0; uniform when absent.
    #[serde(default)]
    pub background_author_probs: Option<Vec<f64>>,
}

fn unit() -> f64 {
    1.0
}

impl DocumentConfig {
    pub fn new(n_authors: usize, vocab_size: usize, time_width: f64, word_shape: f64, word_rate: f64) -> Self {
        Self {
            n_authors,
            vocab_size,
            time_width,
            author_conc: 1.0,
            word_shape,
            word_rate,
            background_word_shape: 1.0,
            background_word_rate: 1.0,
            background_author_conc: 1.0,
            background_word_rates: None,
            background_author_probs: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DocumentParam {
    pub author_probs: Vec<f64>,
    /// Dense per-word rates.
    pub word_rates: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DocumentGlobals {
    /// `φ[a][v]`.
    pub phi: Vec<Vec<f64>>,
    pub theta0: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct DocumentModel {
    domain: Domain,
    n_authors: usize,
    vocab: usize,
    var: f64,
    alpha_a: f64,
    alpha_c: f64,
    beta_c: f64,
    bg_shape: f64,
    bg_rate: f64,
    bg_conc: f64,
    globals: DocumentGlobals,
    phi_sums: Vec<f64>,
    log_t: f64,
    origin: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DocumentStats {
    n: usize,
    // times are shifted by the domain centre
    time_sum: f64,
    time_sumsq: f64,
    authors: Vec<u32>,
    words: BTreeMap<u32, u64>,
    word_total: u64,
    log_fact: f64,
}

fn doc(p: &MarkedPoint) -> (usize, &WordCounts) {
    p.document().expect("document model points carry a document mark")
}

fn log_fact_of(words: &WordCounts) -> f64 {
    words.iter().map(|(_, c)| ln_factorial(c as u64)).sum()
}

impl DocumentModel {
    pub fn new(config: &DocumentConfig, domain: &Domain) -> Result<Self> {
        let bad = |m: String| NspError::InvalidConfig(m);
        if domain.dim() != 1 {
            return Err(bad("document model needs a 1-D time domain".into()));
        }
        let (a_n, v_n) = (config.n_authors, config.vocab_size);
        if a_n == 0 || v_n == 0 {
            return Err(bad("n_authors and vocab_size must be positive".into()));
        }
        let positives = [
            ("time_width", config.time_width),
            ("author_conc", config.author_conc),
            ("word_shape", config.word_shape),
            ("word_rate", config.word_rate),
            ("background_word_shape", config.background_word_shape),
            ("background_word_rate", config.background_word_rate),
            ("background_author_conc", config.background_author_conc),
        ];
        for (name, v) in positives {
            if !(v.is_finite() && v > 0.0) {
                return Err(bad(format!("{name} must be positive")));
            }
        }
        let phi = match &config.background_word_rates {
            Some(rows) => {
                if rows.len() != a_n || rows.iter().any(|r| r.len() != v_n) {
                    return Err(bad(format!("background_word_rates must be {a_n}x{v_n}")));
                }
                if rows.iter().flatten().any(|r| !(r.is_finite() && *r > 0.0)) {
                    return Err(bad("background_word_rates must be positive".into()));
                }
                rows.clone()
            }
            None => vec![vec![config.background_word_shape / config.background_word_rate; v_n]; a_n],
        };
        let theta0 = match &config.background_author_probs {
            Some(p) => {
                let total: f64 = p.iter().sum();
                if p.len() != a_n || p.iter().any(|x| !(*x >= 0.0)) || (total - 1.0).abs() > 1e-6 {
                    return Err(bad(format!("background_author_probs must be a distribution over {a_n} authors")));
                }
                p.iter().map(|x| x / total).collect()
            }
            None => vec![1.0 / a_n as f64; a_n],
        };
        let mut model = Self {
            domain: domain.clone(),
            n_authors: a_n,
            vocab: v_n,
            var: config.time_width * config.time_width,
            alpha_a: config.author_conc,
            alpha_c: config.word_shape,
            beta_c: config.word_rate,
            bg_shape: config.background_word_shape,
            bg_rate: config.background_word_rate,
            bg_conc: config.background_author_conc,
            globals: DocumentGlobals { phi, theta0 },
            phi_sums: vec![],
            log_t: domain.measure().ln(),
            origin: domain.center()[0],
        };
        model.rebuild();
        Ok(model)
    }

    fn rebuild(&mut self) {
        self.phi_sums = self.globals.phi.iter().map(|r| r.iter().sum()).collect();
    }

    pub fn n_authors(&self) -> usize {
        self.n_authors
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab
    }

    pub fn time_width(&self) -> f64 {
        self.var.sqrt()
    }

    fn update(&self, st: &mut DocumentStats, p: &MarkedPoint, add: bool) {
        let (a, words) = doc(p);
        let t = p.x[0] - self.origin;
        let lf = log_fact_of(words);
        if add {
            st.n += 1;
            st.time_sum += t;
            st.time_sumsq += t * t;
            st.authors[a] += 1;
            for (v, c) in words.iter() {
                *st.words.entry(v).or_insert(0) += c as u64;
            }
            st.word_total += words.total();
            st.log_fact += lf;
        } else {
            st.n -= 1;
            st.time_sum -= t;
            st.time_sumsq -= t * t;
            st.authors[a] -= 1;
            for (v, c) in words.iter() {
                let e = st.words.get_mut(&v).expect("word was added");
                *e -= c as u64;
                if *e == 0 {
                    st.words.remove(&v);
                }
            }
            st.word_total -= words.total();
            st.log_fact -= lf;
        }
    }

    fn time_predictive(&self, st: &DocumentStats, x: f64) -> f64 {
        if st.n == 0 {
            return -self.log_t;
        }
        let n = st.n as f64;
        log_normal_pdf(x - self.origin, st.time_sum / n, self.var * (1.0 + 1.0 / n))
    }

    fn word_predictive(&self, st: &DocumentStats, words: &WordCounts) -> f64 {
        let b = self.beta_c + st.n as f64;
        let lb1 = (b + 1.0).ln();
        let mut total = (self.vocab as f64 * self.alpha_c + st.word_total as f64) * (b.ln() - lb1);
        for (v, c) in words.iter() {
            let av = self.alpha_c + st.words.get(&v).copied().unwrap_or(0) as f64;
            let c = c as f64;
            total += ln_gamma(av + c) - ln_gamma(av) - ln_gamma(c + 1.0) - c * lb1;
        }
        total
    }
}

impl ClusterModel for DocumentModel {
    type Stats = DocumentStats;
    type Param = DocumentParam;
    type Globals = DocumentGlobals;

    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn check_point(&self, p: &MarkedPoint) -> Result<()> {
        if p.x.len() != 1 {
            return Err(NspError::Domain("document times are one-dimensional".into()));
        }
        let (a, words) = p
            .document()
            .ok_or_else(|| NspError::Domain("point is missing its document mark".into()))?;
        if a >= self.n_authors {
            return Err(NspError::Domain(format!("author {a} out of range (A = {})", self.n_authors)));
        }
        if let Some(v) = words.max_index() {
            if v as usize >= self.vocab {
                return Err(NspError::Domain(format!("word {v} out of range (V = {})", self.vocab)));
            }
        }
        Ok(())
    }

    fn empty_stats(&self) -> DocumentStats {
        DocumentStats {
            n: 0,
            time_sum: 0.0,
            time_sumsq: 0.0,
            authors: vec![0; self.n_authors],
            words: BTreeMap::new(),
            word_total: 0,
            log_fact: 0.0,
        }
    }

    fn stats_size(&self, s: &DocumentStats) -> usize {
        s.n
    }

    fn stats_add(&self, s: &mut DocumentStats, p: &MarkedPoint) {
        self.update(s, p, true);
    }

    fn stats_remove(&self, s: &mut DocumentStats, p: &MarkedPoint) {
        assert!(s.n > 0, "removing a document from empty statistics");
        if s.n == 1 {
            *s = self.empty_stats();
            return;
        }
        self.update(s, p, false);
    }

    fn log_marginal_new(&self, p: &MarkedPoint) -> f64 {
        self.log_predictive(&self.empty_stats(), p)
    }

    fn log_predictive(&self, st: &DocumentStats, p: &MarkedPoint) -> f64 {
        let (a, words) = doc(p);
        let author = (self.alpha_a + st.authors[a] as f64).ln() - (self.n_authors as f64 * self.alpha_a + st.n as f64).ln();
        self.time_predictive(st, p.x[0]) + author + self.word_predictive(st, words)
    }

    fn log_cluster_marginal(&self, st: &DocumentStats) -> f64 {
        if st.n == 0 {
            return 0.0;
        }
        let n = st.n as f64;
        let scatter = (st.time_sumsq - st.time_sum * st.time_sum / n).max(0.0);
        let time = -self.log_t - 0.5 * (n - 1.0) * (LN_2PI + self.var.ln()) - 0.5 * n.ln() - scatter / (2.0 * self.var);
        let aa = self.n_authors as f64 * self.alpha_a;
        let author = ln_gamma(aa) - ln_gamma(aa + n)
            + st.authors
                .iter()
                .filter(|c| **c > 0)
                .map(|c| ln_gamma(self.alpha_a + *c as f64) - ln_gamma(self.alpha_a))
                .sum::<f64>();
        let b = self.beta_c + n;
        let lb = b.ln();
        let words = self.vocab as f64 * self.alpha_c * (self.beta_c.ln() - lb)
            + st.words
                .values()
                .map(|s| {
                    let s = *s as f64;
                    ln_gamma(self.alpha_c + s) - ln_gamma(self.alpha_c) - s * lb
                })
                .sum::<f64>()
            - st.log_fact;
        time + author + words
    }

    fn sample_posterior_params<R: Rng + ?Sized>(&self, st: &DocumentStats, rng: &mut R) -> (Vec<f64>, DocumentParam) {
        if st.n == 0 {
            return self.sample_prior_params(rng);
        }
        let n = st.n as f64;
        let m = self.origin + sample_normal(st.time_sum / n, self.var / n, rng);
        let conc: Vec<f64> = st.authors.iter().map(|c| self.alpha_a + *c as f64).collect();
        let author_probs = sample_dirichlet(&conc, rng);
        let rate = self.beta_c + n;
        let word_rates = (0..self.vocab)
            .map(|v| {
                let s = st.words.get(&(v as u32)).copied().unwrap_or(0) as f64;
                sample_gamma(self.alpha_c + s, rate, rng).max(PROB_FLOOR)
            })
            .collect();
        (vec![m], DocumentParam { author_probs, word_rates })
    }

    fn sample_prior_params<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, DocumentParam) {
        let m = self.domain.sample_uniform(rng);
        let author_probs = sample_dirichlet(&vec![self.alpha_a; self.n_authors], rng);
        let word_rates = (0..self.vocab)
            .map(|_| sample_gamma(self.alpha_c, self.beta_c, rng).max(PROB_FLOOR))
            .collect();
        (m, DocumentParam { author_probs, word_rates })
    }

    fn sample_point<R: Rng + ?Sized>(&self, m: &[f64], theta: &DocumentParam, rng: &mut R) -> MarkedPoint {
        let x = sample_normal(m[0], self.var, rng);
        let author = sample_categorical(&theta.author_probs, rng).expect("valid author probabilities");
        let words = sample_words(&theta.word_rates, rng);
        MarkedPoint::unchecked(vec![x], Some(Mark::Document { author, words }))
    }

    fn log_emission(&self, m: &[f64], theta: &DocumentParam, p: &MarkedPoint) -> f64 {
        let (a, words) = doc(p);
        let rate_sum: f64 = theta.word_rates.iter().sum();
        log_normal_pdf(p.x[0], m[0], self.var) + theta.author_probs[a].ln() - rate_sum
            + words
                .iter()
                .map(|(v, c)| c as f64 * theta.word_rates[v as usize].ln() - ln_factorial(c as u64))
                .sum::<f64>()
    }

    fn emission_mass(&self, m: &[f64], theta: &DocumentParam, region: &Domain, group: Option<usize>) -> Result<f64> {
        let sd = self.var.sqrt();
        let time = (normal_cdf((region.upper()[0] - m[0]) / sd) - normal_cdf((region.lower()[0] - m[0]) / sd)).max(0.0);
        match group {
            None => Ok(time),
            Some(a) if a < self.n_authors => Ok(time * theta.author_probs[a]),
            Some(a) => Err(NspError::Domain(format!("author {a} out of range"))),
        }
    }

    fn mark_group(&self, p: &MarkedPoint) -> Option<usize> {
        p.document().map(|(a, _)| a)
    }

    fn background_log_mark_density(&self, p: &MarkedPoint) -> f64 {
        let (a, words) = doc(p);
        let phi = &self.globals.phi[a];
        self.globals.theta0[a].ln() - self.phi_sums[a]
            + words
                .iter()
                .map(|(v, c)| c as f64 * phi[v as usize].ln() - ln_factorial(c as u64))
                .sum::<f64>()
    }

    fn background_group_prob(&self, group: Option<usize>) -> f64 {
        group.map_or(1.0, |a| self.globals.theta0[a])
    }

    fn sample_background_mark<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<Mark> {
        let author = sample_categorical(&self.globals.theta0, rng).expect("valid background author probabilities");
        Some(Mark::Document {
            author,
            words: sample_words(&self.globals.phi[author], rng),
        })
    }

    fn globals(&self) -> DocumentGlobals {
        self.globals.clone()
    }

    fn set_globals(&mut self, g: DocumentGlobals) {
        self.globals = g;
        self.rebuild();
    }

    fn resample_globals<R: Rng + ?Sized>(
        &mut self,
        _clusters: &[ClusterView<'_, DocumentParam>],
        background: &[&MarkedPoint],
        rng: &mut R,
    ) {
        let mut docs = vec![0.0; self.n_authors];
        let mut counts = vec![vec![0u64; self.vocab]; self.n_authors];
        for p in background {
            let (a, words) = doc(p);
            docs[a] += 1.0;
            for (v, c) in words.iter() {
                counts[a][v as usize] += c as u64;
            }
        }
        let phi = counts
            .iter()
            .zip(&docs)
            .map(|(row, d)| {
                row.iter()
                    .map(|c| sample_gamma(self.bg_shape + *c as f64, self.bg_rate + d, rng).max(PROB_FLOOR))
                    .collect()
            })
            .collect();
        let conc: Vec<f64> = docs.iter().map(|d| self.bg_conc + d).collect();
        let theta0 = sample_dirichlet(&conc, rng);
        self.set_globals(DocumentGlobals { phi, theta0 });
    }
}

fn sample_words<R: Rng + ?Sized>(rates: &[f64], rng: &mut R) -> WordCounts {
    WordCounts::new(rates.iter().enumerate().filter_map(|(v, r)| {
        let c = sample_poisson(*r, rng);
        (c > 0).then_some((v as u32, c as u32))
    }))
}
