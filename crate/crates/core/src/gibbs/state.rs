use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::record::{ChainSample, TraceRow};
use super::{ChainConfig, SamplerMode};
use crate::domain::{GammaWeightPrior, LatentEvent, MarkedPoint};
use crate::error::{NspError, Result};
use crate::eval::SpeckledMask;
use crate::math::{ln_gamma, sample_gamma, sample_log_categorical, sample_poisson, standard_normal};
use crate::models::{resample_background_rate, BackgroundModel, ClusterModel, ClusterView};
use crate::parallel::ShardPlan;
use crate::partition::{Partition, PartitionPrior};
use crate::rng::{streams, RngStream};

#[derive(Clone, Copy, Debug)]
enum Choice {
    Background,
    Join(usize),
    New,
}

/// Points swept together, with their own cluster slab and random stream.
/// Slots freed during a sweep are only recycled after it.
#[derive(Clone, Debug)]
struct Shard<S> {
    idx: Vec<usize>,
    labels: Vec<Option<usize>>,
    slots: Vec<Option<S>>,
    free: Vec<usize>,
    retired: Vec<usize>,
    rng: RngStream,
    log_lbar_shift: f64,
    choices: Vec<Choice>,
    logw: Vec<f64>,
}

impl<S> Shard<S> {
    fn new(idx: Vec<usize>, rng: RngStream, log_lbar_shift: f64) -> Self {
        let n = idx.len();
        Self {
            idx,
            labels: vec![None; n],
            slots: Vec::new(),
            free: Vec::new(),
            retired: Vec::new(),
            rng,
            log_lbar_shift,
            choices: Vec::new(),
            logw: Vec::new(),
        }
    }

    fn alloc(&mut self, s: S) -> usize {
        match self.free.pop() {
            Some(k) => {
                self.slots[k] = Some(s);
                k
            }
            None => {
                self.slots.push(Some(s));
                self.slots.len() - 1
            }
        }
    }
}

struct SweepContext {
    prior: PartitionPrior,
    /// log λ̄0 + log(1 + β), or `None` without background.
    log_background: Option<f64>,
    random_scan: bool,
}

fn sweep_shard<M: ClusterModel>(model: &M, points: &[MarkedPoint], sh: &mut Shard<M::Stats>, ctx: &SweepContext) -> Result<()> {
    let n = sh.idx.len();
    let mut order: Vec<usize> = (0..n).collect();
    if ctx.random_scan {
        order.shuffle(&mut sh.rng);
    }
    let prior = match ctx.prior {
        PartitionPrior::Nsp { alpha, beta, log_lbar } => PartitionPrior::Nsp {
            alpha,
            beta,
            log_lbar: log_lbar + sh.log_lbar_shift,
        },
        p => p,
    };
    let log_new = prior.log_new();
    for i in order {
        let p = &points[sh.idx[i]];
        if let Some(k) = sh.labels[i].take() {
            let st = sh.slots[k].as_mut().expect("labelled slot is occupied");
            model.stats_remove(st, p);
            if model.stats_size(st) == 0 {
                sh.slots[k] = None;
                sh.retired.push(k);
            }
        }
        sh.choices.clear();
        sh.logw.clear();
        // The background has no intensity outside the window, which only
        // matters for points placed there by replace_data.
        if let Some(lb) = ctx.log_background.filter(|_| model.domain().contains(&p.x)) {
            sh.choices.push(Choice::Background);
            sh.logw.push(lb + model.background_log_mark_density(p));
        }
        for (k, slot) in sh.slots.iter().enumerate() {
            if let Some(st) = slot {
                sh.choices.push(Choice::Join(k));
                sh.logw.push(prior.log_existing(model.stats_size(st)) + model.log_predictive(st, p));
            }
        }
        sh.choices.push(Choice::New);
        sh.logw.push(log_new + model.log_marginal_new(p));
        if sh.logw.iter().any(|w| w.is_nan()) {
            return Err(NspError::NonFinite { index: sh.idx[i] });
        }
        let pick = sample_log_categorical(&sh.logw, &mut sh.rng).ok_or(NspError::NonFinite { index: sh.idx[i] })?;
        match sh.choices[pick] {
            Choice::Background => {}
            Choice::Join(k) => {
                model.stats_add(sh.slots[k].as_mut().unwrap(), p);
                sh.labels[i] = Some(k);
            }
            Choice::New => {
                let mut st = model.empty_stats();
                model.stats_add(&mut st, p);
                sh.labels[i] = Some(sh.alloc(st));
            }
        }
    }
    let retired = std::mem::take(&mut sh.retired);
    sh.free.extend(retired);
    Ok(())
}

fn stats_of<'a, S>(shards: &'a [Shard<S>], locate: &[(usize, usize)], first_member: usize) -> &'a S {
    let (s, i) = locate[first_member];
    let k = shards[s].labels[i].expect("cluster member has a slot");
    shards[s].slots[k].as_ref().expect("occupied slot")
}

/// Full sampler state for one chain.
#[derive(Clone, Debug)]
pub struct ChainState<M: ClusterModel> {
    model: M,
    points: Vec<MarkedPoint>,
    measure: f64,
    prior: GammaWeightPrior,
    background: BackgroundModel,
    background_on: bool,
    mask: Option<SpeckledMask>,
    config: ChainConfig,
    temperature: f64,
    shards: Vec<Shard<M::Stats>>,
    // point -> (shard, local index)
    locate: Vec<(usize, usize)>,
    plan: Option<ShardPlan>,
    latents: Vec<LatentEvent<M::Param>>,
    empty_latents: Vec<LatentEvent<M::Param>>,
    base_rng: RngStream,
    rng: RngStream,
    sweeps: usize,
}

impl<M: ClusterModel> ChainState<M> {
    /// A chain with every point in the background. A background rate of 0
    /// switches the background off for the whole run.
    pub fn new(
        model: M,
        points: Vec<MarkedPoint>,
        prior: GammaWeightPrior,
        background: BackgroundModel,
        config: &ChainConfig,
        mask: Option<SpeckledMask>,
        rng: RngStream,
    ) -> Result<Self> {
        config.validate()?;
        background.validate()?;
        for (i, p) in points.iter().enumerate() {
            model.check_point(p).map_err(|e| NspError::Domain(format!("point {i}: {e}")))?;
            if !model.domain().contains(&p.x) {
                return Err(NspError::Domain(format!("point {i} lies outside the domain")));
            }
        }
        if let Some(m) = &mask {
            m.validate(model.domain())?;
            if let Some(i) = points.iter().position(|p| m.contains(&model, p)) {
                return Err(NspError::Domain(format!("point {i} lies inside the hold-out mask")));
            }
        }
        let n = points.len();
        let shard = Shard::new((0..n).collect(), rng.child(streams::SHARD_BASE), 0.0);
        Ok(Self {
            measure: model.domain().measure(),
            model,
            points,
            prior,
            background_on: background.rate > 0.0,
            background,
            mask,
            config: config.clone(),
            temperature: 1.0,
            shards: vec![shard],
            locate: (0..n).map(|i| (0, i)).collect(),
            plan: None,
            latents: Vec::new(),
            empty_latents: Vec::new(),
            rng: rng.child(streams::GLOBAL),
            base_rng: rng,
            sweeps: 0,
        })
    }

    /// Splits the points into shards swept in parallel. The current
    /// partition is kept; it must not have clusters crossing shards.
    pub fn with_plan(mut self, plan: ShardPlan, rescale_lbar: bool) -> Result<Self> {
        let part = self.partition();
        let groups = plan.assign(&self.points);
        self.shards = groups
            .into_iter()
            .enumerate()
            .map(|(s, idx)| {
                let shift = if rescale_lbar { plan.fraction(s).ln() } else { 0.0 };
                Shard::new(idx, self.base_rng.child(streams::SHARD_BASE + s as u64), shift)
            })
            .collect();
        self.reindex();
        self.plan = Some(plan);
        // Before the first sweep every point sits unassigned in the
        // background slot, even without a background process.
        self.assign(&part)?;
        Ok(self)
    }

    fn reindex(&mut self) {
        for (s, sh) in self.shards.iter().enumerate() {
            for (i, &g) in sh.idx.iter().enumerate() {
                self.locate[g] = (s, i);
            }
        }
    }

    /// Replaces the assignments. Latent events are cleared.
    pub fn set_partition(&mut self, part: &Partition) -> Result<()> {
        if !self.background_on && part.n_background() > 0 {
            return Err(NspError::Contract("background points without a background process".into()));
        }
        self.assign(part)
    }

    fn assign(&mut self, part: &Partition) -> Result<()> {
        if part.n_total() != self.points.len() {
            return Err(NspError::Contract(format!(
                "partition has {} points, data has {}",
                part.n_total(),
                self.points.len()
            )));
        }
        for sh in &mut self.shards {
            sh.labels.iter_mut().for_each(|l| *l = None);
            sh.slots.clear();
            sh.free.clear();
            sh.retired.clear();
        }
        for c in part.clusters() {
            let s = self.locate[c[0]].0;
            if c.iter().any(|&i| self.locate[i].0 != s) {
                return Err(NspError::Contract("cluster crosses a shard boundary".into()));
            }
            let st = self.model.stats_from(c.iter().map(|&i| &self.points[i]));
            let k = self.shards[s].alloc(st);
            for &i in c {
                let local = self.locate[i].1;
                self.shards[s].labels[local] = Some(k);
            }
        }
        self.latents.clear();
        self.empty_latents.clear();
        Ok(())
    }

    /// Swaps in a new dataset with a known partition, bypassing the domain
    /// check (emissions need not stay inside the window). Sequential
    /// chains only.
    pub fn replace_data(&mut self, points: Vec<MarkedPoint>, part: &Partition) -> Result<()> {
        if self.plan.is_some() {
            return Err(NspError::Contract("cannot replace the data of a sharded chain".into()));
        }
        for p in &points {
            self.model.check_point(p)?;
        }
        let n = points.len();
        self.points = points;
        self.shards[0].idx = (0..n).collect();
        self.shards[0].labels = vec![None; n];
        self.locate = (0..n).map(|i| (0, i)).collect();
        self.set_partition(part)
    }

    pub fn set_prior(&mut self, prior: GammaWeightPrior) {
        self.prior = prior;
    }

    /// Sets λ̄0. The background cannot be switched on or off this way.
    pub fn set_background_rate(&mut self, rate: f64) -> Result<()> {
        if (rate > 0.0) != self.background_on || !rate.is_finite() {
            return Err(NspError::InvalidConfig(format!(
                "background rate {rate} would toggle the background"
            )));
        }
        self.background.rate = rate;
        Ok(())
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    pub fn points(&self) -> &[MarkedPoint] {
        &self.points
    }

    pub fn prior(&self) -> &GammaWeightPrior {
        &self.prior
    }

    pub fn background(&self) -> &BackgroundModel {
        &self.background
    }

    pub fn config(&self) -> &ChainConfig {
        &self.config
    }

    pub fn plan(&self) -> Option<&ShardPlan> {
        self.plan.as_ref()
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn set_temperature(&mut self, t: f64) {
        assert!(t >= 1.0, "temperatures below 1 are not supported");
        self.temperature = t;
    }

    pub fn sweeps_done(&self) -> usize {
        self.sweeps
    }

    /// Latent events of the occupied clusters, in canonical cluster order.
    pub fn latents(&self) -> &[LatentEvent<M::Param>] {
        &self.latents
    }

    pub fn empty_latents(&self) -> &[LatentEvent<M::Param>] {
        &self.empty_latents
    }

    /// Measure left to the background after masking.
    pub fn exposure(&self) -> f64 {
        match &self.mask {
            Some(m) => m.exposure(&self.model),
            None => self.measure,
        }
    }

    /// (α, β) of the tempered weight prior; α is 0 in the DPMM limit.
    pub fn effective_weights(&self) -> (f64, f64) {
        match self.config.mode {
            SamplerMode::Nsp => (self.prior.alpha() / self.temperature, self.prior.beta() / self.temperature),
            SamplerMode::DpmmLimit => (0.0, self.prior.beta()),
        }
    }

    pub fn partition_prior(&self) -> PartitionPrior {
        match self.config.mode {
            SamplerMode::Nsp => {
                let (a, b) = self.effective_weights();
                PartitionPrior::nsp(a, b, self.prior.nu_bar() * self.measure)
            }
            SamplerMode::DpmmLimit => PartitionPrior::dpmm(self.config.dpmm_gamma, self.prior.beta()),
        }
    }

    pub fn partition(&self) -> Partition {
        let mut z = vec![0; self.points.len()];
        let mut offset = 0;
        for sh in &self.shards {
            for (i, l) in sh.labels.iter().enumerate() {
                if let Some(k) = l {
                    z[sh.idx[i]] = offset + k + 1;
                }
            }
            offset += sh.slots.len();
        }
        Partition::from_labels(&z)
    }

    pub fn n_clusters(&self) -> usize {
        self.shards.iter().map(|s| s.slots.iter().filter(|x| x.is_some()).count()).sum()
    }

    /// Step 1: resample every parent assignment with latent events
    /// integrated out.
    pub fn sweep_assignments(&mut self) -> Result<()> {
        let ctx = SweepContext {
            prior: self.partition_prior(),
            log_background: self
                .background_on
                .then(|| self.background.rate.ln() + self.partition_prior().log_background_boost()),
            random_scan: self.config.random_scan,
        };
        let (model, points) = (&self.model, &self.points);
        if self.plan.is_some() {
            self.shards.par_iter_mut().try_for_each(|sh| sweep_shard(model, points, sh, &ctx))
        } else {
            sweep_shard(model, points, &mut self.shards[0], &ctx)
        }
    }

    /// Step 2: λ̄0 | C0.
    pub fn resample_background_rate(&mut self) {
        if !self.background_on {
            return;
        }
        let n0 = self.shards.iter().map(|s| s.labels.iter().filter(|l| l.is_none()).count()).sum();
        self.background.rate = resample_background_rate(&self.background, n0, self.exposure(), &mut self.rng);
    }

    /// Step 3: (m_k, θ_k) and w_k ~ Ga(α + |C_k|, β + 1) for occupied clusters.
    pub fn resample_latent_events(&mut self) {
        let part = self.partition();
        let (a, b) = self.effective_weights();
        let mut latents = Vec::with_capacity(part.n_clusters());
        for c in part.clusters() {
            let (m, theta) = self
                .model
                .sample_posterior_params(stats_of(&self.shards, &self.locate, c[0]), &mut self.rng);
            let w = sample_gamma(a + c.len() as f64, b + 1.0, &mut self.rng);
            latents.push(LatentEvent { m, w: Some(w), theta });
        }
        self.latents = latents;
    }

    /// Step 4: empty events, ν̄, β (and optionally α), then model globals.
    /// ν̄, α and β only move at temperature 1.
    pub fn resample_hyperparameters(&mut self) -> Result<()> {
        if self.config.mode == SamplerMode::Nsp {
            let (a, b) = self.effective_weights();
            let lbar = self.prior.nu_bar() * self.measure;
            let e = sample_poisson(lbar * (a * (b / (1.0 + b)).ln()).exp(), &mut self.rng);
            self.empty_latents = (0..e)
                .map(|_| {
                    let (m, theta) = self.model.sample_prior_params(&mut self.rng);
                    LatentEvent {
                        m,
                        w: Some(sample_gamma(a, b + 1.0, &mut self.rng)),
                        theta,
                    }
                })
                .collect();
            if self.config.resample_hyperparameters && self.temperature == 1.0 {
                let h = self.config.hyperpriors.clone();
                let l = (self.latents.len() + self.empty_latents.len()) as f64;
                let nu = sample_gamma(h.nu_shape + l, h.nu_rate + self.measure, &mut self.rng);
                let weights: Vec<f64> = self.latents.iter().chain(&self.empty_latents).filter_map(|ev| ev.w).collect();
                let mut alpha = self.prior.alpha();
                if let Some(mv) = self.config.alpha_move.clone() {
                    alpha = self.alpha_step(alpha, self.prior.beta(), &weights, &mv);
                }
                let beta = sample_gamma(h.beta_shape + l * alpha, h.beta_rate + weights.iter().sum::<f64>(), &mut self.rng);
                self.prior = GammaWeightPrior::new(alpha, beta.max(f64::MIN_POSITIVE), nu)?;
            }
        } else {
            self.empty_latents.clear();
        }
        if self.config.resample_globals {
            self.resample_globals();
        }
        Ok(())
    }

    fn alpha_step(&mut self, alpha: f64, beta: f64, weights: &[f64], mv: &super::AlphaMove) -> f64 {
        let log_target = |a: f64| {
            (mv.shape - 1.0) * a.ln() - mv.rate * a
                + weights
                    .iter()
                    .map(|w| a * beta.ln() - ln_gamma(a) + (a - 1.0) * w.max(f64::MIN_POSITIVE).ln())
                    .sum::<f64>()
        };
        let prop = alpha * (mv.step * standard_normal(&mut self.rng)).exp();
        let log_accept = log_target(prop) - log_target(alpha) + prop.ln() - alpha.ln();
        if rand::Rng::random::<f64>(&mut self.rng).ln() < log_accept {
            prop
        } else {
            alpha
        }
    }

    fn resample_globals(&mut self) {
        let part = self.partition();
        if self.latents.len() != part.n_clusters() {
            self.resample_latent_events();
        }
        let views: Vec<ClusterView<'_, M::Param>> = part
            .clusters()
            .iter()
            .zip(&self.latents)
            .map(|(c, ev)| ClusterView {
                m: &ev.m,
                theta: &ev.theta,
                points: c.iter().map(|&i| &self.points[i]).collect(),
            })
            .collect();
        let bg: Vec<&MarkedPoint> = part.background().iter().map(|&i| &self.points[i]).collect();
        let mut model = self.model.clone();
        model.resample_globals(&views, &bg, &mut self.rng);
        drop(views);
        self.model = model;
        if self.model.stats_depend_on_globals() {
            self.rebuild_stats();
        }
    }

    fn rebuild_stats(&mut self) {
        let model = &self.model;
        let points = &self.points;
        for sh in &mut self.shards {
            let mut fresh: Vec<Option<M::Stats>> = sh.slots.iter().map(|s| s.as_ref().map(|_| model.empty_stats())).collect();
            for (i, l) in sh.labels.iter().enumerate() {
                if let Some(k) = l {
                    model.stats_add(fresh[*k].as_mut().unwrap(), &points[sh.idx[i]]);
                }
            }
            sh.slots = fresh;
        }
    }

    /// One full sweep of steps 1–4.
    pub fn sweep(&mut self) -> Result<()> {
        self.sweep_assignments()?;
        if self.config.resample_background {
            self.resample_background_rate();
        }
        self.resample_latent_events();
        self.resample_hyperparameters()?;
        self.sweeps += 1;
        if self.config.audit_every > 0 && self.sweeps % self.config.audit_every == 0 {
            self.audit()?;
        }
        Ok(())
    }

    /// log p(N, C0, C, data) at the current hyperparameters, with latent
    /// events integrated out.
    pub fn joint_log_density(&self) -> f64 {
        let part = self.partition();
        let exposure = self.exposure();
        let w0 = if self.background_on { self.background.w0(exposure) } else { 0.0 };
        let clusters: f64 = self
            .shards
            .iter()
            .flat_map(|s| s.slots.iter().flatten())
            .map(|st| self.model.log_cluster_marginal(st))
            .sum();
        let bg: f64 = part
            .background()
            .iter()
            .map(|&i| self.model.background_log_mark_density(&self.points[i]) - exposure.ln())
            .sum();
        self.partition_prior().log_joint(&part.sizes(), part.n_background(), w0) + clusters + bg
    }

    /// Verifies cached statistics against a rebuild from the members.
    pub fn audit(&self) -> Result<()> {
        for (s, sh) in self.shards.iter().enumerate() {
            let mut members: Vec<Vec<usize>> = vec![Vec::new(); sh.slots.len()];
            for (i, l) in sh.labels.iter().enumerate() {
                if let Some(k) = l {
                    members[*k].push(sh.idx[i]);
                }
            }
            for (k, slot) in sh.slots.iter().enumerate() {
                match slot {
                    None if !members[k].is_empty() => {
                        return Err(NspError::Contract(format!("shard {s} slot {k} is free but has members")));
                    }
                    None => {}
                    Some(st) => {
                        let fresh = self.model.stats_from(members[k].iter().map(|&i| &self.points[i]));
                        let (a, b) = (self.model.log_cluster_marginal(st), self.model.log_cluster_marginal(&fresh));
                        if self.model.stats_size(st) != members[k].len() || (a - b).abs() > 1e-6 * b.abs().max(1.0) {
                            return Err(NspError::Contract(format!(
                                "shard {s} slot {k}: cached statistics drifted ({a} vs {b})"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn trace_row(&self) -> TraceRow {
        let part = self.partition();
        TraceRow {
            sweep: self.sweeps,
            temperature: self.temperature,
            n_clusters: part.n_clusters(),
            n_background: part.n_background(),
            log_joint: self.joint_log_density(),
            background_rate: self.background.rate,
            nu_bar: self.prior.nu_bar(),
            alpha: self.prior.alpha(),
            beta: self.prior.beta(),
        }
    }

    pub fn sample(&self) -> ChainSample<M::Param, M::Globals> {
        let row = self.trace_row();
        ChainSample {
            sweep: row.sweep,
            temperature: row.temperature,
            z: self.partition(),
            n_clusters: row.n_clusters,
            n_background: row.n_background,
            background_rate: row.background_rate,
            log_joint: row.log_joint,
            alpha: row.alpha,
            beta: row.beta,
            nu_bar: row.nu_bar,
            latents: if self.config.record_latents {
                self.latents.clone()
            } else {
                Vec::new()
            },
            empty_latents: if self.config.record_latents {
                self.empty_latents.clone()
            } else {
                Vec::new()
            },
            globals: self.config.record_globals.then(|| self.model.globals()),
        }
    }
}
