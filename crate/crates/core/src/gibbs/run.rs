use super::record::{ChainRecord, ChainSample};
use super::state::ChainState;
use super::ChainConfig;
use crate::domain::{GammaWeightPrior, MarkedPoint};
use crate::error::{NspError, Result};
use crate::eval::SpeckledMask;
use crate::models::{BackgroundModel, ClusterModel};
use crate::rng::RngStream;

type Record<M> = ChainRecord<<M as ClusterModel>::Param, <M as ClusterModel>::Globals>;
type Sample<M> = ChainSample<<M as ClusterModel>::Param, <M as ClusterModel>::Globals>;

/// Anneals, warms up and collects `config.n_samples` states.
pub fn run_chain<M: ClusterModel>(
    model: M,
    points: Vec<MarkedPoint>,
    prior: GammaWeightPrior,
    background: BackgroundModel,
    config: &ChainConfig,
    mask: Option<SpeckledMask>,
    rng: RngStream,
) -> Result<Record<M>> {
    run_chain_with(model, points, prior, background, config, mask, rng, |_| Ok(()))
}

/// Like [`run_chain`], calling `on_sample` as each state is retained.
#[allow(clippy::too_many_arguments)]
pub fn run_chain_with<M: ClusterModel, F: FnMut(&Sample<M>) -> Result<()>>(
    model: M,
    points: Vec<MarkedPoint>,
    prior: GammaWeightPrior,
    background: BackgroundModel,
    config: &ChainConfig,
    mask: Option<SpeckledMask>,
    rng: RngStream,
    on_sample: F,
) -> Result<Record<M>> {
    let state = ChainState::new(model, points, prior, background, config, mask, rng)?;
    run_from_state(state, config, on_sample)
}

/// Drives an existing state through the schedule of `config`.
pub fn run_from_state<M: ClusterModel, F: FnMut(&Sample<M>) -> Result<()>>(
    mut state: ChainState<M>,
    config: &ChainConfig,
    mut on_sample: F,
) -> Result<Record<M>> {
    config.validate()?;
    let mut rec = ChainRecord::default();
    let step = |state: &mut ChainState<M>, rec: &mut Record<M>| -> Result<()> {
        state.sweep()?;
        rec.trace.push(state.trace_row());
        Ok(())
    };
    for stage in 0..config.anneal.stages {
        state.set_temperature(config.anneal.temperature(stage));
        for _ in 0..config.anneal.sweeps_per_stage {
            step(&mut state, &mut rec)?;
        }
    }
    state.set_temperature(1.0);
    for _ in 0..config.warmup_sweeps() {
        step(&mut state, &mut rec)?;
    }
    warn_if_straddling(&state);
    for _ in 0..config.n_samples {
        for _ in 0..config.thin {
            step(&mut state, &mut rec)?;
        }
        let s = state.sample();
        if !s.log_joint.is_finite() {
            return Err(NspError::Contract(format!("non-finite joint density at sweep {}", s.sweep)));
        }
        on_sample(&s)?;
        rec.samples.push(s);
    }
    Ok(rec)
}

/// Clusters wider than half a shard suggest the split is cutting through them.
fn warn_if_straddling<M: ClusterModel>(state: &ChainState<M>) {
    let Some(plan) = state.plan() else { return };
    let axis = plan.axis();
    let points = state.points();
    for c in state.partition().clusters() {
        let (lo, hi) = c.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
            (lo.min(points[i].x[axis]), hi.max(points[i].x[axis]))
        });
        let s = plan.shard_of(&points[c[0]].x);
        if hi - lo > 0.5 * plan.width(s) {
            log::warn!(
                "a cluster spans {:.3} of a shard {:.3} wide; clusters may straddle shard boundaries",
                hi - lo,
                plan.width(s)
            );
            return;
        }
    }
}
