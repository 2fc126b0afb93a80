//! The SGD recursion `w_{t+1} = w_t − η_t ∇f(w_t, z_t)` started from `w₁ = 0`,
//! with `z_t` drawn i.i.d. uniformly (with replacement) from the dataset.
//!
//! At each checkpoint `t` the exact `E(w_t)` and `‖∇E(w_t)‖²` are recorded,
//! i.e. the state *before* the `t`-th update. A run performs `T` updates and
//! keeps `w_{T+1}` as its final iterate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use crate::error::{invalid, Error, Result};
use crate::objectives::Objective;
use crate::rng::IndexStream;
use crate::schedules::Schedule;
use crate::trace::{AggregateTrace, Checkpoint, Iterate, Trace};
use crate::types::{zero_param, ParamVector};

pub const DEFAULT_DIVERGENCE_FACTOR: f64 = 1e6;

/// Upper bound on the horizon of a diagnostic run.
pub const MAX_DIAGNOSTIC_HORIZON: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckpointPolicy {
    /// `{1, 2, 4, 8, …} ∪ {T}`
    Geometric2,
    /// Listed times, always joined with `{1, T}`; values outside `[1, T]` are dropped.
    Explicit(Vec<u64>),
}

impl CheckpointPolicy {
    pub fn times(&self, horizon: u64) -> Vec<u64> {
        let mut set = BTreeSet::from([1, horizon]);
        match self {
            CheckpointPolicy::Geometric2 => {
                let mut t = 1u64;
                while t <= horizon {
                    set.insert(t);
                    t = match t.checked_mul(2) {
                        Some(v) => v,
                        None => break,
                    };
                }
            }
            CheckpointPolicy::Explicit(ts) => {
                set.extend(ts.iter().copied().filter(|&t| t >= 1 && t <= horizon));
            }
        }
        set.into_iter().collect()
    }

    /// Geometric grid plus `count` evenly spaced times in `[⌈fraction·T⌉, T]`.
    pub fn geometric_with_tail(horizon: u64, fraction: f64, count: u64) -> Self {
        let mut ts = CheckpointPolicy::Geometric2.times(horizon);
        let start = ((fraction * horizon as f64).ceil() as u64).clamp(1, horizon);
        let span = horizon - start;
        for k in 0..count {
            ts.push(start + span * k / count.max(1));
        }
        CheckpointPolicy::Explicit(ts)
    }

    /// Every step `1..=T`.
    pub fn every_step(horizon: u64) -> Self {
        CheckpointPolicy::Explicit((1..=horizon).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub horizon: u64,
    pub seed: u64,
    pub checkpoints: CheckpointPolicy,
    pub divergence_factor: f64,
}

impl RunConfig {
    pub fn new(horizon: u64, seed: u64) -> Self {
        Self {
            horizon,
            seed,
            checkpoints: CheckpointPolicy::Geometric2,
            divergence_factor: DEFAULT_DIVERGENCE_FACTOR,
        }
    }

    pub fn with_checkpoints(mut self, policy: CheckpointPolicy) -> Self {
        self.checkpoints = policy;
        self
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon < 1 {
            return Err(invalid("horizon", "must be at least 1"));
        }
        if !(self.divergence_factor > 1.0) {
            return Err(invalid(
                "divergence_factor",
                format!("{} must exceed 1", self.divergence_factor),
            ));
        }
        Ok(())
    }

    pub(crate) fn divergence_threshold(&self, initial_risk: f64) -> f64 {
        self.divergence_factor * initial_risk.max(1.0)
    }
}

/// `w − η g` as a fresh vector.
pub fn sgd_step(w: &ParamVector, g: &ParamVector, eta: f64) -> Result<ParamVector> {
    g.check_dim(w.dim())?;
    if !(eta > 0.0) {
        return Err(invalid("eta", format!("{eta} must be positive")));
    }
    Ok(ParamVector::new(
        w.iter()
            .zip(g.iter())
            .map(|(wi, gi)| wi - eta * gi)
            .collect(),
    ))
}

/// Per-step quantities of a diagnostic run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: u64,
    pub index: usize,
    pub eta: f64,
    /// `E(w_t)`
    pub risk: f64,
    /// `E(w_{t+1})`
    pub next_risk: f64,
    /// `⟨∇f(w_t, z_t), ∇E(w_t)⟩`
    pub inner: f64,
    /// `‖∇f(w_t, z_t)‖²`
    pub sample_grad_norm_sq: f64,
}

pub fn run(obj: &Objective, sched: &Schedule, cfg: &RunConfig) -> Result<Trace> {
    run_observed(obj, sched, cfg, |_, _| {})
}

/// Like [`run`], calling `observe(checkpoint, w_t)` at every recorded checkpoint.
pub fn run_observed<F>(
    obj: &Objective,
    sched: &Schedule,
    cfg: &RunConfig,
    mut observe: F,
) -> Result<Trace>
where
    F: FnMut(&Checkpoint, &[f64]),
{
    run_inner(obj, sched, cfg, &mut observe, None)
}

/// Records a [`StepRecord`] for every update; limited to short horizons.
pub fn run_diagnostic(
    obj: &Objective,
    sched: &Schedule,
    cfg: &RunConfig,
) -> Result<(Trace, Vec<StepRecord>)> {
    if cfg.horizon > MAX_DIAGNOSTIC_HORIZON {
        return Err(invalid(
            "horizon",
            format!("diagnostic runs are capped at T = {MAX_DIAGNOSTIC_HORIZON}"),
        ));
    }
    let mut steps = Vec::with_capacity(cfg.horizon as usize);
    let trace = run_inner(obj, sched, cfg, &mut |_, _| {}, Some(&mut steps))?;
    Ok((trace, steps))
}

fn run_inner(
    obj: &Objective,
    sched: &Schedule,
    cfg: &RunConfig,
    observe: &mut dyn FnMut(&Checkpoint, &[f64]),
    mut steps: Option<&mut Vec<StepRecord>>,
) -> Result<Trace> {
    cfg.validate()?;
    let samples = obj.dataset().samples();
    let family = obj.family();
    let times = cfg.checkpoints.times(cfg.horizon);
    let mut w = zero_param(obj.dim())?.into_inner();
    let mut stream = IndexStream::new(cfg.seed, samples.len());
    let threshold = cfg.divergence_threshold(obj.value_unchecked(&w));

    let mut checkpoints = Vec::with_capacity(times.len());
    let mut next = times.iter().peekable();
    let mut diverged = false;

    for t in 1..=cfg.horizon {
        let eta = sched.eta(t);
        if next.peek() == Some(&&t) {
            next.next();
            let (risk, grad_norm_sq) = obj.value_and_grad_norm_sq(&w);
            let cp = Checkpoint {
                t,
                risk,
                grad_norm_sq,
                eta,
            };
            checkpoints.push(cp);
            if !risk.is_finite() || risk > threshold {
                diverged = true;
                break;
            }
            observe(&cp, &w);
        }

        let i = stream.next_index();
        let z = &samples[i];
        let s = family.derivative(obj.residual(&w, z));

        if let Some(steps) = steps.as_deref_mut() {
            let (risk, _) = obj.value_and_grad_norm_sq(&w);
            let full = obj.grad_unchecked(&w);
            let inner = s * crate::types::dot(&z.x, &full);
            let sample_grad_norm_sq = s * s * crate::types::norm_sq(&z.x);
            let mut w_next = w.clone();
            for (wj, xj) in w_next.iter_mut().zip(&z.x) {
                *wj -= eta * (s * xj);
            }
            steps.push(StepRecord {
                t,
                index: i,
                eta,
                risk,
                next_risk: obj.value_unchecked(&w_next),
                inner,
                sample_grad_norm_sq,
            });
        }

        for (wj, xj) in w.iter_mut().zip(&z.x) {
            *wj -= eta * (s * xj);
        }
        if !w.iter().all(|v| v.is_finite()) {
            diverged = true;
            break;
        }
    }

    Ok(Trace {
        seed: cfg.seed,
        checkpoints,
        diverged,
        final_iterate: Iterate::Dense(ParamVector::new(w)),
    })
}

pub(crate) fn check_seeds(seeds: &[u64]) -> Result<()> {
    let distinct: BTreeSet<u64> = seeds.iter().copied().collect();
    if seeds.is_empty() || distinct.len() != seeds.len() {
        return Err(Error::InvalidSeeds);
    }
    Ok(())
}

/// One trace per seed, in seed order. Seeds run concurrently.
pub fn run_seeds(
    obj: &Objective,
    sched: &Schedule,
    cfg_base: &RunConfig,
    seeds: &[u64],
) -> Result<Vec<Trace>> {
    check_seeds(seeds)?;
    seeds
        .par_iter()
        .map(|&seed| run(obj, sched, &cfg_base.with_seed(seed)))
        .collect()
}

pub fn run_multi(
    obj: &Objective,
    sched: &Schedule,
    cfg_base: &RunConfig,
    seeds: &[u64],
) -> Result<AggregateTrace> {
    let traces = run_seeds(obj, sched, cfg_base, seeds)?;
    AggregateTrace::from_traces(&traces)
}
