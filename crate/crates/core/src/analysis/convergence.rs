use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::Trace;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceCriteria {
    /// Tail window is `[tail_fraction·T, T]`.
    pub tail_fraction: f64,
    /// Bound on `max − min` of the risk over the tail.
    pub eps_risk: f64,
    /// Bound on the final `‖∇E(w_T)‖²`, for PL runs.
    pub eps_grad: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedConvergence {
    pub seed: u64,
    pub diverged: bool,
    pub oscillation: f64,
    pub final_grad_norm_sq: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub n_pass: usize,
    pub n_fail: usize,
    pub per_seed: Vec<SeedConvergence>,
}

/// Per-seed tail oscillation of `E(w_t)`; diverged traces count as failures.
pub fn as_convergence_check(
    traces: &[Trace],
    criteria: &ConvergenceCriteria,
) -> Result<ConvergenceReport> {
    let mut per_seed = Vec::with_capacity(traces.len());
    for tr in traces {
        if tr.diverged {
            per_seed.push(SeedConvergence {
                seed: tr.seed,
                diverged: true,
                oscillation: f64::INFINITY,
                final_grad_norm_sq: f64::INFINITY,
                pass: false,
            });
            continue;
        }
        let last = tr.last().ok_or(Error::EmptyTail { seed: tr.seed })?;
        let start = criteria.tail_fraction * last.t as f64;
        let tail: Vec<f64> = tr
            .checkpoints
            .iter()
            .filter(|c| c.t as f64 >= start)
            .map(|c| c.risk)
            .collect();
        if tail.len() < 2 {
            return Err(Error::EmptyTail { seed: tr.seed });
        }
        let hi = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = tail.iter().cloned().fold(f64::INFINITY, f64::min);
        let oscillation = hi - lo;
        let grad_ok = criteria.eps_grad.is_none_or(|e| last.grad_norm_sq <= e);
        per_seed.push(SeedConvergence {
            seed: tr.seed,
            diverged: false,
            oscillation,
            final_grad_norm_sq: last.grad_norm_sq,
            pass: oscillation <= criteria.eps_risk && grad_ok,
        });
    }
    let n_pass = per_seed.iter().filter(|s| s.pass).count();
    Ok(ConvergenceReport {
        n_pass,
        n_fail: per_seed.len() - n_pass,
        per_seed,
    })
}
