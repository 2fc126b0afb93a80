//! Checkpointed run records and their cross-seed aggregate, with the CSV and
//! JSON encodings used on disk.

use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::error::{Error, Result};
use crate::kernel::RepresenterState;
use crate::types::ParamVector;

pub const TRACE_CSV_HEADER: &str = "t,risk,grad_norm_sq,eta";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub t: u64,
    pub risk: f64,
    pub grad_norm_sq: f64,
    pub eta: f64,
}

/// Last iterate of a run: a dense vector or a kernel expansion.
#[derive(Debug, Clone, PartialEq)]
pub enum Iterate {
    Dense(ParamVector),
    Representer(RepresenterState),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub seed: u64,
    pub checkpoints: Vec<Checkpoint>,
    pub diverged: bool,
    pub final_iterate: Iterate,
}

impl Trace {
    pub fn last(&self) -> Option<&Checkpoint> {
        self.checkpoints.last()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{TRACE_CSV_HEADER}")?;
        for c in &self.checkpoints {
            writeln!(w, "{},{},{},{}", c.t, c.risk, c.grad_norm_sq, c.eta)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregatePoint {
    pub t: u64,
    pub mean_risk: f64,
    pub mean_grad_norm_sq: f64,
    pub min_prefix_grad_norm_sq: f64,
}

/// Seed-averaged trace. `min_prefix_grad_norm_sq` is the running minimum of
/// `mean_grad_norm_sq`, an estimator of `min_{t ≤ T} E‖∇E(w_t)‖²` restricted
/// to checkpoint times (so it can only overstate the full-grid minimum).
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateTrace {
    pub checkpoints: Vec<AggregatePoint>,
    pub n_seeds: usize,
    pub diverged_seeds: Vec<u64>,
}

/// On-disk layout of an aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateJson {
    pub t: Vec<u64>,
    pub mean_risk: Vec<f64>,
    pub mean_grad_norm_sq: Vec<f64>,
    pub min_prefix: Vec<f64>,
    pub n_seeds: usize,
    pub diverged_seeds: Vec<u64>,
}

impl AggregateTrace {
    /// Averages the non-diverged traces checkpoint by checkpoint.
    pub fn from_traces(traces: &[Trace]) -> Result<Self> {
        let diverged_seeds: Vec<u64> = traces
            .iter()
            .filter(|t| t.diverged)
            .map(|t| t.seed)
            .collect();
        let live: Vec<&Trace> = traces.iter().filter(|t| !t.diverged).collect();
        let first = live.first().ok_or(Error::AllSeedsDiverged(traces.len()))?;
        let grid: Vec<u64> = first.checkpoints.iter().map(|c| c.t).collect();
        if live
            .iter()
            .any(|tr| !tr.checkpoints.iter().map(|c| c.t).eq(grid.iter().copied()))
        {
            return Err(Error::CheckpointMismatch);
        }
        let k = live.len() as f64;
        let mut running_min = f64::INFINITY;
        let checkpoints = grid
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let mean_risk = live.iter().map(|tr| tr.checkpoints[i].risk).sum::<f64>() / k;
                let mean_grad_norm_sq = live
                    .iter()
                    .map(|tr| tr.checkpoints[i].grad_norm_sq)
                    .sum::<f64>()
                    / k;
                running_min = running_min.min(mean_grad_norm_sq);
                AggregatePoint {
                    t,
                    mean_risk,
                    mean_grad_norm_sq,
                    min_prefix_grad_norm_sq: running_min,
                }
            })
            .collect();
        Ok(Self {
            checkpoints,
            n_seeds: live.len(),
            diverged_seeds,
        })
    }

    /// Keeps only checkpoints whose `t` is listed. Checkpoints only observe a
    /// run, so this equals the aggregate of runs recorded on that grid alone,
    /// except that the running minimum is recomputed over the kept points.
    pub fn restrict_to(&self, times: &[u64]) -> Self {
        let mut running_min = f64::INFINITY;
        let checkpoints = self
            .checkpoints
            .iter()
            .filter(|c| times.contains(&c.t))
            .map(|c| {
                running_min = running_min.min(c.mean_grad_norm_sq);
                AggregatePoint {
                    min_prefix_grad_norm_sq: running_min,
                    ..*c
                }
            })
            .collect();
        Self {
            checkpoints,
            n_seeds: self.n_seeds,
            diverged_seeds: self.diverged_seeds.clone(),
        }
    }

    pub fn to_json(&self) -> AggregateJson {
        AggregateJson {
            t: self.checkpoints.iter().map(|c| c.t).collect(),
            mean_risk: self.checkpoints.iter().map(|c| c.mean_risk).collect(),
            mean_grad_norm_sq: self
                .checkpoints
                .iter()
                .map(|c| c.mean_grad_norm_sq)
                .collect(),
            min_prefix: self
                .checkpoints
                .iter()
                .map(|c| c.min_prefix_grad_norm_sq)
                .collect(),
            n_seeds: self.n_seeds,
            diverged_seeds: self.diverged_seeds.clone(),
        }
    }

    pub fn from_json(j: &AggregateJson) -> Result<Self> {
        let len = j.t.len();
        if j.mean_risk.len() != len || j.mean_grad_norm_sq.len() != len || j.min_prefix.len() != len
        {
            return Err(Error::InvalidDataset(
                "aggregate arrays have different lengths".into(),
            ));
        }
        let checkpoints = (0..len)
            .map(|i| AggregatePoint {
                t: j.t[i],
                mean_risk: j.mean_risk[i],
                mean_grad_norm_sq: j.mean_grad_norm_sq[i],
                min_prefix_grad_norm_sq: j.min_prefix[i],
            })
            .collect();
        Ok(Self {
            checkpoints,
            n_seeds: j.n_seeds,
            diverged_seeds: j.diverged_seeds.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(seed: u64, grads: &[f64], diverged: bool) -> Trace {
        Trace {
            seed,
            checkpoints: grads
                .iter()
                .enumerate()
                .map(|(i, &g)| Checkpoint {
                    t: 1 << i,
                    risk: 2.0 * g,
                    grad_norm_sq: g,
                    eta: 0.1,
                })
                .collect(),
            diverged,
            final_iterate: Iterate::Dense(ParamVector::new(vec![0.0])),
        }
    }

    #[test]
    fn single_seed_aggregate_is_identity() {
        let tr = trace(1, &[4.0, 3.0, 5.0, 1.0], false);
        let agg = AggregateTrace::from_traces(std::slice::from_ref(&tr)).unwrap();
        assert_eq!(agg.n_seeds, 1);
        for (a, c) in agg.checkpoints.iter().zip(&tr.checkpoints) {
            assert_eq!(a.mean_risk, c.risk);
            assert_eq!(a.mean_grad_norm_sq, c.grad_norm_sq);
        }
        let mp: Vec<f64> = agg
            .checkpoints
            .iter()
            .map(|c| c.min_prefix_grad_norm_sq)
            .collect();
        assert_eq!(mp, vec![4.0, 3.0, 3.0, 1.0]);
    }

    #[test]
    fn identical_seeds_aggregate_to_either() {
        let a = trace(1, &[4.0, 2.0], false);
        let mut b = a.clone();
        b.seed = 2;
        let agg = AggregateTrace::from_traces(&[a.clone(), b]).unwrap();
        let one = AggregateTrace::from_traces(&[a]).unwrap();
        assert_eq!(agg.checkpoints, one.checkpoints);
    }

    #[test]
    fn diverged_seeds_are_excluded() {
        let a = trace(1, &[4.0, 2.0], false);
        let b = trace(2, &[f64::INFINITY], true);
        let agg = AggregateTrace::from_traces(&[a, b.clone()]).unwrap();
        assert_eq!(agg.n_seeds, 1);
        assert_eq!(agg.diverged_seeds, vec![2]);
        assert!(matches!(
            AggregateTrace::from_traces(&[b]),
            Err(Error::AllSeedsDiverged(1))
        ));
    }

    #[test]
    fn restriction_recomputes_running_min() {
        let agg = AggregateTrace::from_traces(&[trace(1, &[1.0, 0.5, 0.7, 0.6], false)]).unwrap();
        let sub = agg.restrict_to(&[1, 4, 8]);
        let mp: Vec<f64> = sub
            .checkpoints
            .iter()
            .map(|c| c.min_prefix_grad_norm_sq)
            .collect();
        assert_eq!(mp, vec![1.0, 0.7, 0.6]);
    }

    #[test]
    fn json_roundtrip() {
        let agg = AggregateTrace::from_traces(&[trace(3, &[1.0, 0.5, 0.7], false)]).unwrap();
        let text = serde_json::to_string(&agg.to_json()).unwrap();
        let back: AggregateJson = serde_json::from_str(&text).unwrap();
        assert_eq!(AggregateTrace::from_json(&back).unwrap(), agg);
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        trace(1, &[0.25, 0.125], false).write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "t,risk,grad_norm_sq,eta\n1,0.5,0.25,0.1\n2,0.25,0.125,0.1\n"
        );
    }
}
