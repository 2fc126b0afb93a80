//! Stochastic gradient descent over finite-population objectives whose value
//! and gradient can be evaluated exactly, together with the tooling to check
//! Hölder-smoothness and Polyak-Łojasiewicz certificates and to measure
//! convergence rates across seeds.
//!
//! The sampling measure is always the uniform distribution over a
//! [`Dataset`], so `E(w)` and `∇E(w)` are finite averages.

// `!(x > 0.0)` guards are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod data;
pub mod engine;
mod error;
pub mod kernel;
pub mod objectives;
pub mod rng;
pub mod schedules;
pub mod trace;
mod types;

pub use error::{Error, Result};
pub use objectives::{LossFamily, Objective};
pub use schedules::{PLScheduleCert, Schedule, ScheduleKind};
pub use trace::{AggregateTrace, Checkpoint, Iterate, Trace};
pub use types::{zero_param, Dataset, PLSpec, ParamVector, Provenance, Sample, SmoothnessSpec};
