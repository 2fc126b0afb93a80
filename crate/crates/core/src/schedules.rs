//! Step-size schedules `t ↦ η_t` and their summability diagnostics.
//!
//! A schedule is a pure function of `t ≥ 1`. Parameterizations outside the
//! range where the convergence guarantees apply still construct; they carry
//! `theorem_valid = false` and a warning so sweeps can run them on purpose.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::types::{PLSpec, SmoothnessSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleKind {
    /// `η_t = η₁ t^{−θ}`
    Polynomial { eta1: f64, theta: f64 },
    /// `η_t = η₁ (t ln^β(t+1))^{−1/(1+α)}`
    LogCorrected { eta1: f64, beta: f64, alpha: f64 },
    /// `η_t = 2 / ((t+1) μ)`
    PlMatched { mu: f64 },
    /// `η_t = η`
    Constant { eta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalyticFlags {
    /// `Σ η_t = ∞`
    pub sum_eta_divergent: bool,
    /// `Σ η_t^{1+α} < ∞`
    pub sum_eta_power_convergent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub kind: ScheduleKind,
    /// Hölder exponent the flags were computed for.
    pub alpha: f64,
    pub flags: AnalyticFlags,
    pub theorem_valid: bool,
    pub warnings: Vec<String>,
}

/// Threshold after which the PL-matched schedule contracts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PLScheduleCert {
    pub mu: f64,
    pub t0: f64,
    #[serde(rename = "L")]
    pub lipschitz: f64,
    pub alpha: f64,
}

impl PLScheduleCert {
    /// `L² η_t^{1+α} ≤ μ η_t`
    pub fn contraction_holds(&self, eta: f64) -> bool {
        self.lipschitz.powi(2) * eta.powf(1.0 + self.alpha) <= self.mu * eta
    }

    pub fn first_valid_step(&self) -> u64 {
        (self.t0.ceil() as u64).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummabilityReport {
    pub horizon: u64,
    pub partial_sum_eta: f64,
    pub partial_sum_eta_power: f64,
    pub flags: AnalyticFlags,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(invalid("alpha", format!("{alpha} not in (0, 1]")))
    }
}

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, format!("{v} must be positive and finite")))
    }
}

impl ScheduleKind {
    pub fn flags(&self, alpha: f64) -> AnalyticFlags {
        match *self {
            ScheduleKind::Polynomial { theta, .. } => AnalyticFlags {
                sum_eta_divergent: theta <= 1.0,
                sum_eta_power_convergent: theta * (1.0 + alpha) > 1.0,
            },
            // Σ (t ln^β(t+1))^{-p/(1+a)} with p = 1 + alpha: the schedule's own
            // exponent is pinned to its `alpha`, so compare against the query.
            ScheduleKind::LogCorrected {
                beta,
                alpha: own_alpha,
                ..
            } => {
                let power = (1.0 + alpha) / (1.0 + own_alpha);
                AnalyticFlags {
                    sum_eta_divergent: 1.0 / (1.0 + own_alpha) < 1.0
                        || (1.0 / (1.0 + own_alpha) == 1.0 && beta <= 1.0),
                    sum_eta_power_convergent: power > 1.0 || (power == 1.0 && beta > 1.0),
                }
            }
            ScheduleKind::PlMatched { .. } => AnalyticFlags {
                sum_eta_divergent: true,
                sum_eta_power_convergent: alpha > 0.0,
            },
            ScheduleKind::Constant { .. } => AnalyticFlags {
                sum_eta_divergent: true,
                sum_eta_power_convergent: false,
            },
        }
    }
}

impl Schedule {
    pub fn polynomial(eta1: f64, theta: f64, alpha: f64) -> Result<Self> {
        check_positive("eta1", eta1)?;
        if !(theta > 0.0 && theta < 1.0) {
            return Err(invalid("theta", format!("{theta} not in (0, 1)")));
        }
        check_alpha(alpha)?;
        let kind = ScheduleKind::Polynomial { eta1, theta };
        let lower = 1.0 / (1.0 + alpha);
        let mut warnings = Vec::new();
        let theorem_valid = theta > lower;
        if !theorem_valid {
            warnings.push(format!(
                "theta = {theta} ≤ 1/(1+alpha) = {lower}: Σ η_t^(1+alpha) diverges"
            ));
        }
        Ok(Self::build(kind, alpha, theorem_valid, warnings))
    }

    pub fn log_corrected(eta1: f64, beta: f64, alpha: f64) -> Result<Self> {
        check_positive("eta1", eta1)?;
        if !beta.is_finite() {
            return Err(invalid("beta", "must be finite"));
        }
        check_alpha(alpha)?;
        let kind = ScheduleKind::LogCorrected { eta1, beta, alpha };
        let mut warnings = Vec::new();
        let theorem_valid = beta > 1.0;
        if !theorem_valid {
            warnings.push(format!("beta = {beta} ≤ 1: Σ η_t^(1+alpha) diverges"));
        }
        Ok(Self::build(kind, alpha, theorem_valid, warnings))
    }

    pub fn pl_matched(mu: f64, smoothness: &SmoothnessSpec) -> Result<(Self, PLScheduleCert)> {
        check_positive("mu", mu)?;
        let alpha = smoothness.alpha;
        let l = smoothness.lipschitz;
        let t0 = 2.0 * l.powf(2.0 / alpha) * mu.powf(-(1.0 + alpha) / alpha);
        let cert = PLScheduleCert {
            mu,
            t0,
            lipschitz: l,
            alpha,
        };
        let sched = Self::build(ScheduleKind::PlMatched { mu }, alpha, true, Vec::new());
        Ok((sched, cert))
    }

    pub fn constant(eta: f64, pl: &PLSpec, smoothness: &SmoothnessSpec) -> Result<Self> {
        check_positive("eta", eta)?;
        let limit = pl.mu / smoothness.lipschitz.powi(2);
        let mut warnings = Vec::new();
        if eta > limit {
            warnings.push(format!("eta = {eta} exceeds mu/L^2 = {limit}"));
        }
        if smoothness.alpha != 1.0 {
            warnings.push(format!(
                "constant steps need alpha = 1, objective has alpha = {}",
                smoothness.alpha
            ));
        }
        let theorem_valid = warnings.is_empty();
        Ok(Self::build(
            ScheduleKind::Constant { eta },
            smoothness.alpha,
            theorem_valid,
            warnings,
        ))
    }

    /// Constant schedule without a PL certificate; always flagged invalid.
    pub fn constant_unchecked(eta: f64, alpha: f64) -> Result<Self> {
        check_positive("eta", eta)?;
        check_alpha(alpha)?;
        Ok(Self::build(
            ScheduleKind::Constant { eta },
            alpha,
            false,
            vec!["no PL certificate to validate the constant step".into()],
        ))
    }

    fn build(kind: ScheduleKind, alpha: f64, theorem_valid: bool, warnings: Vec<String>) -> Self {
        Self {
            kind,
            alpha,
            flags: kind.flags(alpha),
            theorem_valid,
            warnings,
        }
    }

    /// `η_t` for `t ≥ 1`.
    pub fn eta(&self, t: u64) -> f64 {
        debug_assert!(t >= 1);
        let tf = t as f64;
        match self.kind {
            ScheduleKind::Polynomial { eta1, theta } => eta1 * tf.powf(-theta),
            ScheduleKind::LogCorrected { eta1, beta, alpha } => {
                eta1 * (tf * (tf + 1.0).ln().powf(beta)).powf(-1.0 / (1.0 + alpha))
            }
            ScheduleKind::PlMatched { mu } => 2.0 / ((tf + 1.0) * mu),
            ScheduleKind::Constant { eta } => eta,
        }
    }

    /// Running sums `Σ_{s ≤ t} η_s` evaluated at each requested `t` (sorted).
    pub fn partial_sums_at(&self, ts: &[u64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(ts.len());
        let mut acc = 0.0;
        let mut s = 0u64;
        for &t in ts {
            while s < t {
                s += 1;
                acc += self.eta(s);
            }
            out.push(acc);
        }
        out
    }
}

pub fn summability_report(s: &Schedule, alpha: f64, horizon: u64) -> SummabilityReport {
    let (mut sum, mut sum_pow) = (0.0, 0.0);
    for t in 1..=horizon {
        let eta = s.eta(t);
        sum += eta;
        sum_pow += eta.powf(1.0 + alpha);
    }
    SummabilityReport {
        horizon,
        partial_sum_eta: sum,
        partial_sum_eta_power: sum_pow,
        flags: s.kind.flags(alpha),
    }
}
