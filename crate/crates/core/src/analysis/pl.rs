use crate::error::{Error, Result};
use crate::objectives::Objective;
use crate::types::ParamVector;

use super::inequalities::ball_probes;

/// Probes whose suboptimality is at or below this are skipped.
pub const MIN_SUBOPTIMALITY: f64 = 1e-10;

/// `μ̂ = min ‖∇E(w)‖² / (2(E(w) − E*))` over probes in the ball, using the
/// objective's certified optimum value. A valid certificate has `μ ≤ μ̂`.
pub fn estimate_pl(obj: &Objective, n_probes: usize, radius: f64, seed: u64) -> Result<f64> {
    let pl = obj.pl().ok_or(Error::MissingPlCertificate)?;
    let probes = ball_probes(obj.dim(), n_probes, radius, seed);
    estimate_pl_at(obj, pl.optimum_value, &probes)
}

pub fn estimate_pl_at(obj: &Objective, optimum_value: f64, probes: &[ParamVector]) -> Result<f64> {
    let mut best = f64::INFINITY;
    for w in probes {
        let gap = obj.population_value(w)? - optimum_value;
        if gap > MIN_SUBOPTIMALITY {
            let g2 = obj.population_grad(w)?.norm_sq();
            best = best.min(g2 / (2.0 * gap));
        }
    }
    if best.is_finite() {
        Ok(best)
    } else {
        Err(Error::EstimationUndefined)
    }
}
