use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::objectives::Objective;
use crate::types::ParamVector;

use super::inequalities::ball_probes;

/// Central differences with step `h = h_rel·(1 + ‖w‖)` in every coordinate.
pub fn finite_diff_grad<F>(f: F, w: &ParamVector, h_rel: f64) -> Result<ParamVector>
where
    F: Fn(&ParamVector) -> f64,
{
    if !(h_rel > 0.0) {
        return Err(invalid("h_rel", format!("{h_rel} must be positive")));
    }
    let h = h_rel * (1.0 + w.norm());
    let mut probe = w.clone();
    let grad = (0..w.dim())
        .map(|j| {
            let orig = w[j];
            probe.as_mut_slice()[j] = orig + h;
            let plus = f(&probe);
            probe.as_mut_slice()[j] = orig - h;
            let minus = f(&probe);
            probe.as_mut_slice()[j] = orig;
            (plus - minus) / (2.0 * h)
        })
        .collect();
    Ok(ParamVector::new(grad))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub n_points: usize,
    pub h_rel: f64,
    /// `max ‖g_fd − g‖ / ‖g‖` over probe points.
    pub max_rel_error: f64,
    pub worst_point_norm: f64,
}

/// Compares `population_grad` with central differences of `population_value`.
pub fn gradient_check(
    obj: &Objective,
    n_points: usize,
    radius: f64,
    h_rel: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    let mut worst = (0.0f64, 0.0f64);
    for w in ball_probes(obj.dim(), n_points, radius, seed) {
        let analytic = obj.population_grad(&w)?;
        let fd = finite_diff_grad(|v| obj.value_unchecked(v), &w, h_rel)?;
        let err = fd.sub(&analytic).norm();
        let rel = err / analytic.norm().max(f64::MIN_POSITIVE);
        if rel > worst.0 {
            worst = (rel, w.norm());
        }
    }
    Ok(GradCheckReport {
        n_points,
        h_rel,
        max_rel_error: worst.0,
        worst_point_norm: worst.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synthetic, SyntheticSpec};

    #[test]
    fn linear_function() {
        let c = ParamVector::new(vec![1.5, -2.0, 0.25]);
        let w = ParamVector::new(vec![3.0, 1.0, -7.0]);
        let g = finite_diff_grad(|v| v.dot(&c), &w, 1e-5).unwrap();
        assert!(g.sub(&c).norm() < 1e-9);
    }

    #[test]
    fn half_norm_squared() {
        let w = ParamVector::new(vec![0.3, -4.0, 2.5, 9.0]);
        let g = finite_diff_grad(|v| 0.5 * v.norm_sq(), &w, 1e-5).unwrap();
        assert!(g.sub(&w).norm() < 1e-8);
        assert!(finite_diff_grad(|v| v.norm_sq(), &w, 0.0).is_err());
    }

    #[test]
    fn welsch_population_gradient() {
        let data = synthetic(&SyntheticSpec {
            n: 25,
            d: 3,
            seed: 2,
            planted: true,
            noise: 0.3,
            normalize: true,
        })
        .unwrap()
        .data;
        let obj = Objective::welsch(data, 1.0).unwrap();
        let r = gradient_check(&obj, 100, 10.0, 1e-5, 1).unwrap();
        assert!(r.max_rel_error <= 1e-5, "{r:?}");
    }
}
