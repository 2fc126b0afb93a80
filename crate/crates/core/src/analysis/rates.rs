use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schedules::Schedule;
use crate::trace::AggregateTrace;

/// Least-squares line through `(ln t, ln value)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    pub n_points: usize,
}

pub const MIN_FIT_POINTS: usize = 4;

pub fn fit_rate(points: &[(f64, f64)], window: (f64, f64)) -> Result<RateFit> {
    let inside: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|&(t, _)| t >= window.0 && t <= window.1)
        .collect();
    if inside.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientPoints {
            needed: MIN_FIT_POINTS,
            found: inside.len(),
        });
    }
    if let Some(&(t, value)) = inside.iter().find(|&&(t, v)| !(v > 0.0) || !(t > 0.0)) {
        return Err(Error::NonPositiveValue { t, value });
    }
    let logs: Vec<(f64, f64)> = inside.iter().map(|&(t, v)| (t.ln(), v.ln())).collect();
    let k = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InsufficientPoints {
            needed: 2,
            found: 1,
        });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = logs
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r_squared = if syy > 0.0 {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        window,
        n_points: inside.len(),
    })
}

/// Least-squares line through `(t, ln value)`: the slope is a per-step
/// log-contraction rate.
pub fn fit_log_linear(points: &[(f64, f64)], window: (f64, f64)) -> Result<RateFit> {
    let inside: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|&(t, _)| t >= window.0 && t <= window.1)
        .collect();
    if inside.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientPoints {
            needed: MIN_FIT_POINTS,
            found: inside.len(),
        });
    }
    if let Some(&(t, value)) = inside.iter().find(|&&(_, v)| !(v > 0.0)) {
        return Err(Error::NonPositiveValue { t, value });
    }
    let k = inside.len() as f64;
    let mx = inside.iter().map(|p| p.0).sum::<f64>() / k;
    let my = inside.iter().map(|p| p.1.ln()).sum::<f64>() / k;
    let sxx: f64 = inside.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = inside.iter().map(|p| (p.0 - mx) * (p.1.ln() - my)).sum();
    let syy: f64 = inside.iter().map(|p| (p.1.ln() - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = inside
        .iter()
        .map(|p| (p.1.ln() - intercept - slope * p.0).powi(2))
        .sum();
    let r_squared = if syy > 0.0 {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        window,
        n_points: inside.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRatioReport {
    /// `(T, min_prefix(T)·Σ_{t≤T} η_t)` for each checkpoint in the window.
    pub ratios: Vec<(u64, f64)>,
    pub max_ratio: f64,
    pub median_ratio: f64,
}

impl BoundRatioReport {
    /// `max_ratio / median_ratio`; stays bounded when the bound form holds.
    pub fn spread(&self) -> f64 {
        self.max_ratio / self.median_ratio
    }
}

pub fn bound_ratio_check(
    agg: &AggregateTrace,
    sched: &Schedule,
    window: (u64, u64),
) -> Result<BoundRatioReport> {
    let pts: Vec<_> = agg
        .checkpoints
        .iter()
        .filter(|c| c.t >= window.0 && c.t <= window.1)
        .collect();
    if pts.is_empty() {
        return Err(Error::InsufficientPoints {
            needed: 1,
            found: 0,
        });
    }
    let ts: Vec<u64> = pts.iter().map(|c| c.t).collect();
    let sums = sched.partial_sums_at(&ts);
    let ratios: Vec<(u64, f64)> = pts
        .iter()
        .zip(sums)
        .map(|(c, s)| (c.t, c.min_prefix_grad_norm_sq * s))
        .collect();
    let mut sorted: Vec<f64> = ratios.iter().map(|r| r.1).collect();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len();
    let median_ratio = if m % 2 == 1 {
        sorted[m / 2]
    } else {
        0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
    };
    Ok(BoundRatioReport {
        max_ratio: sorted[m - 1],
        median_ratio,
        ratios,
    })
}
