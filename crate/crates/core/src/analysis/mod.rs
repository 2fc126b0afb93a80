//! Checkers for the smoothness and PL assumptions, a finite-difference
//! gradient oracle, empirical rate fitting and convergence diagnostics.

mod convergence;
mod finite_diff;
mod inequalities;
mod pl;
mod rates;

pub use convergence::{
    as_convergence_check, ConvergenceCriteria, ConvergenceReport, SeedConvergence,
};
pub use finite_diff::{finite_diff_grad, gradient_check, GradCheckReport};
pub use inequalities::{
    ball_probes, check_holder, check_self_bounding, check_smooth_a, descent_sides, holder_sides,
    self_bounding_sides, ProbeSettings, Sides, Tolerances, ViolationReport, PROBE_SEED,
    ROUNDING_SLACK,
};
pub use pl::{estimate_pl, estimate_pl_at, MIN_SUBOPTIMALITY};
pub use rates::{
    bound_ratio_check, fit_log_linear, fit_rate, BoundRatioReport, RateFit, MIN_FIT_POINTS,
};

/// Relative tolerance for algebraic inequalities.
pub const DEFAULT_INEQUALITY_TOL: f64 = 1e-8;
/// Absolute tolerance on fitted slopes.
pub const DEFAULT_SLOPE_TOL: f64 = 0.15;
