//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any criterion fails.
//!
//! Fixed inputs:
//! - property dataset: n = 100, d = 10, unit-norm standard normal inputs,
//!   planted unit-norm model, noise 0.5, data seed 42;
//! - PL-rate dataset: same generator with d = 3;
//! - interpolating dataset: n = 50, d = 100, seed 7.

use std::time::{Duration, Instant};

use holder_sgd::analysis::{
    as_convergence_check, bound_ratio_check, check_holder, check_self_bounding, check_smooth_a,
    fit_log_linear, fit_rate, gradient_check, ConvergenceCriteria, ProbeSettings, PROBE_SEED,
};
use holder_sgd::data::{synthetic, SyntheticSpec};
use holder_sgd::engine::{run, run_observed, run_seeds, CheckpointPolicy, RunConfig};
use holder_sgd::kernel::{run_kernel_observed, Kernel};
use holder_sgd::schedules::summability_report;
use holder_sgd::{AggregateTrace, Dataset, LossFamily, Objective, Schedule, Trace};

const DATA_SEED: u64 = 42;
const INTERP_SEED: u64 = 7;
const HORIZON: u64 = 100_000;
const TAIL_FRACTION: f64 = 0.9;
const TAIL_POINTS: u64 = 5;
const RATE_WINDOW: (u64, u64) = (1_000, 100_000);

fn seeds(k: u64) -> Vec<u64> {
    (1..=k).collect()
}

fn dataset(d: usize) -> Dataset {
    synthetic(&SyntheticSpec {
        n: 100,
        d,
        seed: DATA_SEED,
        planted: true,
        noise: 0.5,
        normalize: true,
    })
    .unwrap()
    .data
}

fn property_objectives() -> Vec<(String, Objective)> {
    let data = dataset(10);
    let mut out = vec![
        (
            "least_squares".to_string(),
            Objective::least_squares(data.clone()).unwrap(),
        ),
        (
            "welsch(c=1)".to_string(),
            Objective::welsch(data.clone(), 1.0).unwrap(),
        ),
    ];
    for a in [0.3, 0.5, 0.7] {
        out.push((
            format!("holder_p(alpha={a})"),
            Objective::holder_p(data.clone(), a).unwrap(),
        ));
    }
    out
}

fn csv_bytes(tr: &Trace) -> Vec<u8> {
    let mut buf = Vec::new();
    tr.write_csv(&mut buf).unwrap();
    buf
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

// 1. Hölder, descent and self-bounding inequalities.
fn c1_property_suite() -> Outcome {
    let start = Instant::now();
    let settings = ProbeSettings {
        n_probes: 10_000,
        radius: 10.0,
        tol: 1e-8,
        seed: PROBE_SEED,
    };
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for (name, obj) in property_objectives() {
        for r in [
            check_holder(&obj, &settings),
            check_smooth_a(&obj, &settings),
            check_self_bounding(&obj, &settings),
        ] {
            worst = worst.max(r.worst_ratio);
            if r.n_violations > 0 {
                failures.push(format!(
                    "{name}/{}: {} violations",
                    r.check_name, r.n_violations
                ));
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = failures.is_empty() && elapsed <= Duration::from_secs(60);
    outcome(
        pass,
        format!(
            "worst lhs/rhs {worst:.6}, {:.1?}, failures {failures:?}",
            elapsed
        ),
    )
}

// 2. Analytic gradient vs central differences.
fn c2_gradient_oracle() -> Outcome {
    let mut worst: (f64, String, f64) = (0.0, String::new(), 0.0);
    for (name, obj) in property_objectives() {
        let r = gradient_check(&obj, 100, 10.0, 1e-5, PROBE_SEED).unwrap();
        if r.max_rel_error > worst.0 {
            // informational only: truncation error should shrink like h²
            let finer = gradient_check(&obj, 100, 10.0, 1e-6, PROBE_SEED).unwrap();
            worst = (r.max_rel_error, name, finer.max_rel_error);
        }
    }
    outcome(
        worst.0 <= 1e-5,
        format!(
            "max relative error {:.3e} ({}); same points at h_rel = 1e-6: {:.3e}",
            worst.0, worst.1, worst.2
        ),
    )
}

/// Geometric grid, a point at the start of the rate window, and a few
/// points in the tail window.
fn experiment_grid() -> CheckpointPolicy {
    let mut ts =
        CheckpointPolicy::geometric_with_tail(HORIZON, TAIL_FRACTION, TAIL_POINTS).times(HORIZON);
    ts.push(RATE_WINDOW.0);
    CheckpointPolicy::Explicit(ts)
}

struct NonconvexRun {
    sched: Schedule,
    traces: Vec<Trace>,
    agg: AggregateTrace,
}

fn nonconvex_run() -> NonconvexRun {
    let obj = Objective::welsch(dataset(10), 1.0).unwrap();
    let eta1 = 1.0 / obj.smoothness().lipschitz;
    let sched = Schedule::polynomial(eta1, 0.75, 1.0).unwrap();
    let cfg = RunConfig::new(HORIZON, 0).with_checkpoints(experiment_grid());
    let traces = run_seeds(&obj, &sched, &cfg, &seeds(20)).unwrap();
    let agg = AggregateTrace::from_traces(&traces).unwrap();
    NonconvexRun { sched, traces, agg }
}

// 3. min_prefix · Σ η_t stays bounded; min_prefix drops tenfold.
fn c3_bound_form(r: &NonconvexRun, elapsed: Duration) -> Outcome {
    let geometric = CheckpointPolicy::Geometric2.times(HORIZON);
    let agg = r.agg.restrict_to(&geometric);
    let report = bound_ratio_check(&agg, &r.sched, RATE_WINDOW).unwrap();
    // running minimum over every recorded checkpoint, read exactly at t
    let at = |t: u64| {
        r.agg
            .checkpoints
            .iter()
            .find(|c| c.t == t)
            .expect("t is on the grid")
            .min_prefix_grad_norm_sq
    };
    let drop = at(HORIZON) / at(RATE_WINDOW.0);
    let pass = report.spread() <= 10.0
        && drop <= 0.1
        && r.agg.n_seeds == 20
        && elapsed <= Duration::from_secs(300);
    outcome(
        pass,
        format!(
            "max/median {:.3}, min_prefix(1e5)/min_prefix(1e3) {drop:.3e}, {} seeds, {:.1?}",
            report.spread(),
            r.agg.n_seeds,
            elapsed
        ),
    )
}

struct PlRun {
    optimum: f64,
    t0: f64,
    traces: Vec<Trace>,
    agg: AggregateTrace,
}

fn pl_run() -> PlRun {
    let obj = Objective::least_squares(dataset(3)).unwrap();
    let pl = obj.pl().unwrap().clone();
    let (sched, cert) = Schedule::pl_matched(pl.mu, obj.smoothness()).unwrap();
    let cfg = RunConfig::new(HORIZON, 0).with_checkpoints(experiment_grid());
    let traces = run_seeds(&obj, &sched, &cfg, &seeds(20)).unwrap();
    let agg = AggregateTrace::from_traces(&traces).unwrap();
    PlRun {
        optimum: pl.optimum_value,
        t0: cert.t0,
        traces,
        agg,
    }
}

// 4. Mean suboptimality decays like 1/t under the PL-matched schedule.
fn c4_pl_rate(r: &PlRun, elapsed: Duration) -> Outcome {
    let geometric = CheckpointPolicy::Geometric2.times(HORIZON);
    let pts: Vec<(f64, f64)> = r
        .agg
        .restrict_to(&geometric)
        .checkpoints
        .iter()
        .map(|c| (c.t as f64, c.mean_risk - r.optimum))
        .collect();
    let fit = fit_rate(&pts, (RATE_WINDOW.0 as f64, RATE_WINDOW.1 as f64)).unwrap();
    let pass = (-1.3..=-0.8).contains(&fit.slope)
        && r.t0 <= RATE_WINDOW.0 as f64
        && r.agg.n_seeds == 20
        && elapsed <= Duration::from_secs(300);
    outcome(
        pass,
        format!(
            "slope {:.4} (r² {:.4}), t0 {:.2}, {} seeds, {:.1?}",
            fit.slope, fit.r_squared, r.t0, r.agg.n_seeds, elapsed
        ),
    )
}

struct LinearCheck {
    slope: f64,
    slope_bound: f64,
    worst_step_ratio: f64,
    step_bound: f64,
    diverged: usize,
}

impl LinearCheck {
    fn pass(&self) -> bool {
        self.diverged == 0
            && self.slope <= self.slope_bound
            && self.worst_step_ratio <= self.step_bound
    }
}

/// Runs interpolating least squares at step `eta` and applies the
/// contraction test; `mu_eta` is always the certified `μ·(μ/L²)`.
fn linear_regime(eta: f64) -> (LinearCheck, Schedule, Vec<Trace>) {
    let (obj, _) = Objective::interpolating_least_squares(50, 100, INTERP_SEED).unwrap();
    let pl = obj.pl().unwrap().clone();
    let sm = *obj.smoothness();
    let sched = Schedule::constant(eta, &pl, &sm).unwrap();
    let horizon = 2_000;
    let cfg = RunConfig::new(horizon, 0).with_checkpoints(CheckpointPolicy::every_step(horizon));
    let traces = run_seeds(&obj, &sched, &cfg, &seeds(10)).unwrap();
    let mu_eta = pl.mu * pl.mu / sm.lipschitz.powi(2);
    let contraction = (1.0 - mu_eta).ln();
    let slope_bound = contraction + contraction.abs() * 0.25;
    let step_bound = 1.0 - mu_eta + 0.05;
    let diverged = traces.iter().filter(|t| t.diverged).count();
    let check = match AggregateTrace::from_traces(&traces) {
        Ok(agg) if diverged == 0 => {
            let sub: Vec<(f64, f64)> = agg
                .checkpoints
                .iter()
                .map(|c| (c.t as f64, c.mean_risk - pl.optimum_value))
                .collect();
            let fit = fit_log_linear(&sub, (1.0, horizon as f64)).unwrap();
            let worst = sub
                .windows(2)
                .map(|w| w[1].1 / w[0].1)
                .fold(f64::NEG_INFINITY, f64::max);
            LinearCheck {
                slope: fit.slope,
                slope_bound,
                worst_step_ratio: worst,
                step_bound,
                diverged,
            }
        }
        _ => LinearCheck {
            slope: f64::INFINITY,
            slope_bound,
            worst_step_ratio: f64::INFINITY,
            step_bound,
            diverged,
        },
    };
    (check, sched, traces)
}

// 5. Linear convergence with zero variance at the optimum.
fn c5_linear() -> Outcome {
    let (obj, _) = Objective::interpolating_least_squares(50, 100, INTERP_SEED).unwrap();
    let eta = obj.pl().unwrap().mu / obj.smoothness().lipschitz.powi(2);
    let start = Instant::now();
    let (check, sched, _) = linear_regime(eta);
    let elapsed = start.elapsed();
    outcome(
        check.pass() && sched.theorem_valid && elapsed <= Duration::from_secs(60),
        format!(
            "slope {:.4e} ≤ {:.4e}, worst step ratio {:.6} ≤ {:.6}, {:.1?}",
            check.slope, check.slope_bound, check.worst_step_ratio, check.step_bound, elapsed
        ),
    )
}

// 6. Tail oscillation per seed in the runs of 3 and 4.
fn c6_almost_sure(nc: &NonconvexRun, pl: &PlRun) -> Outcome {
    let final_risk = nc.agg.checkpoints.last().unwrap().mean_risk;
    let nc_report = as_convergence_check(
        &nc.traces,
        &ConvergenceCriteria {
            tail_fraction: TAIL_FRACTION,
            eps_risk: 1e-2 * final_risk,
            eps_grad: None,
        },
    )
    .unwrap();
    let last = pl.agg.checkpoints.last().unwrap();
    let pl_report = as_convergence_check(
        &pl.traces,
        &ConvergenceCriteria {
            tail_fraction: TAIL_FRACTION,
            eps_risk: 10.0 * (last.mean_risk - pl.optimum),
            eps_grad: Some(10.0 * last.min_prefix_grad_norm_sq),
        },
    )
    .unwrap();
    outcome(
        nc_report.n_pass >= 19 && pl_report.n_pass >= 19,
        format!(
            "nonconvex {}/20, PL {}/20",
            nc_report.n_pass, pl_report.n_pass
        ),
    )
}

// 7. Linear-kernel functional SGD reproduces parametric SGD.
fn c7_kernel_equivalence() -> Outcome {
    let data = dataset(10);
    let obj = Objective::least_squares(data.clone()).unwrap();
    let sched = Schedule::polynomial(1.0 / obj.smoothness().lipschitz, 0.75, 1.0).unwrap();
    let horizon = 1_000;
    let cfg = RunConfig::new(horizon, 11).with_checkpoints(CheckpointPolicy::every_step(horizon));

    let mut param_preds = Vec::new();
    let param = run_observed(&obj, &sched, &cfg, |_, w| {
        param_preds.push(
            data.samples()
                .iter()
                .map(|z| z.x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>())
                .collect::<Vec<f64>>(),
        )
    })
    .unwrap();
    let mut kernel_preds = Vec::new();
    let kern = run_kernel_observed(
        &data,
        Kernel::Linear,
        &LossFamily::LeastSquares,
        &sched,
        &cfg,
        |_, p| kernel_preds.push(p.to_vec()),
    )
    .unwrap();

    let pred_err = param_preds
        .iter()
        .zip(&kernel_preds)
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max);
    let grad_err = param
        .checkpoints
        .iter()
        .zip(&kern.checkpoints)
        .map(|(a, b)| {
            (a.grad_norm_sq - b.grad_norm_sq).abs() / a.grad_norm_sq.max(f64::MIN_POSITIVE)
        })
        .fold(0.0, f64::max);
    let complete = param_preds.len() == horizon as usize && kernel_preds.len() == horizon as usize;
    outcome(
        complete && pred_err <= 1e-10 && grad_err <= 1e-10,
        format!("max |Δprediction| {pred_err:.3e}, max relative Δ‖∇E‖² {grad_err:.3e}"),
    )
}

// 8. Invalid constant step is flagged and fails; flags match on a (θ, α) grid.
fn c8_validity() -> Outcome {
    let (obj, _) = Objective::interpolating_least_squares(50, 100, INTERP_SEED).unwrap();
    let eta = 4.0 / obj.smoothness().lipschitz;
    let (check, sched, traces) = linear_regime(eta);
    let diverged = traces.iter().filter(|t| t.diverged).count();
    let guard_ok = !sched.theorem_valid && (diverged > 0 || !check.pass());

    let mut mismatches = 0;
    let mut cells = 0;
    for i in 0..10 {
        for j in 0..10 {
            let theta = 0.05 + 0.09 * i as f64;
            let alpha = 0.1 + 0.1 * j as f64;
            let s = Schedule::polynomial(1.0, theta, alpha).unwrap();
            let rep = summability_report(&s, alpha, 100);
            let expected_conv = theta * (1.0 + alpha) > 1.0;
            cells += 1;
            if rep.flags.sum_eta_power_convergent != expected_conv
                || !rep.flags.sum_eta_divergent
                || s.theorem_valid != expected_conv
            {
                mismatches += 1;
            }
        }
    }
    outcome(
        guard_ok && mismatches == 0 && cells == 100,
        format!(
            "eta = 4/L flagged invalid: {}, diverged seeds {diverged}/10; flag mismatches {mismatches}/{cells}",
            !sched.theorem_valid
        ),
    )
}

// 9. Reruns give byte-identical trace CSVs.
fn c9_determinism(nc: &NonconvexRun, pl: &PlRun) -> Outcome {
    let obj = Objective::welsch(dataset(10), 1.0).unwrap();
    let cfg = RunConfig::new(HORIZON, 0).with_checkpoints(experiment_grid());
    let again = run_seeds(&obj, &nc.sched, &cfg, &seeds(20)).unwrap();
    let nc_same = nc
        .traces
        .iter()
        .zip(&again)
        .all(|(a, b)| csv_bytes(a) == csv_bytes(b));

    let pl_obj = Objective::least_squares(dataset(3)).unwrap();
    let (pl_sched, _) = Schedule::pl_matched(pl_obj.pl().unwrap().mu, pl_obj.smoothness()).unwrap();
    let pl_again = run(&pl_obj, &pl_sched, &cfg.with_seed(pl.traces[0].seed)).unwrap();
    let pl_same = csv_bytes(&pl_again) == csv_bytes(&pl.traces[0]);

    let (.., lin_a) = linear_regime(1e-5);
    let (.., lin_b) = linear_regime(1e-5);
    let lin_same = lin_a
        .iter()
        .zip(&lin_b)
        .all(|(a, b)| csv_bytes(a) == csv_bytes(b));
    outcome(
        nc_same && pl_same && lin_same,
        format!("nonconvex {nc_same}, PL {pl_same}, interpolating {lin_same}"),
    )
}

fn main() {
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    results.push((
        "C1 Hölder / descent / self-bounding property suite",
        c1_property_suite(),
    ));
    results.push(("C2 gradient vs central differences", c2_gradient_oracle()));

    let start = Instant::now();
    let nc = nonconvex_run();
    let nc_elapsed = start.elapsed();
    results.push((
        "C3 bound form min_prefix·Ση_t (welsch, poly θ=0.75)",
        c3_bound_form(&nc, nc_elapsed),
    ));

    let start = Instant::now();
    let pl = pl_run();
    let pl_elapsed = start.elapsed();
    results.push((
        "C4 O(1/t) rate under PL-matched steps",
        c4_pl_rate(&pl, pl_elapsed),
    ));
    results.push(("C5 linear rate, zero variance, η = μ/L²", c5_linear()));
    results.push(("C6 tail oscillation per seed", c6_almost_sure(&nc, &pl)));
    results.push(("C7 linear kernel ≡ parametric SGD", c7_kernel_equivalence()));
    results.push((
        "C8 invalid constant step and summability flags",
        c8_validity(),
    ));
    results.push(("C9 byte-identical reruns", c9_determinism(&nc, &pl)));

    let mut failed = 0;
    for (name, o) in &results {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        if !o.pass {
            failed += 1;
        }
        println!("[{tag}] {name}: {}", o.detail);
    }
    println!(
        "acceptance: {}/{} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
