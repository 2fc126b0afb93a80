use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use holder_sgd::analysis::{
    bound_ratio_check, check_holder, check_self_bounding, check_smooth_a, estimate_pl, fit_rate,
    gradient_check, BoundRatioReport, GradCheckReport, ProbeSettings, RateFit, ViolationReport,
};
use holder_sgd::engine::run_seeds;
use holder_sgd::kernel::{run_kernel_seeds, Kernel};
use holder_sgd::rng::GENERATOR_NAME;
use holder_sgd::trace::AggregateJson;
use holder_sgd::{AggregateTrace, Error, PLScheduleCert, PLSpec, Schedule, SmoothnessSpec, Trace};

use crate::config::{parse_seeds, Experiment, ExperimentConfig};
use crate::{Axis, Metric};

const FAILURE: u8 = 1;

/// Contents of `meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    /// Effective config with every default filled in.
    pub config: ExperimentConfig,
    pub generator: String,
    pub version: String,
    pub smoothness: SmoothnessSpec,
    pub pl: Option<PLSpec>,
    pub pl_schedule: Option<PLScheduleCert>,
    pub schedule: Schedule,
    pub kernel: Option<Kernel>,
    pub diverged_seeds: Vec<u64>,
}

fn base_dir(config_path: &Path) -> PathBuf {
    config_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default()
}

fn load(config_path: &Path, seeds: Option<&str>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(config_path)?;
    if let Some(s) = seeds {
        cfg.seeds = parse_seeds(s)?;
    }
    Ok(cfg)
}

fn out_dir(cfg: &ExperimentConfig, config_path: &Path, out: Option<&Path>) -> PathBuf {
    match out {
        Some(p) => p.to_path_buf(),
        None => base_dir(config_path).join(&cfg.output_dir),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn run_traces(ex: &Experiment) -> Result<Vec<Trace>> {
    let cfg = ex.config.run_config();
    let seeds = &ex.config.seeds;
    let traces = match ex.kernel {
        Some(k) => run_kernel_seeds(
            &ex.data,
            k,
            &ex.objective.family(),
            &ex.schedule,
            &cfg,
            seeds,
        )?,
        None => run_seeds(&ex.objective, &ex.schedule, &cfg, seeds)?,
    };
    Ok(traces)
}

/// Runs one experiment into `dir`. Returns the aggregate, or `None` when
/// every seed diverged.
fn execute(ex: &Experiment, dir: &Path) -> Result<Option<AggregateTrace>> {
    let traces = run_traces(ex)?;
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    for tr in &traces {
        let path = dir.join(format!("trace_seed{}.csv", tr.seed));
        let file =
            fs::File::create(&path).with_context(|| format!("cannot write {}", path.display()))?;
        tr.write_csv(std::io::BufWriter::new(file))?;
    }
    let agg = match AggregateTrace::from_traces(&traces) {
        Ok(a) => Some(a),
        Err(Error::AllSeedsDiverged(_)) => None,
        Err(e) => return Err(e.into()),
    };
    if let Some(a) = &agg {
        write_json(&dir.join("aggregate.json"), &a.to_json())?;
    }
    let meta = Meta {
        config: ex.config.clone(),
        generator: GENERATOR_NAME.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        smoothness: ex.smoothness,
        pl: if ex.kernel.is_none() {
            ex.objective.pl().cloned()
        } else {
            None
        },
        pl_schedule: ex.pl_schedule,
        schedule: ex.schedule.clone(),
        kernel: ex.kernel,
        diverged_seeds: traces
            .iter()
            .filter(|t| t.diverged)
            .map(|t| t.seed)
            .collect(),
    };
    write_json(&dir.join("meta.json"), &meta)?;
    Ok(agg)
}

pub fn run(config_path: &Path, out: Option<&Path>, seeds: Option<&str>) -> Result<ExitCode> {
    let cfg = load(config_path, seeds)?;
    let ex = cfg.resolve(&base_dir(config_path))?;
    for w in &ex.schedule.warnings {
        eprintln!("warning: {w}");
    }
    let dir = out_dir(&cfg, config_path, out);
    match execute(&ex, &dir)? {
        Some(agg) => {
            if !agg.diverged_seeds.is_empty() {
                eprintln!("warning: diverged seeds excluded: {:?}", agg.diverged_seeds);
            }
            Ok(ExitCode::SUCCESS)
        }
        None => {
            eprintln!("every seed diverged; no aggregate written");
            Ok(ExitCode::from(FAILURE))
        }
    }
}

#[derive(Debug, Serialize)]
struct SweepCell {
    cell: String,
    params: std::collections::BTreeMap<String, f64>,
    n_seeds: usize,
    diverged_seeds: Vec<u64>,
    final_min_prefix: Option<f64>,
}

pub fn sweep(config_path: &Path, out: Option<&Path>, seeds: Option<&str>) -> Result<ExitCode> {
    let cfg = load(config_path, seeds)?;
    if cfg.sweep.is_empty() {
        anyhow::bail!("sweep: config has no [sweep] table");
    }
    let dir = out_dir(&cfg, config_path, out);
    let base = base_dir(config_path);
    let mut cells = Vec::new();
    for (k, (params, cell_cfg)) in cfg.sweep_cells()?.into_iter().enumerate() {
        let name = format!("cell_{k:03}");
        let ex = cell_cfg
            .resolve(&base)
            .with_context(|| format!("sweep cell {name} {params:?}"))?;
        let agg = execute(&ex, &dir.join(&name))?;
        cells.push(SweepCell {
            cell: name,
            params,
            n_seeds: agg.as_ref().map_or(0, |a| a.n_seeds),
            diverged_seeds: agg
                .as_ref()
                .map_or_else(|| ex.config.seeds.clone(), |a| a.diverged_seeds.clone()),
            final_min_prefix: agg
                .as_ref()
                .and_then(|a| a.checkpoints.last())
                .map(|c| c.min_prefix_grad_norm_sq),
        });
    }
    write_json(&dir.join("sweep.json"), &cells)?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Serialize)]
struct GradientSection {
    #[serde(flatten)]
    report: GradCheckReport,
    tol: f64,
    passed: bool,
}

#[derive(Debug, Serialize)]
struct PlSection {
    skipped: bool,
    note: Option<String>,
    mu: Option<f64>,
    mu_hat: Option<f64>,
    passed: bool,
}

#[derive(Debug, Serialize)]
struct VerifyReport {
    objective: &'static str,
    smoothness: SmoothnessSpec,
    checks: Vec<ViolationReport>,
    gradient: GradientSection,
    pl: PlSection,
    passed: bool,
}

pub fn verify(config_path: &Path, out: Option<&Path>) -> Result<ExitCode> {
    let cfg = load(config_path, None)?;
    if cfg.kernel.is_some() {
        anyhow::bail!(
            "kernel: verify probes parametric objectives only; remove the [kernel] table"
        );
    }
    let ex = cfg.resolve(&base_dir(config_path))?;
    let tol = &ex.config.tolerances;
    let obj = &ex.objective;
    let settings = ProbeSettings {
        n_probes: tol.n_probes,
        radius: tol.probe_radius,
        tol: tol.inequality_tol,
        seed: tol.probe_seed,
    };
    let checks = vec![
        check_holder(obj, &settings),
        check_smooth_a(obj, &settings),
        check_self_bounding(obj, &settings),
    ];

    let report = gradient_check(
        obj,
        tol.fd_points,
        tol.probe_radius,
        tol.fd_h_rel,
        tol.probe_seed,
    )?;
    let gradient = GradientSection {
        passed: report.max_rel_error <= tol.fd_tol,
        report,
        tol: tol.fd_tol,
    };

    let pl = match obj.pl() {
        None => PlSection {
            skipped: true,
            note: Some("objective has no PL certificate".into()),
            mu: None,
            mu_hat: None,
            passed: true,
        },
        Some(spec) => match estimate_pl(obj, tol.pl_probes, tol.probe_radius, tol.probe_seed) {
            Ok(mu_hat) => PlSection {
                skipped: false,
                note: None,
                mu: Some(spec.mu),
                mu_hat: Some(mu_hat),
                passed: spec.mu <= mu_hat * (1.0 + tol.inequality_tol),
            },
            Err(Error::EstimationUndefined) => PlSection {
                skipped: true,
                note: Some("every probe was at the optimum value".into()),
                mu: Some(spec.mu),
                mu_hat: None,
                passed: true,
            },
            Err(e) => return Err(e.into()),
        },
    };

    let passed = checks.iter().all(ViolationReport::passed) && gradient.passed && pl.passed;
    let report = VerifyReport {
        objective: obj.family().name(),
        smoothness: *obj.smoothness(),
        checks,
        gradient,
        pl,
        passed,
    };
    let dir = out_dir(&cfg, config_path, out);
    fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    write_json(&dir.join("verify.json"), &report)?;

    if passed {
        return Ok(ExitCode::SUCCESS);
    }
    for c in report.checks.iter().filter(|c| !c.passed()) {
        eprintln!(
            "{}: {} of {} probes violate; worst ratio {:e} at {}",
            c.check_name, c.n_violations, c.n_probes, c.worst_ratio, c.worst_probe
        );
    }
    if !report.gradient.passed {
        eprintln!(
            "gradient: relative error {:e} > {:e} (|w| = {:e})",
            report.gradient.report.max_rel_error,
            report.gradient.tol,
            report.gradient.report.worst_point_norm
        );
    }
    if !report.pl.passed {
        eprintln!(
            "pl: certified mu {:e} exceeds probed estimate {:e}",
            report.pl.mu.unwrap_or(f64::NAN),
            report.pl.mu_hat.unwrap_or(f64::NAN)
        );
    }
    Ok(ExitCode::from(FAILURE))
}

#[derive(Debug, Serialize)]
struct FitReport {
    metric: Metric,
    axis: Axis,
    window: (u64, u64),
    fit: RateFit,
    bound_ratio: Option<BoundRatioReport>,
}

fn read_meta(aggregate_path: &Path) -> Result<Option<Meta>> {
    let path = aggregate_path.with_file_name("meta.json");
    if !path.exists() {
        return Ok(None);
    }
    let text =
        fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))?;
    let meta =
        serde_json::from_str(&text).with_context(|| format!("invalid {}", path.display()))?;
    Ok(Some(meta))
}

pub fn fit(
    aggregate_path: &Path,
    window: Option<(u64, u64)>,
    axis: Axis,
    metric: Metric,
) -> Result<ExitCode> {
    let text = fs::read_to_string(aggregate_path)
        .with_context(|| format!("cannot read aggregate {}", aggregate_path.display()))?;
    let json: AggregateJson = serde_json::from_str(&text)
        .with_context(|| format!("invalid aggregate {}", aggregate_path.display()))?;
    let agg = AggregateTrace::from_json(&json)?;
    let meta = read_meta(aggregate_path)?;
    let window = window.unwrap_or((1, agg.checkpoints.last().map_or(1, |c| c.t)));

    let optimum = match metric {
        Metric::ExcessRisk => Some(
            meta.as_ref()
                .and_then(|m| m.pl.as_ref())
                .map(|p| p.optimum_value)
                .context("--metric excess_risk needs a meta.json with a PL certificate next to the aggregate")?,
        ),
        _ => None,
    };
    let schedule = meta.as_ref().map(|m| m.schedule.clone());
    if axis == Axis::EtaSum && schedule.is_none() {
        anyhow::bail!("--axis eta_sum needs meta.json next to the aggregate");
    }

    let inside: Vec<_> = agg
        .checkpoints
        .iter()
        .filter(|c| c.t >= window.0 && c.t <= window.1)
        .collect();
    let ts: Vec<u64> = inside.iter().map(|c| c.t).collect();
    let xs: Vec<f64> = match (&schedule, axis) {
        (Some(s), Axis::EtaSum) => s.partial_sums_at(&ts),
        _ => ts.iter().map(|&t| t as f64).collect(),
    };
    let points: Vec<(f64, f64)> = inside
        .iter()
        .zip(xs)
        .map(|(c, x)| {
            let y = match metric {
                Metric::MinPrefix => c.min_prefix_grad_norm_sq,
                Metric::MeanGradNormSq => c.mean_grad_norm_sq,
                Metric::MeanRisk => c.mean_risk,
                Metric::ExcessRisk => c.mean_risk - optimum.unwrap_or(0.0),
            };
            (x, y)
        })
        .collect();

    let x_range = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.0), hi.max(p.0))
        });
    let fit = match fit_rate(&points, x_range) {
        Ok(f) => f,
        Err(e @ (Error::InsufficientPoints { .. } | Error::NonPositiveValue { .. })) => {
            eprintln!("fit failed: {e}");
            return Ok(ExitCode::from(FAILURE));
        }
        Err(e) => return Err(e.into()),
    };
    let bound_ratio = schedule.and_then(|s| bound_ratio_check(&agg, &s, window).ok());
    let report = FitReport {
        metric,
        axis,
        window,
        fit,
        bound_ratio,
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(ExitCode::SUCCESS)
}
