//! TOML experiment configuration and its resolution against the objective's
//! certificates. The resolved form has every default filled in and is what
//! gets echoed to `meta.json`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use holder_sgd::analysis::PROBE_SEED;
use holder_sgd::data::{load_dataset, synthetic, SyntheticSpec};
use holder_sgd::engine::{CheckpointPolicy, RunConfig, DEFAULT_DIVERGENCE_FACTOR};
use holder_sgd::kernel::{kernel_smoothness, Kernel};
use holder_sgd::{
    Dataset, Objective, PLScheduleCert, PLSpec, Provenance, Schedule, SmoothnessSpec,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub horizon: u64,
    pub seeds: Vec<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_checkpoints")]
    pub checkpoints: CheckpointPolicy,
    #[serde(default = "default_divergence_factor")]
    pub divergence_factor: f64,
    pub objective: ObjectiveConfig,
    pub schedule: ScheduleConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelConfig>,
    #[serde(default)]
    pub tolerances: ToleranceConfig,
    /// Schedule parameter name → values; `sweep` runs the cartesian product.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub sweep: BTreeMap<String, Vec<f64>>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_checkpoints() -> CheckpointPolicy {
    CheckpointPolicy::Geometric2
}

fn default_divergence_factor() -> f64 {
    DEFAULT_DIVERGENCE_FACTOR
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    LeastSquares,
    Welsch,
    HolderP,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveConfig {
    pub family: FamilyName,
    /// Welsch scale; defaults to 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    /// Hölder exponent of the `holder_p` loss.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Replaces the certified smoothness constant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz_override: Option<f64>,
    pub data: DataConfig,
}

/// Exactly one source must be given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// CSV with header `x_1,…,x_d,y`; relative paths are taken from the
    /// config file's directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSpec>,
    /// Noiseless least squares with standard normal inputs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interpolating: Option<InterpolatingSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterpolatingSpec {
    pub n: usize,
    pub d: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleName {
    Polynomial,
    LogCorrected,
    PlMatched,
    Constant,
}

/// Unset parameters default from the certificates: `eta1 = 1/L`,
/// `mu` from the PL certificate, `eta = μ/L²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub kind: ScheduleName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
}

pub const SCHEDULE_PARAMS: [&str; 5] = ["eta1", "theta", "beta", "mu", "eta"];

impl ScheduleConfig {
    fn slot(&mut self, name: &str) -> Option<&mut Option<f64>> {
        match name {
            "eta1" => Some(&mut self.eta1),
            "theta" => Some(&mut self.theta),
            "beta" => Some(&mut self.beta),
            "mu" => Some(&mut self.mu),
            "eta" => Some(&mut self.eta),
            _ => None,
        }
    }

    fn used(&self) -> &'static [&'static str] {
        match self.kind {
            ScheduleName::Polynomial => &["eta1", "theta"],
            ScheduleName::LogCorrected => &["eta1", "beta"],
            ScheduleName::PlMatched => &["mu"],
            ScheduleName::Constant => &["eta"],
        }
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        match self.slot(name) {
            Some(s) => {
                *s = Some(value);
                Ok(())
            }
            None => {
                bail!("unknown schedule parameter `{name}` (expected one of {SCHEDULE_PARAMS:?})")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelName {
    Linear,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub kind: KernelName,
    /// Gaussian bandwidth; defaults to the median pairwise distance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceConfig {
    pub n_probes: usize,
    pub probe_radius: f64,
    pub inequality_tol: f64,
    pub probe_seed: u64,
    pub fd_points: usize,
    pub fd_h_rel: f64,
    pub fd_tol: f64,
    pub pl_probes: usize,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            n_probes: 10_000,
            probe_radius: 10.0,
            inequality_tol: 1e-8,
            probe_seed: PROBE_SEED,
            fd_points: 100,
            fd_h_rel: 1e-5,
            fd_tol: 1e-5,
            pl_probes: 1_000,
        }
    }
}

/// Everything needed to run an experiment, built from a resolved config.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub data: Dataset,
    pub objective: Objective,
    /// Certificate used for step sizes; the kernel one in kernel mode.
    pub smoothness: SmoothnessSpec,
    pub kernel: Option<Kernel>,
    pub schedule: Schedule,
    pub pl_schedule: Option<PLScheduleCert>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    fn validate(&self) -> Result<()> {
        if self.horizon < 1 {
            bail!("horizon: must be at least 1");
        }
        if self.seeds.is_empty() {
            bail!("seeds: need at least one seed");
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            bail!("seeds: seed {} appears more than once", w[0]);
        }
        if !(self.divergence_factor > 1.0) {
            bail!(
                "divergence_factor: {} must exceed 1",
                self.divergence_factor
            );
        }
        let d = &self.objective.data;
        let sources = [
            d.path.is_some(),
            d.synthetic.is_some(),
            d.interpolating.is_some(),
        ];
        if sources.iter().filter(|&&b| b).count() != 1 {
            bail!("objective.data: give exactly one of `path`, `synthetic`, `interpolating`");
        }
        if d.interpolating.is_some() && self.objective.family != FamilyName::LeastSquares {
            bail!("objective.data.interpolating: only valid with family = \"least_squares\"");
        }
        match self.objective.family {
            FamilyName::LeastSquares => {
                if self.objective.c.is_some() || self.objective.alpha.is_some() {
                    bail!("objective: least_squares takes no `c` or `alpha`");
                }
            }
            FamilyName::Welsch => {
                if self.objective.alpha.is_some() {
                    bail!("objective.alpha: not used by welsch");
                }
            }
            FamilyName::HolderP => {
                if self.objective.alpha.is_none() {
                    bail!("objective.alpha: required for holder_p");
                }
                if self.objective.c.is_some() {
                    bail!("objective.c: not used by holder_p");
                }
            }
        }
        let used = self.schedule.used();
        let mut sched = self.schedule.clone();
        for name in SCHEDULE_PARAMS {
            let set = sched.slot(name).map(|s| s.is_some()).unwrap_or(false);
            if set && !used.contains(&name) {
                bail!("schedule.{name}: not used by this schedule kind");
            }
        }
        for (name, values) in &self.sweep {
            if !SCHEDULE_PARAMS.contains(&name.as_str()) {
                bail!("sweep.{name}: unknown schedule parameter (expected one of {SCHEDULE_PARAMS:?})");
            }
            if !used.contains(&name.as_str()) {
                bail!("sweep.{name}: not used by this schedule kind");
            }
            if values.is_empty() {
                bail!("sweep.{name}: empty value list");
            }
        }
        if let Some(k) = &self.kernel {
            if k.kind == KernelName::Linear && k.sigma.is_some() {
                bail!("kernel.sigma: not used by the linear kernel");
            }
        }
        Ok(())
    }

    pub fn run_config(&self) -> RunConfig {
        RunConfig {
            horizon: self.horizon,
            seed: self.seeds[0],
            checkpoints: self.checkpoints.clone(),
            divergence_factor: self.divergence_factor,
        }
    }

    /// Copies of this config with one point of the sweep grid applied, in
    /// row-major order over the sorted parameter names.
    pub fn sweep_cells(&self) -> Result<Vec<(BTreeMap<String, f64>, ExperimentConfig)>> {
        let mut cells = vec![BTreeMap::new()];
        for (name, values) in &self.sweep {
            cells = cells
                .into_iter()
                .flat_map(|cell| {
                    values.iter().map(move |&v| {
                        let mut c = cell.clone();
                        c.insert(name.clone(), v);
                        c
                    })
                })
                .collect();
        }
        cells
            .into_iter()
            .map(|params| {
                let mut cfg = self.clone();
                cfg.sweep.clear();
                for (name, &v) in &params {
                    cfg.schedule.set(name, v)?;
                }
                Ok((params, cfg))
            })
            .collect()
    }

    /// Loads the data, builds the objective and schedule, and fills in every
    /// default. `base_dir` anchors relative data paths.
    pub fn resolve(&self, base_dir: &Path) -> Result<Experiment> {
        self.validate()?;
        let mut cfg = self.clone();
        let oc = &mut cfg.objective;

        let (data, objective) = if let Some(path) = &oc.data.path {
            let full = base_dir.join(path);
            let data = load_dataset(&full).with_context(|| {
                format!(
                    "objective.data.path: cannot load dataset {}",
                    full.display()
                )
            })?;
            (data.clone(), build_objective(oc, data)?)
        } else if let Some(spec) = &oc.data.synthetic {
            let data = synthetic(spec).context("objective.data.synthetic")?.data;
            (data.clone(), build_objective(oc, data)?)
        } else {
            let spec = oc.data.interpolating.expect("validated source");
            let (obj, _) = Objective::interpolating_least_squares(spec.n, spec.d, spec.seed)
                .context("objective.data.interpolating")?;
            (obj.dataset().clone(), obj)
        };
        let objective = match oc.lipschitz_override {
            Some(l) => {
                let sm = SmoothnessSpec::new(
                    objective.smoothness().alpha,
                    l,
                    Provenance::NumericEstimate,
                )
                .context("objective.lipschitz_override")?;
                objective.with_smoothness(sm)
            }
            None => objective,
        };

        let kernel = match &mut cfg.kernel {
            None => None,
            Some(kc) => Some(match kc.kind {
                KernelName::Linear => Kernel::Linear,
                KernelName::Gaussian => {
                    let k = match kc.sigma {
                        Some(s) => Kernel::gaussian(s).context("kernel.sigma")?,
                        None => Kernel::gaussian_median_heuristic(&data).context("kernel.sigma")?,
                    };
                    if let Kernel::Gaussian { sigma } = k {
                        kc.sigma = Some(sigma);
                    }
                    k
                }
            }),
        };
        let (smoothness, pl) = match kernel {
            None => (*objective.smoothness(), objective.pl().cloned()),
            Some(k) => {
                let sm = kernel_smoothness(&data, k, &objective.family()).context("kernel")?;
                let sm = match cfg.objective.lipschitz_override {
                    Some(l) => SmoothnessSpec::new(sm.alpha, l, Provenance::NumericEstimate)?,
                    None => sm,
                };
                (sm, None)
            }
        };
        let (schedule, pl_schedule) = build_schedule(&mut cfg.schedule, &smoothness, pl.as_ref())?;

        Ok(Experiment {
            config: cfg,
            data,
            objective,
            smoothness,
            kernel,
            schedule,
            pl_schedule,
        })
    }
}

fn build_objective(oc: &mut ObjectiveConfig, data: Dataset) -> Result<Objective> {
    Ok(match oc.family {
        FamilyName::LeastSquares => Objective::least_squares(data).context("objective")?,
        FamilyName::Welsch => {
            let c = *oc.c.get_or_insert(1.0);
            Objective::welsch(data, c).context("objective.c")?
        }
        FamilyName::HolderP => {
            let alpha = oc.alpha.expect("validated alpha");
            Objective::holder_p(data, alpha).context("objective.alpha")?
        }
    })
}

fn build_schedule(
    sc: &mut ScheduleConfig,
    sm: &SmoothnessSpec,
    pl: Option<&PLSpec>,
) -> Result<(Schedule, Option<PLScheduleCert>)> {
    let inv_l = 1.0 / sm.lipschitz;
    Ok(match sc.kind {
        ScheduleName::Polynomial => {
            let eta1 = *sc.eta1.get_or_insert(inv_l);
            let theta = sc
                .theta
                .context("schedule.theta: required for polynomial")?;
            (
                Schedule::polynomial(eta1, theta, sm.alpha).context("schedule")?,
                None,
            )
        }
        ScheduleName::LogCorrected => {
            let eta1 = *sc.eta1.get_or_insert(inv_l);
            let beta = sc
                .beta
                .context("schedule.beta: required for log_corrected")?;
            (
                Schedule::log_corrected(eta1, beta, sm.alpha).context("schedule")?,
                None,
            )
        }
        ScheduleName::PlMatched => {
            let mu = match (sc.mu, pl) {
                (Some(mu), _) => mu,
                (None, Some(p)) => p.mu,
                (None, None) => {
                    bail!("schedule.mu: required when the objective has no PL certificate")
                }
            };
            sc.mu = Some(mu);
            let (s, cert) = Schedule::pl_matched(mu, sm).context("schedule.mu")?;
            (s, Some(cert))
        }
        ScheduleName::Constant => {
            let s = match (sc.eta, pl) {
                (eta, Some(p)) => {
                    let eta = eta.unwrap_or(p.mu / sm.lipschitz.powi(2));
                    sc.eta = Some(eta);
                    Schedule::constant(eta, p, sm)
                }
                (Some(eta), None) => Schedule::constant_unchecked(eta, sm.alpha),
                (None, None) => {
                    bail!("schedule.eta: required when the objective has no PL certificate")
                }
            };
            (s.context("schedule.eta")?, None)
        }
    })
}

/// Parses `--seeds`: `a..b` (inclusive) or a comma-separated list.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().context("--seeds: bad range start")?;
        let b: u64 = b.trim().parse().context("--seeds: bad range end")?;
        if b < a {
            bail!("--seeds: empty range {s}");
        }
        return Ok((a..=b).collect());
    }
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<u64>()
                .with_context(|| format!("--seeds: bad seed `{p}`"))
        })
        .collect()
}
