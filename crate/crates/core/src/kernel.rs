//! Functional SGD in a reproducing kernel Hilbert space.
//!
//! The iterate `w = Σᵢ aᵢ K(cᵢ, ·)` is stored as a representer expansion that
//! grows by one term per step. A run keeps predictions at the `n` data points
//! in a cache, updated in `O(n)` per step from the data Gram matrix, so a
//! checkpoint costs one `O(n²)` double sum for `‖∇E(w)‖²`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::RunConfig;
use crate::error::{invalid, Error, Result};
use crate::objectives::LossFamily;
use crate::rng::IndexStream;
use crate::schedules::Schedule;
use crate::trace::{Checkpoint, Iterate, Trace};
use crate::types::{dot, Dataset, Provenance, Sample, SmoothnessSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Kernel {
    /// `K(x, x') = ⟨x, x'⟩`
    Linear,
    /// `K(x, x') = exp(−‖x − x'‖² / (2σ²))`
    Gaussian { sigma: f64 },
}

impl Kernel {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(invalid("sigma", format!("{sigma} must be positive")));
        }
        Ok(Kernel::Gaussian { sigma })
    }

    /// Gaussian kernel with the median pairwise distance as bandwidth.
    pub fn gaussian_median_heuristic(data: &Dataset) -> Result<Self> {
        Self::gaussian(median_pairwise_distance(data))
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => dot(a, b),
            Kernel::Gaussian { sigma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-d2 / (2.0 * sigma * sigma)).exp()
            }
        }
    }

    pub fn gram(&self, points: &[&[f64]]) -> Vec<Vec<f64>> {
        points
            .par_iter()
            .map(|a| points.iter().map(|b| self.eval(a, b)).collect())
            .collect()
    }
}

/// Smoothness certificate of `w ↦ ψ(w(x) − y)` in the RKHS, with
/// `κ² = maxᵢ K(xᵢ, xᵢ)` playing the role of `max ‖x‖²`.
pub fn kernel_smoothness(
    data: &Dataset,
    kernel: Kernel,
    loss: &LossFamily,
) -> Result<SmoothnessSpec> {
    loss.validate()?;
    let kappa_sq = data
        .samples()
        .iter()
        .map(|s| kernel.eval(&s.x, &s.x))
        .fold(0.0, f64::max);
    let (alpha, l, provenance) = match *loss {
        LossFamily::LeastSquares => (1.0, kappa_sq, Provenance::Analytic),
        LossFamily::Welsch { c } => (1.0, kappa_sq / (c * c), Provenance::Analytic),
        LossFamily::HolderP { alpha } => (
            alpha,
            2f64.powf(1.0 - alpha) * kappa_sq.sqrt().powf(1.0 + alpha),
            Provenance::NumericEstimate,
        ),
    };
    SmoothnessSpec::new(alpha, l, provenance)
}

pub fn median_pairwise_distance(data: &Dataset) -> f64 {
    let s = data.samples();
    let mut dists: Vec<f64> = (0..s.len())
        .flat_map(|i| {
            (i + 1..s.len()).map(move |j| {
                s[i].x
                    .iter()
                    .zip(&s[j].x)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
        })
        .collect();
    if dists.is_empty() {
        return 1.0;
    }
    dists.sort_by(f64::total_cmp);
    let m = dists.len();
    if m % 2 == 1 {
        dists[m / 2]
    } else {
        0.5 * (dists[m / 2 - 1] + dists[m / 2])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepresenterState {
    centers: Vec<Vec<f64>>,
    coeffs: Vec<f64>,
    kernel: Kernel,
}

impl RepresenterState {
    /// `w₁ = 0`.
    pub fn empty(kernel: Kernel) -> Self {
        Self {
            centers: Vec::new(),
            coeffs: Vec::new(),
            kernel,
        }
    }

    pub fn from_parts(centers: Vec<Vec<f64>>, coeffs: Vec<f64>, kernel: Kernel) -> Result<Self> {
        if centers.len() != coeffs.len() {
            return Err(invalid("coeffs", "one coefficient per center"));
        }
        if let Some(d) = centers.first().map(Vec::len) {
            if let Some(c) = centers.iter().find(|c| c.len() != d) {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: c.len(),
                });
            }
        }
        Ok(Self {
            centers,
            coeffs,
            kernel,
        })
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        match self.centers.first() {
            Some(c) if c.len() != x.len() => Err(Error::DimensionMismatch {
                expected: c.len(),
                got: x.len(),
            }),
            _ => Ok(()),
        }
    }

    /// `w(x) = Σᵢ aᵢ K(cᵢ, x)`.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        Ok(self.predict_unchecked(x))
    }

    fn predict_unchecked(&self, x: &[f64]) -> f64 {
        self.centers
            .iter()
            .zip(&self.coeffs)
            .map(|(c, a)| a * self.kernel.eval(c, x))
            .sum()
    }

    fn push(&mut self, center: Vec<f64>, coeff: f64) {
        self.centers.push(center);
        self.coeffs.push(coeff);
    }
}

/// One functional SGD step on sample `z`: appends `(x, −η ℓ'(w(x), y))`.
pub fn kernel_sgd_step(
    state: &RepresenterState,
    z: &Sample,
    eta: f64,
    loss: &LossFamily,
) -> Result<RepresenterState> {
    if !(eta > 0.0) {
        return Err(invalid("eta", format!("{eta} must be positive")));
    }
    let u = state.predict(&z.x)? - z.y;
    let mut next = state.clone();
    next.push(z.x.clone(), -eta * loss.derivative(u));
    Ok(next)
}

fn clamp_rounding(v: f64) -> f64 {
    if (-1e-12..0.0).contains(&v) {
        0.0
    } else {
        v
    }
}

/// `‖w‖²_K = aᵀ G a`.
pub fn rkhs_norm_sq(state: &RepresenterState) -> f64 {
    let c = &state.centers;
    let a = &state.coeffs;
    let total: f64 = (0..c.len())
        .into_par_iter()
        .map(|i| {
            a[i] * (0..c.len())
                .map(|j| a[j] * state.kernel.eval(&c[i], &c[j]))
                .sum::<f64>()
        })
        .sum();
    clamp_rounding(total)
}

/// `‖∇E(w)‖²_K = (1/n²) Σᵢⱼ gᵢ gⱼ K(xᵢ, xⱼ)` with `gᵢ = ℓ'(w(xᵢ), yᵢ)`.
pub fn rkhs_grad_norm_sq(
    state: &RepresenterState,
    data: &Dataset,
    loss: &LossFamily,
) -> Result<f64> {
    let g = data
        .samples()
        .iter()
        .map(|s| Ok(loss.derivative(state.predict(&s.x)? - s.y)))
        .collect::<Result<Vec<f64>>>()?;
    let xs: Vec<&[f64]> = data.samples().iter().map(|s| s.x.as_slice()).collect();
    let n = xs.len() as f64;
    let total: f64 = (0..xs.len())
        .into_par_iter()
        .map(|i| {
            g[i] * (0..xs.len())
                .map(|j| g[j] * state.kernel.eval(xs[i], xs[j]))
                .sum::<f64>()
        })
        .sum();
    Ok(clamp_rounding(total / (n * n)))
}

/// Functional SGD over `data`; same index stream and checkpoint rules as the
/// parametric engine. `observe(checkpoint, predictions)` receives the cached
/// predictions `w_t(xᵢ)` at every recorded checkpoint.
pub fn run_kernel_observed<F>(
    data: &Dataset,
    kernel: Kernel,
    loss: &LossFamily,
    sched: &Schedule,
    cfg: &RunConfig,
    mut observe: F,
) -> Result<Trace>
where
    F: FnMut(&Checkpoint, &[f64]),
{
    cfg.validate()?;
    loss.validate()?;
    let samples = data.samples();
    let n = samples.len();
    let xs: Vec<&[f64]> = samples.iter().map(|s| s.x.as_slice()).collect();
    let gram = kernel.gram(&xs);
    let times = cfg.checkpoints.times(cfg.horizon);

    let mut state = RepresenterState::empty(kernel);
    let mut preds = vec![0.0; n];
    let mut stream = IndexStream::new(cfg.seed, n);
    let nf = n as f64;

    let risk_of = |preds: &[f64]| -> f64 {
        preds
            .iter()
            .zip(samples)
            .map(|(p, s)| loss.value(p - s.y))
            .sum::<f64>()
            / nf
    };
    let threshold = cfg.divergence_threshold(risk_of(&preds));

    let mut checkpoints = Vec::with_capacity(times.len());
    let mut next = times.iter().peekable();
    let mut diverged = false;

    for t in 1..=cfg.horizon {
        let eta = sched.eta(t);
        if next.peek() == Some(&&t) {
            next.next();
            let risk = risk_of(&preds);
            let g: Vec<f64> = preds
                .iter()
                .zip(samples)
                .map(|(p, s)| loss.derivative(p - s.y))
                .collect();
            let quad: f64 = gram.iter().zip(&g).map(|(row, gi)| gi * dot(row, &g)).sum();
            let cp = Checkpoint {
                t,
                risk,
                grad_norm_sq: clamp_rounding(quad / (nf * nf)),
                eta,
            };
            checkpoints.push(cp);
            if !risk.is_finite() || risk > threshold {
                diverged = true;
                break;
            }
            observe(&cp, &preds);
        }

        let i = stream.next_index();
        let coeff = -eta * loss.derivative(preds[i] - samples[i].y);
        state.push(samples[i].x.clone(), coeff);
        for (p, k) in preds.iter_mut().zip(&gram[i]) {
            *p += coeff * k;
        }
        if !coeff.is_finite() {
            diverged = true;
            break;
        }
    }

    Ok(Trace {
        seed: cfg.seed,
        checkpoints,
        diverged,
        final_iterate: Iterate::Representer(state),
    })
}

pub fn run_kernel(
    data: &Dataset,
    kernel: Kernel,
    loss: &LossFamily,
    sched: &Schedule,
    cfg: &RunConfig,
) -> Result<Trace> {
    run_kernel_observed(data, kernel, loss, sched, cfg, |_, _| {})
}

pub fn run_kernel_seeds(
    data: &Dataset,
    kernel: Kernel,
    loss: &LossFamily,
    sched: &Schedule,
    cfg_base: &RunConfig,
    seeds: &[u64],
) -> Result<Vec<Trace>> {
    crate::engine::check_seeds(seeds)?;
    seeds
        .par_iter()
        .map(|&seed| run_kernel(data, kernel, loss, sched, &cfg_base.with_seed(seed)))
        .collect()
}
