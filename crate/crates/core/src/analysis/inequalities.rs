//! Brute-force probes of the Hölder-gradient condition, the descent
//! inequality and the self-bounding inequality at an objective's certificate.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::objectives::Objective;
use crate::rng::{chacha, uniform_in_ball, unit_direction, Stream};
use crate::types::{dot, norm_sq, ParamVector};

/// Default probe seed for every property suite.
pub const PROBE_SEED: u64 = 20_191_105;

/// Absolute slack, in units of the magnitude of the terms being compared,
/// for floating-point rounding in the evaluated sides.
pub const ROUNDING_SLACK: f64 = 64.0 * f64::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeSettings {
    pub n_probes: usize,
    pub radius: f64,
    /// Relative tolerance on the right-hand side.
    pub tol: f64,
    pub seed: u64,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        Self {
            n_probes: 10_000,
            radius: 10.0,
            tol: 1e-8,
            seed: PROBE_SEED,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub relative: f64,
    pub rounding: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub check_name: String,
    pub n_probes: usize,
    pub n_violations: usize,
    /// Largest `lhs / rhs` seen.
    pub worst_ratio: f64,
    pub worst_probe: String,
    pub seed: u64,
    pub tolerances: Tolerances,
}

impl ViolationReport {
    pub fn passed(&self) -> bool {
        self.n_violations == 0
    }
}

/// Two sides of an inequality `lhs ≤ rhs`, plus the magnitude of the terms
/// that were combined to produce them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sides {
    pub lhs: f64,
    pub rhs: f64,
    pub scale: f64,
}

impl Sides {
    pub fn violated(&self, tol: f64) -> bool {
        !(self.lhs <= (1.0 + tol) * self.rhs + ROUNDING_SLACK * self.scale)
    }

    pub fn ratio(&self) -> f64 {
        if self.rhs > 0.0 {
            self.lhs / self.rhs
        } else if self.lhs > ROUNDING_SLACK * self.scale {
            f64::INFINITY
        } else {
            0.0
        }
    }
}

/// `‖g(w) − g(w̃)‖ ≤ L‖w − w̃‖^α`
pub fn holder_sides(g_w: &[f64], g_wt: &[f64], dist: f64, alpha: f64, lipschitz: f64) -> Sides {
    let diff: f64 = g_w
        .iter()
        .zip(g_wt)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Sides {
        lhs: diff,
        rhs: lipschitz * dist.powf(alpha),
        scale: norm_sq(g_w).sqrt() + norm_sq(g_wt).sqrt(),
    }
}

/// `φ(w̃) − φ(w) − ⟨w̃ − w, ∇φ(w)⟩ ≤ L/(1+α)‖w − w̃‖^{1+α}`
pub fn descent_sides(
    phi_w: f64,
    phi_wt: f64,
    inner: f64,
    dist: f64,
    alpha: f64,
    lipschitz: f64,
) -> Sides {
    Sides {
        lhs: phi_wt - phi_w - inner,
        rhs: lipschitz / (1.0 + alpha) * dist.powf(1.0 + alpha),
        scale: phi_w.abs() + phi_wt.abs() + inner.abs(),
    }
}

/// `‖∇φ(w)‖^{(1+α)/α} ≤ ((1+α) L^{1/α} / α) φ(w)`
pub fn self_bounding_sides(grad_norm: f64, phi: f64, alpha: f64, lipschitz: f64) -> Sides {
    let lhs = grad_norm.powf((1.0 + alpha) / alpha);
    let rhs = (1.0 + alpha) * lipschitz.powf(1.0 / alpha) / alpha * phi;
    Sides {
        lhs,
        rhs,
        scale: lhs + rhs.abs(),
    }
}

struct Tally {
    name: String,
    settings: ProbeSettings,
    n: usize,
    violations: usize,
    worst: f64,
    worst_probe: String,
}

impl Tally {
    fn new(name: &str, settings: &ProbeSettings) -> Self {
        Self {
            name: name.to_string(),
            settings: *settings,
            n: 0,
            violations: 0,
            worst: 0.0,
            worst_probe: String::new(),
        }
    }

    fn record(&mut self, sides: Sides, describe: impl FnOnce() -> String) {
        self.n += 1;
        if sides.violated(self.settings.tol) {
            self.violations += 1;
        }
        let r = sides.ratio();
        if r > self.worst || self.worst_probe.is_empty() {
            self.worst = self.worst.max(r);
            self.worst_probe = format!(
                "{}; lhs = {:e}, rhs = {:e}",
                describe(),
                sides.lhs,
                sides.rhs
            );
        }
    }

    fn finish(self) -> ViolationReport {
        ViolationReport {
            check_name: self.name,
            n_probes: self.n,
            n_violations: self.violations,
            worst_ratio: self.worst,
            worst_probe: self.worst_probe,
            seed: self.settings.seed,
            tolerances: Tolerances {
                relative: self.settings.tol,
                rounding: ROUNDING_SLACK,
            },
        }
    }
}

/// Probe pairs `(w, w̃)` in the ball. They cycle through three shapes: both
/// points uniform in the ball; `w̃` a short random-direction hop from `w`; and
/// `w̃` a short hop along the input `x` of the probed sample, which is the
/// direction where per-sample gradients change fastest. Hop lengths are
/// log-uniform in `[10⁻³, 1]·radius`.
fn probe_pair<R: Rng>(
    rng: &mut R,
    k: usize,
    d: usize,
    radius: f64,
    x: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let w = uniform_in_ball(rng, d, radius);
    let dir = match k % 3 {
        0 => return (w, uniform_in_ball(rng, d, radius)),
        1 => unit_direction(rng, d),
        _ => {
            let nx = norm_sq(x).sqrt();
            if nx > 0.0 {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                x.iter().map(|v| sign * v / nx).collect()
            } else {
                unit_direction(rng, d)
            }
        }
    };
    let hop = radius * 10f64.powf(-3.0 * rng.random::<f64>());
    let mut wt: Vec<f64> = w.iter().zip(&dir).map(|(a, b)| a + hop * b).collect();
    let norm = norm_sq(&wt).sqrt();
    if norm > radius {
        wt.iter_mut().for_each(|v| *v *= radius / norm);
    }
    (w, wt)
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn check_holder(obj: &Objective, settings: &ProbeSettings) -> ViolationReport {
    let mut rng = chacha(settings.seed, Stream::Probes);
    let sm = obj.smoothness();
    let samples = obj.dataset().samples();
    let mut tally = Tally::new("holder", settings);
    for k in 0..settings.n_probes {
        let i = rng.random_range(0..samples.len());
        let z = &samples[i];
        let (w, wt) = probe_pair(&mut rng, k, obj.dim(), settings.radius, &z.x);
        let g = obj.sample_grad_unchecked(&w, z);
        let gt = obj.sample_grad_unchecked(&wt, z);
        let dist = distance(&w, &wt);
        let sides = holder_sides(&g, &gt, dist, sm.alpha, sm.lipschitz);
        tally.record(sides, || format!("sample {i}, |w - w~| = {dist:e}"));
    }
    tally.finish()
}

/// Descent inequality for a random sample loss and for `E` at every pair.
pub fn check_smooth_a(obj: &Objective, settings: &ProbeSettings) -> ViolationReport {
    let mut rng = chacha(settings.seed, Stream::Probes);
    let sm = obj.smoothness();
    let samples = obj.dataset().samples();
    let fam = obj.family();
    let mut tally = Tally::new("smooth_a", settings);
    for k in 0..settings.n_probes {
        let i = rng.random_range(0..samples.len());
        let z = &samples[i];
        let (w, wt) = probe_pair(&mut rng, k, obj.dim(), settings.radius, &z.x);
        let delta: Vec<f64> = wt.iter().zip(&w).map(|(a, b)| a - b).collect();
        let dist = norm_sq(&delta).sqrt();

        let g = obj.sample_grad_unchecked(&w, z);
        let sides = descent_sides(
            fam.value(obj.residual(&w, z)),
            fam.value(obj.residual(&wt, z)),
            dot(&delta, &g),
            dist,
            sm.alpha,
            sm.lipschitz,
        );
        tally.record(sides, || format!("sample {i}, |w - w~| = {dist:e}"));

        let gp = obj.grad_unchecked(&w);
        let sides = descent_sides(
            obj.value_unchecked(&w),
            obj.value_unchecked(&wt),
            dot(&delta, &gp),
            dist,
            sm.alpha,
            sm.lipschitz,
        );
        tally.record(sides, || format!("population, |w - w~| = {dist:e}"));
    }
    tally.finish()
}

/// Self-bounding inequality for a random sample loss and for `E` at every probe.
pub fn check_self_bounding(obj: &Objective, settings: &ProbeSettings) -> ViolationReport {
    let mut rng = chacha(settings.seed, Stream::Probes);
    let sm = obj.smoothness();
    let samples = obj.dataset().samples();
    let fam = obj.family();
    let mut tally = Tally::new("self_bounding", settings);
    for _ in 0..settings.n_probes {
        let i = rng.random_range(0..samples.len());
        let z = &samples[i];
        let w = uniform_in_ball(&mut rng, obj.dim(), settings.radius);
        let u = obj.residual(&w, z);
        let g = obj.sample_grad_unchecked(&w, z);
        let sides = self_bounding_sides(g.norm(), fam.value(u), sm.alpha, sm.lipschitz);
        tally.record(sides, || format!("sample {i}, residual {u:e}"));

        let gp = obj.grad_unchecked(&w);
        let sides = self_bounding_sides(gp.norm(), obj.value_unchecked(&w), sm.alpha, sm.lipschitz);
        tally.record(sides, || {
            format!("population, |w| = {:e}", norm_sq(&w).sqrt())
        });
    }
    tally.finish()
}

/// Probe points drawn the same way the checks draw them.
pub fn ball_probes(d: usize, n: usize, radius: f64, seed: u64) -> Vec<ParamVector> {
    let mut rng = chacha(seed, Stream::Probes);
    (0..n)
        .map(|_| ParamVector::new(uniform_in_ball(&mut rng, d, radius)))
        .collect()
}
