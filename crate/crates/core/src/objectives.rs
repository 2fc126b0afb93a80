//! Finite-population objectives `E(w) = (1/n) Σᵢ ℓ(⟨w, xᵢ⟩, yᵢ)` with
//! certified smoothness and, for least squares, a PL certificate.
//!
//! All losses are written through the residual `u = ⟨w, x⟩ − y`, so the
//! per-sample gradient is `ψ'(u)·x`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::data::{synthetic, SyntheticSpec};
use crate::error::{invalid, Error, Result};
use crate::types::{dot, Dataset, PLSpec, ParamVector, Provenance, Sample, SmoothnessSpec};

/// Scalar loss family `ψ(u)` with `u = prediction − y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum LossFamily {
    /// `ψ(u) = u²/2`
    LeastSquares,
    /// `ψ(u) = 1 − exp(−u²/(2c²))`
    Welsch { c: f64 },
    /// `ψ(u) = |u|^{1+α}/(1+α)`
    HolderP { alpha: f64 },
}

impl LossFamily {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LossFamily::LeastSquares => Ok(()),
            LossFamily::Welsch { c } if c > 0.0 && c.is_finite() => Ok(()),
            LossFamily::Welsch { c } => Err(invalid("c", format!("{c} must be positive"))),
            LossFamily::HolderP { alpha } if alpha > 0.0 && alpha <= 1.0 => Ok(()),
            LossFamily::HolderP { alpha } => {
                Err(invalid("alpha_loss", format!("{alpha} not in (0, 1]")))
            }
        }
    }

    pub fn value(&self, u: f64) -> f64 {
        match *self {
            LossFamily::LeastSquares => 0.5 * u * u,
            LossFamily::Welsch { c } => -(-u * u / (2.0 * c * c)).exp_m1(),
            LossFamily::HolderP { alpha } => u.abs().powf(1.0 + alpha) / (1.0 + alpha),
        }
    }

    /// `ψ'(u)`; zero at `u = 0` for every family.
    pub fn derivative(&self, u: f64) -> f64 {
        match *self {
            LossFamily::LeastSquares => u,
            LossFamily::Welsch { c } => u / (c * c) * (-u * u / (2.0 * c * c)).exp(),
            LossFamily::HolderP { alpha } => {
                if u == 0.0 {
                    0.0
                } else {
                    u.abs().powf(alpha).copysign(u)
                }
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LossFamily::LeastSquares => "least_squares",
            LossFamily::Welsch { .. } => "welsch",
            LossFamily::HolderP { .. } => "holder_p",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Objective {
    dataset: Dataset,
    family: LossFamily,
    smoothness: SmoothnessSpec,
    pl: Option<PLSpec>,
    zero_variance_at_optimum: bool,
}

impl Objective {
    pub fn least_squares(data: Dataset) -> Result<Self> {
        let smoothness = SmoothnessSpec::new(1.0, data.max_sq_norm(), Provenance::Analytic)
            .map_err(|_| Error::NoPlCertificate)?;
        let (mu, w_star) = least_norm_solution(&data)?;
        let mut obj = Self {
            dataset: data,
            family: LossFamily::LeastSquares,
            smoothness,
            pl: None,
            zero_variance_at_optimum: false,
        };
        let optimum_value = obj.value_unchecked(&w_star);
        obj.pl = Some(PLSpec::new(
            mu,
            optimum_value,
            Some(w_star),
            Provenance::NumericEstimate,
        )?);
        Ok(obj)
    }

    /// Zero-variance least squares: `yᵢ = ⟨w°, xᵢ⟩` exactly, with standard
    /// normal inputs and a random unit-norm planted model `w°`.
    pub fn interpolating_least_squares(
        n: usize,
        d: usize,
        seed: u64,
    ) -> Result<(Self, ParamVector)> {
        let syn = synthetic(&SyntheticSpec {
            n,
            d,
            seed,
            planted: true,
            noise: 0.0,
            normalize: false,
        })?;
        let planted = syn.planted.expect("planted model requested");
        let mut obj = Self::least_squares(syn.data)?;
        let pl = obj.pl.as_mut().expect("least squares has a PL certificate");
        pl.optimum_value = 0.0;
        obj.zero_variance_at_optimum = true;
        Ok((obj, planted))
    }

    pub fn welsch(data: Dataset, c: f64) -> Result<Self> {
        let family = LossFamily::Welsch { c };
        family.validate()?;
        let l = data.max_sq_norm() / (c * c);
        let smoothness =
            SmoothnessSpec::new(1.0, l, Provenance::Analytic).map_err(|_| zero_design())?;
        Ok(Self {
            dataset: data,
            family,
            smoothness,
            pl: None,
            zero_variance_at_optimum: false,
        })
    }

    pub fn holder_p(data: Dataset, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(invalid("alpha_loss", format!("{alpha} not in (0, 1)")));
        }
        let max_norm = data.max_sq_norm().sqrt();
        let l = 2f64.powf(1.0 - alpha) * max_norm.powf(1.0 + alpha);
        let smoothness = SmoothnessSpec::new(alpha, l, Provenance::NumericEstimate)
            .map_err(|_| zero_design())?;
        Ok(Self {
            dataset: data,
            family: LossFamily::HolderP { alpha },
            smoothness,
            pl: None,
            zero_variance_at_optimum: false,
        })
    }

    /// Same objective with a replaced smoothness certificate.
    pub fn with_smoothness(mut self, smoothness: SmoothnessSpec) -> Self {
        self.smoothness = smoothness;
        self
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn family(&self) -> LossFamily {
        self.family
    }

    pub fn smoothness(&self) -> &SmoothnessSpec {
        &self.smoothness
    }

    pub fn pl(&self) -> Option<&PLSpec> {
        self.pl.as_ref()
    }

    pub fn zero_variance_at_optimum(&self) -> bool {
        self.zero_variance_at_optimum
    }

    pub fn dim(&self) -> usize {
        self.dataset.dim()
    }

    pub fn n(&self) -> usize {
        self.dataset.len()
    }

    #[inline]
    pub(crate) fn residual(&self, w: &[f64], z: &Sample) -> f64 {
        dot(w, &z.x) - z.y
    }

    pub fn sample_loss(&self, w: &ParamVector, z: &Sample) -> Result<f64> {
        w.check_dim(self.dim())?;
        if z.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: z.dim(),
            });
        }
        Ok(self.family.value(self.residual(w, z)))
    }

    pub fn sample_grad(&self, w: &ParamVector, z: &Sample) -> Result<ParamVector> {
        self.sample_loss(w, z)?;
        Ok(self.sample_grad_unchecked(w, z))
    }

    pub(crate) fn sample_grad_unchecked(&self, w: &[f64], z: &Sample) -> ParamVector {
        let s = self.family.derivative(self.residual(w, z));
        ParamVector::new(z.x.iter().map(|x| s * x).collect())
    }

    pub fn population_value(&self, w: &ParamVector) -> Result<f64> {
        w.check_dim(self.dim())?;
        Ok(self.value_unchecked(w))
    }

    pub fn population_grad(&self, w: &ParamVector) -> Result<ParamVector> {
        w.check_dim(self.dim())?;
        Ok(self.grad_unchecked(w))
    }

    pub(crate) fn value_unchecked(&self, w: &[f64]) -> f64 {
        let total: f64 = self
            .dataset
            .samples()
            .iter()
            .map(|z| self.family.value(self.residual(w, z)))
            .sum();
        total / self.n() as f64
    }

    pub(crate) fn grad_unchecked(&self, w: &[f64]) -> ParamVector {
        let mut g = vec![0.0; self.dim()];
        for z in self.dataset.samples() {
            let s = self.family.derivative(self.residual(w, z));
            for (gj, xj) in g.iter_mut().zip(&z.x) {
                *gj += s * xj;
            }
        }
        let n = self.n() as f64;
        g.iter_mut().for_each(|v| *v /= n);
        ParamVector::new(g)
    }

    /// `(E(w), ‖∇E(w)‖²)` in one pass over the data.
    pub(crate) fn value_and_grad_norm_sq(&self, w: &[f64]) -> (f64, f64) {
        let mut g = vec![0.0; self.dim()];
        let mut total = 0.0;
        for z in self.dataset.samples() {
            let u = self.residual(w, z);
            total += self.family.value(u);
            let s = self.family.derivative(u);
            for (gj, xj) in g.iter_mut().zip(&z.x) {
                *gj += s * xj;
            }
        }
        let n = self.n() as f64;
        let gn: f64 = g.iter().map(|v| (v / n) * (v / n)).sum();
        (total / n, gn)
    }
}

fn zero_design() -> Error {
    Error::InvalidDataset("all inputs are zero; no finite smoothness certificate".into())
}

/// Smallest nonzero eigenvalue of `(1/n) Σ xᵢxᵢᵀ` and the least-norm
/// least-squares solution, from one symmetric eigendecomposition.
fn least_norm_solution(data: &Dataset) -> Result<(f64, ParamVector)> {
    let n = data.len();
    let d = data.dim();
    let x = DMatrix::from_fn(n, d, |i, j| data.samples()[i].x[j]);
    let y = DVector::from_iterator(n, data.samples().iter().map(|s| s.y));
    let cov = x.transpose() * &x / n as f64;
    let rhs = x.transpose() * y / n as f64;
    let eig = SymmetricEigen::new(cov);
    let max_eig = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    if max_eig <= 0.0 {
        return Err(Error::NoPlCertificate);
    }
    let cutoff = max_eig * 1e-10 * d.max(n) as f64;
    let mut mu = f64::INFINITY;
    let mut w = DVector::zeros(d);
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > cutoff {
            mu = mu.min(lambda);
            let v = eig.eigenvectors.column(k);
            w += v * (v.dot(&rhs) / lambda);
        }
    }
    Ok((mu, ParamVector::new(w.iter().copied().collect())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SyntheticSpec;
    use crate::rng::{chacha, uniform_in_ball, Stream};
    use approx::assert_relative_eq;

    fn one_sample(x: f64, y: f64) -> Dataset {
        Dataset::new(vec![Sample::new(vec![x], y)]).unwrap()
    }

    fn noisy(n: usize, d: usize) -> Dataset {
        synthetic(&SyntheticSpec {
            n,
            d,
            seed: 4,
            planted: true,
            noise: 0.3,
            normalize: false,
        })
        .unwrap()
        .data
    }

    #[test]
    fn least_squares_scalar() {
        let obj = Objective::least_squares(one_sample(1.0, 0.0)).unwrap();
        let pl = obj.pl().unwrap();
        assert_relative_eq!(pl.mu, 1.0, max_relative = 1e-14);
        assert_eq!(obj.smoothness().lipschitz, 1.0);
        assert_eq!(pl.optimum_point.as_ref().unwrap().as_slice(), &[0.0]);
        for w in [-3.0, 0.5, 2.0] {
            let p = ParamVector::new(vec![w]);
            assert_relative_eq!(obj.population_value(&p).unwrap(), w * w / 2.0);
            assert_relative_eq!(obj.population_grad(&p).unwrap()[0], w);
        }
    }

    #[test]
    fn least_squares_gradient_vanishes_at_optimum() {
        let obj = Objective::least_squares(noisy(30, 5)).unwrap();
        let w_star = obj.pl().unwrap().optimum_point.clone().unwrap();
        assert!(obj.population_grad(&w_star).unwrap().norm() < 1e-10);
    }

    #[test]
    fn least_squares_pl_probe() {
        let obj = Objective::least_squares(noisy(40, 6)).unwrap();
        let pl = obj.pl().unwrap();
        let mut rng = chacha(17, Stream::Probes);
        for _ in 0..1000 {
            let w = ParamVector::new(uniform_in_ball(&mut rng, 6, 10.0));
            let gap = obj.population_value(&w).unwrap() - pl.optimum_value;
            let g2 = obj.population_grad(&w).unwrap().norm_sq();
            assert!(gap >= -1e-12);
            assert!(gap <= g2 / (2.0 * pl.mu) * (1.0 + 1e-9) + 1e-12);
        }
    }

    #[test]
    fn all_zero_design_has_no_certificate() {
        let data = Dataset::new(vec![Sample::new(vec![0.0, 0.0], 1.0)]).unwrap();
        assert!(matches!(
            Objective::least_squares(data),
            Err(Error::NoPlCertificate)
        ));
    }

    #[test]
    fn interpolating_optimum() {
        let (obj, planted) = Objective::interpolating_least_squares(5, 10, 7).unwrap();
        assert!(obj.zero_variance_at_optimum());
        let pl = obj.pl().unwrap();
        assert_eq!(pl.optimum_value, 0.0);
        let w_star = pl.optimum_point.clone().unwrap();
        for z in obj.dataset().samples() {
            assert!(obj.sample_grad(&w_star, z).unwrap().norm() <= 1e-8);
        }
        assert!(obj.population_value(&w_star).unwrap() < 1e-20);
        assert!(obj.population_value(&planted).unwrap() < 1e-25);
        assert!(obj.population_grad(&planted).unwrap().norm() < 1e-12);
        // least-norm interpolant is shorter than the planted model when d > n
        assert!(w_star.norm() <= planted.norm());
    }

    #[test]
    fn welsch_scalar() {
        let obj = Objective::welsch(one_sample(1.0, 0.0), 1.0).unwrap();
        let w = ParamVector::new(vec![1.0]);
        let f = obj.population_value(&w).unwrap();
        let g = obj.population_grad(&w).unwrap()[0];
        assert_relative_eq!(f, 0.393_469_340_287_366_6, max_relative = 1e-14);
        assert_relative_eq!(g, 0.606_530_659_712_633_4, max_relative = 1e-14);
        let fd = (obj
            .population_value(&ParamVector::new(vec![1.0 + 1e-6]))
            .unwrap()
            - obj
                .population_value(&ParamVector::new(vec![1.0 - 1e-6]))
                .unwrap())
            / 2e-6;
        assert_relative_eq!(fd, g, max_relative = 1e-8);
        let zero = ParamVector::new(vec![0.0]);
        assert_eq!(obj.population_value(&zero).unwrap(), 0.0);
        assert_eq!(obj.population_grad(&zero).unwrap()[0], 0.0);
        assert!(Objective::welsch(one_sample(1.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn holder_p_scalar() {
        let obj = Objective::holder_p(one_sample(1.0, 0.0), 0.5).unwrap();
        let w = ParamVector::new(vec![4.0]);
        assert_relative_eq!(
            obj.population_value(&w).unwrap(),
            16.0 / 3.0,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            obj.population_grad(&w).unwrap()[0],
            2.0,
            max_relative = 1e-14
        );
        let fd = (obj
            .population_value(&ParamVector::new(vec![4.0 + 1e-6]))
            .unwrap()
            - obj
                .population_value(&ParamVector::new(vec![4.0 - 1e-6]))
                .unwrap())
            / 2e-6;
        assert_relative_eq!(fd, 2.0, max_relative = 1e-8);
        let zero = ParamVector::new(vec![0.0]);
        assert_eq!(obj.population_grad(&zero).unwrap()[0], 0.0);
        assert!(Objective::holder_p(one_sample(1.0, 0.0), 1.0).is_err());
        assert!(Objective::holder_p(one_sample(1.0, 0.0), 0.0).is_err());
        assert_eq!(obj.smoothness().provenance, Provenance::NumericEstimate);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let obj = Objective::least_squares(noisy(10, 3)).unwrap();
        let w = ParamVector::new(vec![0.0; 2]);
        assert!(matches!(
            obj.population_value(&w),
            Err(Error::DimensionMismatch {
                expected: 3,
                got: 2
            })
        ));
        assert!(obj.population_grad(&w).is_err());
    }

    #[test]
    fn single_sample_population_equals_sample_loss() {
        let data = one_sample(2.0, 1.0);
        let obj = Objective::welsch(data.clone(), 1.0).unwrap();
        let w = ParamVector::new(vec![0.3]);
        assert_eq!(
            obj.population_value(&w).unwrap(),
            obj.sample_loss(&w, &data.samples()[0]).unwrap()
        );
    }

    #[test]
    fn welsch_gradient_zero_when_all_residuals_zero() {
        let data = Dataset::new(vec![
            Sample::new(vec![1.0, 0.0], 2.0),
            Sample::new(vec![0.0, 1.0], -1.0),
        ])
        .unwrap();
        let obj = Objective::welsch(data, 1.0).unwrap();
        let g = obj
            .population_grad(&ParamVector::new(vec![2.0, -1.0]))
            .unwrap();
        assert_eq!(g.as_slice(), &[0.0, 0.0]);
    }
}
