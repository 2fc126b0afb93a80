//! Domain types shared by every module: samples, datasets, iterates and the
//! smoothness / PL certificates attached to objectives.

use serde::{Deserialize, Serialize};
use std::ops::Deref;

use crate::error::{invalid, Error, Result};

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

/// One example `z = (x, y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: f64,
}

impl Sample {
    pub fn new(x: Vec<f64>, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

/// A finite sample, read as the uniform sampling measure over its rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::InvalidDataset("dataset needs at least one sample".into()))?;
        let d = first.dim();
        if d == 0 {
            return Err(Error::InvalidDimension(0));
        }
        for (i, s) in samples.iter().enumerate() {
            if s.dim() != d {
                return Err(Error::InvalidDataset(format!(
                    "sample {i} has dimension {}, expected {d}",
                    s.dim()
                )));
            }
            if !s.y.is_finite() || s.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidDataset(format!(
                    "sample {i} has a non-finite component"
                )));
            }
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples[0].dim()
    }

    pub fn max_sq_norm(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| norm_sq(&s.x))
            .fold(0.0, f64::max)
    }
}

/// A dense parameter vector `w`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(coords: Vec<f64>) -> Self {
        Self(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm_sq(&self) -> f64 {
        norm_sq(&self.0)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dot(&self, other: &ParamVector) -> f64 {
        dot(&self.0, &other.0)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// `self - other`.
    pub fn sub(&self, other: &ParamVector) -> ParamVector {
        ParamVector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub(crate) fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: self.dim(),
            });
        }
        Ok(())
    }
}

impl Deref for ParamVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// The SGD starting point `w₁ = 0`.
pub fn zero_param(d: usize) -> Result<ParamVector> {
    if d < 1 {
        return Err(Error::InvalidDimension(d));
    }
    Ok(ParamVector(vec![0.0; d]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Analytic,
    NumericEstimate,
}

/// Hölder-gradient certificate: `‖∇f(w,z) − ∇f(w̃,z)‖ ≤ L‖w − w̃‖^α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessSpec {
    pub alpha: f64,
    #[serde(rename = "L")]
    pub lipschitz: f64,
    pub provenance: Provenance,
}

impl SmoothnessSpec {
    pub fn new(alpha: f64, lipschitz: f64, provenance: Provenance) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(invalid("alpha", format!("{alpha} not in (0, 1]")));
        }
        if !(lipschitz > 0.0 && lipschitz.is_finite()) {
            return Err(invalid(
                "L",
                format!("{lipschitz} must be positive and finite"),
            ));
        }
        Ok(Self {
            alpha,
            lipschitz,
            provenance,
        })
    }
}

/// Polyak-Łojasiewicz certificate `E(w) − E* ≤ ‖∇E(w)‖² / (2μ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PLSpec {
    pub mu: f64,
    pub optimum_value: f64,
    /// `None` when the minimizer is not known explicitly.
    pub optimum_point: Option<ParamVector>,
    pub provenance: Provenance,
}

impl PLSpec {
    pub fn new(
        mu: f64,
        optimum_value: f64,
        optimum_point: Option<ParamVector>,
        provenance: Provenance,
    ) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(invalid("mu", format!("{mu} must be positive and finite")));
        }
        if !optimum_value.is_finite() {
            return Err(invalid("optimum_value", "must be finite"));
        }
        Ok(Self {
            mu,
            optimum_value,
            optimum_point,
            provenance,
        })
    }
}
