use nalgebra::DVector;
use rand::Rng;

use super::Distribution;
use crate::{Error, Result};

/// Continuous uniform on `[lower, upper]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Uniform {
    lower: f64,
    upper: f64,
}

impl Uniform {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower < upper) || !lower.is_finite() || !upper.is_finite() {
            return Err(Error::InvalidParameter(format!("uniform needs lower < upper, got [{lower}, {upper}]")));
        }
        Ok(Self { lower, upper })
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }
}

impl Distribution for Uniform {
    type Value = f64;

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.lower + (self.upper - self.lower) * rng.random::<f64>()
    }

    fn log_density(&self, x: &f64) -> f64 {
        if *x >= self.lower && *x <= self.upper {
            -(self.upper - self.lower).ln()
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// Uniform on the axis-aligned box `[lower, upper]`.
#[derive(Clone, Debug, PartialEq)]
pub struct UniformBox {
    lower: DVector<f64>,
    upper: DVector<f64>,
}

impl UniformBox {
    pub fn new(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                found: upper.len(),
            });
        }
        if lower.iter().zip(upper.iter()).any(|(l, u)| !(l < u) || !l.is_finite() || !u.is_finite()) {
            return Err(Error::InvalidParameter("uniform box needs lower < upper in every coordinate".into()));
        }
        Ok(Self { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &DVector<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &DVector<f64> {
        &self.upper
    }

    pub fn log_volume(&self) -> f64 {
        self.lower.iter().zip(self.upper.iter()).map(|(l, u)| (u - l).ln()).sum()
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        x.len() == self.dim() && (0..self.dim()).all(|i| x[i] >= self.lower[i] && x[i] <= self.upper[i])
    }
}

impl Distribution for UniformBox {
    type Value = DVector<f64>;

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        DVector::from_fn(self.dim(), |i, _| self.lower[i] + (self.upper[i] - self.lower[i]) * rng.random::<f64>())
    }

    fn log_density(&self, x: &DVector<f64>) -> f64 {
        if self.contains(x) {
            -self.log_volume()
        } else {
            f64::NEG_INFINITY
        }
    }
}
