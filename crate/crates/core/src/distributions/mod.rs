//! Primitive distributions with simulation and density evaluation.
//!
//! Gaussians are parameterized by variance (or covariance). Every sampler
//! takes an explicit random stream; nothing here holds global state.

mod discrete;
mod gaussian;
pub mod special;
mod uniform;

use nalgebra::DVector;
use rand::Rng;

pub use discrete::{Bernoulli, Categorical, Poisson};
pub use gaussian::{cholesky, symmetrize, Gaussian1D, GaussianND};
pub(crate) use gaussian::{check_symmetric, log_density_chol};
pub use special::{
    log_mean_exp, log_poisson_pmf, log_rising_factorial, log_sum_exp, normalize_log_weights, poisson_cdf,
    poisson_pmf,
};
pub use uniform::{Uniform, UniformBox};

use crate::{Error, Result};

pub trait Distribution {
    type Value;

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::Value;

    /// Log density (or log mass); `-inf` outside the support.
    fn log_density(&self, value: &Self::Value) -> f64;
}

/// A realized value of any supported distribution.
#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Real(f64),
    Integer(i64),
    Boolean(bool),
    Vector(DVector<f64>),
}

impl Value {
    /// View as a real vector. Scalars and integers become length-one vectors.
    pub fn to_vector(&self) -> DVector<f64> {
        match self {
            Value::Real(x) => DVector::from_element(1, *x),
            Value::Integer(k) => DVector::from_element(1, *k as f64),
            Value::Boolean(b) => DVector::from_element(1, if *b { 1.0 } else { 0.0 }),
            Value::Vector(v) => v.clone(),
        }
    }

    pub fn as_real(&self) -> Option<f64> {
        match self {
            Value::Real(x) => Some(*x),
            Value::Integer(k) => Some(*k as f64),
            Value::Vector(v) if v.len() == 1 => Some(v[0]),
            _ => None,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Value::Vector(v) => v.len(),
            _ => 1,
        }
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Real(x)
    }
}

impl From<DVector<f64>> for Value {
    fn from(v: DVector<f64>) -> Self {
        Value::Vector(v)
    }
}

impl From<i64> for Value {
    fn from(k: i64) -> Self {
        Value::Integer(k)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Boolean(b)
    }
}

/// Type-erased distribution, used where a graph node holds a fixed law.
#[derive(Clone, Debug)]
pub enum Dist {
    Gaussian1D(Gaussian1D),
    GaussianND(GaussianND),
    Uniform(Uniform),
    UniformBox(UniformBox),
    Poisson(Poisson),
    Bernoulli(Bernoulli),
    Categorical(Categorical),
}

impl Dist {
    pub fn dim(&self) -> usize {
        match self {
            Dist::GaussianND(g) => g.dim(),
            Dist::UniformBox(b) => b.dim(),
            _ => 1,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Value {
        match self {
            Dist::Gaussian1D(d) => Value::Real(d.sample(rng)),
            Dist::GaussianND(d) => Value::Vector(d.sample(rng)),
            Dist::Uniform(d) => Value::Real(d.sample(rng)),
            Dist::UniformBox(d) => Value::Vector(d.sample(rng)),
            Dist::Poisson(d) => Value::Integer(d.sample(rng)),
            Dist::Bernoulli(d) => Value::Boolean(d.sample(rng)),
            Dist::Categorical(d) => Value::Integer(d.sample(rng) as i64),
        }
    }

    pub fn log_density(&self, value: &Value) -> Result<f64> {
        let mismatch = || Error::TypeMismatch(format!("{value:?} for {self:?}"));
        Ok(match (self, value) {
            (Dist::Gaussian1D(d), v) => d.log_density(&v.as_real().ok_or_else(mismatch)?),
            (Dist::GaussianND(d), Value::Vector(v)) => d.log_density(v),
            (Dist::Uniform(d), v) => d.log_density(&v.as_real().ok_or_else(mismatch)?),
            (Dist::UniformBox(d), Value::Vector(v)) => d.log_density(v),
            (Dist::Poisson(d), Value::Integer(k)) => d.log_density(k),
            (Dist::Bernoulli(d), Value::Boolean(b)) => d.log_density(b),
            (Dist::Categorical(d), Value::Integer(k)) => {
                if *k < 0 {
                    f64::NEG_INFINITY
                } else {
                    d.log_density(&(*k as usize))
                }
            }
            _ => return Err(mismatch()),
        })
    }
}

macro_rules! dist_from {
    ($($variant:ident),*) => {
        $(impl From<$variant> for Dist {
            fn from(d: $variant) -> Self {
                Dist::$variant(d)
            }
        })*
    };
}

dist_from!(Gaussian1D, GaussianND, Uniform, UniformBox, Poisson, Bernoulli, Categorical);
