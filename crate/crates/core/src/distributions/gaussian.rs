use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;

use super::Distribution;
use crate::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-9;

/// Cholesky factorization with a single jittered retry: on failure, add
/// `1e-9 * trace / n` to the diagonal and try once more.
pub fn cholesky(matrix: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    if !matrix.is_square() {
        return Err(Error::DimensionMismatch {
            expected: matrix.nrows(),
            found: matrix.ncols(),
        });
    }
    if let Some(chol) = Cholesky::new(matrix.clone()) {
        return Ok(chol);
    }
    let n = matrix.nrows().max(1);
    let jitter = 1e-9 * matrix.trace() / n as f64;
    if !(jitter > 0.0) {
        return Err(Error::NotPositiveDefinite);
    }
    let mut bumped = matrix.clone();
    for i in 0..matrix.nrows() {
        bumped[(i, i)] += jitter;
    }
    Cholesky::new(bumped).ok_or(Error::NotPositiveDefinite)
}

/// `(m + mᵀ) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub(crate) fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    let scale = m.amax().max(1.0);
    for i in 0..m.nrows() {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL * scale {
                return Err(Error::InvalidParameter("covariance is not symmetric".into()));
            }
        }
    }
    Ok(())
}

/// Log density of `N(mean, L Lᵀ)` at `x`, given the lower factor.
pub(crate) fn log_density_chol(mean: &DVector<f64>, chol: &Cholesky<f64, Dyn>, x: &DVector<f64>) -> f64 {
    let n = mean.len() as f64;
    let l = chol.l_dirty();
    let mut z = x - mean;
    if !l.solve_lower_triangular_mut(&mut z) {
        return f64::NEG_INFINITY;
    }
    let log_det: f64 = (0..mean.len()).map(|i| l[(i, i)].ln()).sum::<f64>() * 2.0;
    -0.5 * (n * (2.0 * PI).ln() + log_det + z.norm_squared())
}

/// Scalar Gaussian parameterized by its variance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gaussian1D {
    mean: f64,
    variance: f64,
}

impl Gaussian1D {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !(variance > 0.0) || !variance.is_finite() || !mean.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "Gaussian needs finite mean and positive variance, got ({mean}, {variance})"
            )));
        }
        Ok(Self { mean, variance })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }
}

impl Distribution for Gaussian1D {
    type Value = f64;

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        self.mean + self.variance.sqrt() * z
    }

    fn log_density(&self, x: &f64) -> f64 {
        let d = x - self.mean;
        -0.5 * ((2.0 * PI * self.variance).ln() + d * d / self.variance)
    }
}

/// Multivariate Gaussian parameterized by its covariance. Positive
/// semi-definite covariances are accepted through the jittered factorization.
#[derive(Clone, Debug)]
pub struct GaussianND {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl GaussianND {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        if covariance.nrows() != mean.len() || covariance.ncols() != mean.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                found: covariance.nrows(),
            });
        }
        check_symmetric(&covariance)?;
        let chol = cholesky(&covariance)?;
        Ok(Self { mean, covariance, chol })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }
}

impl Distribution for GaussianND {
    type Value = DVector<f64>;

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let z = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        &self.mean + self.chol.l_dirty().lower_triangle() * z
    }

    fn log_density(&self, x: &DVector<f64>) -> f64 {
        if x.len() != self.dim() {
            return f64::NEG_INFINITY;
        }
        log_density_chol(&self.mean, &self.chol, x)
    }
}
