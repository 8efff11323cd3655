//! Closed-form linear-Gaussian marginalization and conditioning.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::distributions::{cholesky, log_density_chol, symmetrize};
use crate::{Error, Result};

/// A Gaussian marginal `N(mean, covariance)` held by a graph node.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianMarginal {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl GaussianMarginal {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Self {
        Self { mean, covariance }
    }

    pub fn scalar(mean: f64, variance: f64) -> Self {
        Self {
            mean: DVector::from_element(1, mean),
            covariance: DMatrix::from_element(1, 1, variance),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn log_density(&self, x: &DVector<f64>) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        let chol = cholesky(&self.covariance)?;
        Ok(log_density_chol(&self.mean, &chol, x))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<DVector<f64>> {
        let chol = cholesky(&self.covariance)?;
        let z = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        Ok(&self.mean + chol.l() * z)
    }
}

/// Pushes a marginal through `child ~ N(a·parent + b, noise)`:
/// `N(a μ + b, a Σ aᵀ + noise)`.
pub fn marginalize_forward(
    parent: &GaussianMarginal,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    noise: &DMatrix<f64>,
) -> GaussianMarginal {
    let mean = a * &parent.mean + b;
    let covariance = symmetrize(&(a * &parent.covariance * a.transpose() + noise));
    GaussianMarginal { mean, covariance }
}

/// Conditions the parent marginal on the child having been realized at
/// `child_value`: the Kalman update with gain `Σ aᵀ (a Σ aᵀ + noise)⁻¹`.
pub fn condition_backward(
    parent: &GaussianMarginal,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    noise: &DMatrix<f64>,
    child_value: &DVector<f64>,
) -> Result<GaussianMarginal> {
    if child_value.len() != a.nrows() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: child_value.len(),
        });
    }
    let a_sigma = a * &parent.covariance;
    let innovation_cov = symmetrize(&(&a_sigma * a.transpose() + noise));
    let chol = cholesky(&innovation_cov)?;
    // S is symmetric, so K = (S⁻¹ a Σ)ᵀ
    let gain = chol.solve(&a_sigma).transpose();
    let residual = child_value - (a * &parent.mean + b);
    let mean = &parent.mean + &gain * residual;
    let covariance = symmetrize(&(&parent.covariance - &gain * a_sigma));
    Ok(GaussianMarginal { mean, covariance })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(x: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, x)
    }

    #[test]
    fn forward_sums_variances() {
        let m = marginalize_forward(&GaussianMarginal::scalar(0.0, 1.0), &scalar(1.0), &DVector::zeros(1), &scalar(0.1));
        assert_eq!(m.mean[0], 0.0);
        assert!((m.covariance[(0, 0)] - 1.1).abs() < 1e-15);
    }

    #[test]
    fn zero_link_ignores_parent() {
        let m = marginalize_forward(
            &GaussianMarginal::scalar(5.0, 9.0),
            &scalar(0.0),
            &DVector::from_element(1, 2.0),
            &scalar(0.3),
        );
        assert_eq!(m, GaussianMarginal::scalar(2.0, 0.3));
    }

    #[test]
    fn conjugate_update_matches_formula() {
        let post = condition_backward(
            &GaussianMarginal::scalar(0.0, 1.0),
            &scalar(1.0),
            &DVector::zeros(1),
            &scalar(0.1),
            &DVector::from_element(1, 1.0),
        )
        .unwrap();
        assert!((post.mean[0] - 1.0 / 1.1).abs() < 1e-12);
        assert!((post.covariance[(0, 0)] - 0.1 / 1.1).abs() < 1e-12);
    }

    /// Grid oracle: posterior moments of x given y = x + e by direct numeric
    /// integration of prior × likelihood.
    #[test]
    fn conjugate_update_matches_grid_integration() {
        let (mu, var, a, b, q, y) = (0.3, 1.7, -0.8, 0.4, 0.25, 1.3);
        let post = condition_backward(
            &GaussianMarginal::scalar(mu, var),
            &scalar(a),
            &DVector::from_element(1, b),
            &scalar(q),
            &DVector::from_element(1, y),
        )
        .unwrap();
        let n = 400_000;
        let (lo, hi) = (-15.0, 15.0);
        let h = (hi - lo) / n as f64;
        let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for i in 0..=n {
            let x = lo + i as f64 * h;
            let w = (-(x - mu) * (x - mu) / (2.0 * var) - (y - a * x - b) * (y - a * x - b) / (2.0 * q)).exp();
            z += w;
            m1 += w * x;
            m2 += w * x * x;
        }
        let mean = m1 / z;
        let variance = m2 / z - mean * mean;
        assert!((post.mean[0] - mean).abs() < 1e-8);
        assert!((post.covariance[(0, 0)] - variance).abs() < 1e-8);
    }

    #[test]
    fn prior_mean_observation_leaves_mean() {
        let post = condition_backward(
            &GaussianMarginal::scalar(2.0, 1.0),
            &scalar(1.0),
            &DVector::zeros(1),
            &scalar(0.1),
            &DVector::from_element(1, 2.0),
        )
        .unwrap();
        assert!((post.mean[0] - 2.0).abs() < 1e-15);
    }

    /// Position-only observation of a position/velocity/acceleration state:
    /// compare against the joint-Gaussian conditioning formula computed with
    /// an explicit inverse.
    #[test]
    fn vector_update_propagates_through_cross_covariance() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        let mut b = DMatrix::zeros(2, 6);
        b.view_mut((0, 0), (2, 2)).copy_from(&i2);
        let mut sigma = DMatrix::<f64>::zeros(6, 6);
        for i in 0..6 {
            sigma[(i, i)] = [5.0, 5.0, 0.1, 0.1, 0.01, 0.01][i];
        }
        // correlate position and velocity
        sigma[(0, 2)] = 0.3;
        sigma[(2, 0)] = 0.3;
        let mean = DVector::from_vec(vec![1.0, -1.0, 0.5, 0.0, 0.0, 0.1]);
        let r = &i2 * 0.1;
        let y = DVector::from_vec(vec![2.0, -3.0]);
        let post = condition_backward(&GaussianMarginal::new(mean.clone(), sigma.clone()), &b, &DVector::zeros(2), &r, &y).unwrap();

        let s = &b * &sigma * b.transpose() + &r;
        let s_inv = s.try_inverse().unwrap();
        let cross = &sigma * b.transpose();
        let expect_mean = &mean + &cross * &s_inv * (&y - &b * &mean);
        let expect_cov = &sigma - &cross * &s_inv * cross.transpose();
        assert!((post.mean - expect_mean).amax() < 1e-12);
        assert!((post.covariance - expect_cov).amax() < 1e-12);
    }

    #[test]
    fn singular_innovation_errors() {
        let r = condition_backward(
            &GaussianMarginal::scalar(0.0, 0.0),
            &scalar(1.0),
            &DVector::zeros(1),
            &scalar(0.0),
            &DVector::from_element(1, 1.0),
        );
        assert!(r.is_err());
    }
}
