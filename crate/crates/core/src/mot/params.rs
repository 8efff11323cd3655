use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::distributions::UniformBox;
use crate::{Error, Result};

/// Parameters shared by every object and by the clutter process.
///
/// The state of one object is position, velocity and acceleration, each
/// with the dimension of the domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlobalParams {
    #[serde(with = "vector_serde")]
    pub lower: DVector<f64>,
    #[serde(with = "vector_serde")]
    pub upper: DVector<f64>,
    pub detection_prob: f64,
    #[serde(with = "matrix_serde")]
    pub initial_cov: Arc<DMatrix<f64>>,
    #[serde(with = "matrix_serde")]
    pub transition: Arc<DMatrix<f64>>,
    #[serde(with = "matrix_serde")]
    pub transition_cov: Arc<DMatrix<f64>>,
    #[serde(with = "matrix_serde")]
    pub observation: Arc<DMatrix<f64>>,
    #[serde(with = "matrix_serde")]
    pub observation_cov: Arc<DMatrix<f64>>,
    /// Expected new objects per step.
    pub birth_rate: f64,
    /// Expected clutter points per step, beyond the first.
    pub clutter_rate: f64,
    /// Mean object lifetime in steps.
    pub lifetime_rate: f64,
}

fn blocks(diag: [f64; 3]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(6, 6);
    for (b, v) in diag.iter().enumerate() {
        for i in 0..2 {
            m[(2 * b + i, 2 * b + i)] = *v;
        }
    }
    m
}

impl Default for GlobalParams {
    /// Domain `[-10, 10]²`, constant-acceleration dynamics, position-only
    /// observations. The detection probability and the three rates are not
    /// given in the source material; the values here are ours.
    fn default() -> Self {
        let i2 = DMatrix::<f64>::identity(2, 2);
        let mut a = DMatrix::<f64>::identity(6, 6);
        a.view_mut((0, 2), (2, 2)).copy_from(&i2);
        a.view_mut((0, 4), (2, 2)).copy_from(&(&i2 * 0.5));
        a.view_mut((2, 4), (2, 2)).copy_from(&i2);
        let mut b = DMatrix::zeros(2, 6);
        b.view_mut((0, 0), (2, 2)).copy_from(&i2);
        Self {
            lower: DVector::from_element(2, -10.0),
            upper: DVector::from_element(2, 10.0),
            detection_prob: 0.9,
            initial_cov: Arc::new(blocks([5.0, 0.1, 0.01])),
            transition: Arc::new(a),
            transition_cov: Arc::new(blocks([0.0, 0.0, 0.01])),
            observation: Arc::new(b),
            observation_cov: Arc::new(&i2 * 0.1),
            birth_rate: 0.5,
            clutter_rate: 2.0,
            lifetime_rate: 10.0,
        }
    }
}

fn check_psd(name: &str, m: &DMatrix<f64>, n: usize) -> Result<()> {
    if m.shape() != (n, n) {
        return Err(Error::Config(format!("{name} must be {n}x{n}, got {:?}", m.shape())));
    }
    if (m - m.transpose()).amax() > 1e-9 * m.amax().max(1.0) {
        return Err(Error::Config(format!("{name} must be symmetric")));
    }
    let eig = m.clone().symmetric_eigen();
    if eig.eigenvalues.min() < -1e-9 * m.amax().max(1.0) {
        return Err(Error::Config(format!("{name} must be positive semidefinite")));
    }
    Ok(())
}

impl GlobalParams {
    pub fn domain_dim(&self) -> usize {
        self.lower.len()
    }

    pub fn state_dim(&self) -> usize {
        3 * self.domain_dim()
    }

    pub fn domain(&self) -> Result<UniformBox> {
        UniformBox::new(self.lower.clone(), self.upper.clone())
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.domain_dim();
        let n = self.state_dim();
        if d == 0 || self.upper.len() != d {
            return Err(Error::Config("domain corners must be nonempty and of equal length".into()));
        }
        if self.lower.iter().zip(self.upper.iter()).any(|(l, u)| !(l < u)) {
            return Err(Error::Config("lower corner must lie below the upper corner".into()));
        }
        if !(0.0..=1.0).contains(&self.detection_prob) {
            return Err(Error::Config(format!("detection_prob {} outside [0, 1]", self.detection_prob)));
        }
        for (name, v) in [
            ("birth_rate", self.birth_rate),
            ("clutter_rate", self.clutter_rate),
            ("lifetime_rate", self.lifetime_rate),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        check_psd("initial_cov", &self.initial_cov, n)?;
        check_psd("transition_cov", &self.transition_cov, n)?;
        check_psd("observation_cov", &self.observation_cov, d)?;
        if self.observation_cov.symmetric_eigenvalues().min() <= 0.0 {
            return Err(Error::Config("observation_cov must be positive definite".into()));
        }
        if self.transition.shape() != (n, n) {
            return Err(Error::Config(format!("transition must be {n}x{n}")));
        }
        if self.observation.shape() != (d, n) {
            return Err(Error::Config(format!("observation must be {d}x{n}")));
        }
        Ok(())
    }
}

mod vector_serde {
    use nalgebra::DVector;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DVector<f64>, D::Error> {
        Ok(DVector::from_vec(Vec::<f64>::deserialize(d)?))
    }
}

mod matrix_serde {
    use std::sync::Arc;

    use nalgebra::DMatrix;
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Arc<DMatrix<f64>>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Arc<DMatrix<f64>>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(D::Error::custom("matrix rows have different lengths"));
        }
        Ok(Arc::new(DMatrix::from_row_iterator(
            rows.len(),
            cols,
            rows.into_iter().flatten(),
        )))
    }
}
