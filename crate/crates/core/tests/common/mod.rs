//! Oracles written independently of the library: textbook Kalman filter
//! and RTS smoother, and brute-force enumeration of associations.
#![allow(dead_code)]

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

pub struct LinearGaussian {
    pub init_mean: DVector<f64>,
    pub init_cov: DMatrix<f64>,
    pub transition: DMatrix<f64>,
    pub transition_cov: DMatrix<f64>,
    pub observation: DMatrix<f64>,
    pub observation_cov: DMatrix<f64>,
}

pub struct KalmanRun {
    pub log_likelihood: f64,
    pub increments: Vec<f64>,
    pub means: Vec<DVector<f64>>,
    pub covs: Vec<DMatrix<f64>>,
}

fn mvn_log_pdf(x: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
    let d = x - mean;
    let inv = cov.clone().try_inverse().expect("invertible innovation covariance");
    let det = cov.determinant();
    -0.5 * (x.len() as f64 * (2.0 * PI).ln() + det.ln() + (d.transpose() * inv * &d)[(0, 0)])
}

/// Predict with `transition` from the second step on, update with every
/// observation, textbook gain form.
pub fn kalman(model: &LinearGaussian, ys: &[DVector<f64>]) -> KalmanRun {
    let mut m = model.init_mean.clone();
    let mut p = model.init_cov.clone();
    let mut out = KalmanRun {
        log_likelihood: 0.0,
        increments: Vec::new(),
        means: Vec::new(),
        covs: Vec::new(),
    };
    for (t, y) in ys.iter().enumerate() {
        if t > 0 {
            m = &model.transition * &m;
            p = &model.transition * &p * model.transition.transpose() + &model.transition_cov;
        }
        let c = &model.observation;
        let s = c * &p * c.transpose() + &model.observation_cov;
        let w = mvn_log_pdf(y, &(c * &m), &s);
        let k = &p * c.transpose() * s.clone().try_inverse().unwrap();
        m = &m + &k * (y - c * &m);
        p = &p - &k * c * &p;
        p = (&p + p.transpose()) * 0.5;
        out.log_likelihood += w;
        out.increments.push(w);
        out.means.push(m.clone());
        out.covs.push(p.clone());
    }
    out
}

/// Scalar chain `x_1 ~ N(m0, p0)`, `x_t ~ N(a x_{t-1}, q)`, `y_t ~ N(x_t, r)`.
#[derive(Clone, Copy, Debug)]
pub struct ScalarChain {
    pub m0: f64,
    pub p0: f64,
    pub a: f64,
    pub q: f64,
    pub r: f64,
}

pub struct ScalarKalman {
    pub log_likelihood: f64,
    pub filtered_mean: Vec<f64>,
    pub filtered_var: Vec<f64>,
    pub predicted_mean: Vec<f64>,
    pub predicted_var: Vec<f64>,
}

pub fn scalar_kalman(c: ScalarChain, ys: &[f64]) -> ScalarKalman {
    let (mut m, mut p) = (c.m0, c.p0);
    let mut out = ScalarKalman {
        log_likelihood: 0.0,
        filtered_mean: vec![],
        filtered_var: vec![],
        predicted_mean: vec![],
        predicted_var: vec![],
    };
    for (t, y) in ys.iter().enumerate() {
        if t > 0 {
            m *= c.a;
            p = c.a * c.a * p + c.q;
        }
        out.predicted_mean.push(m);
        out.predicted_var.push(p);
        let s = p + c.r;
        out.log_likelihood += -0.5 * ((2.0 * PI * s).ln() + (y - m).powi(2) / s);
        let k = p / s;
        m += k * (y - m);
        p *= 1.0 - k;
        out.filtered_mean.push(m);
        out.filtered_var.push(p);
    }
    out
}

/// Rauch-Tung-Striebel smoothed means and variances.
pub fn rts_smoother(c: ScalarChain, ys: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let f = scalar_kalman(c, ys);
    let n = ys.len();
    let mut ms = f.filtered_mean.clone();
    let mut ps = f.filtered_var.clone();
    for t in (0..n - 1).rev() {
        let g = f.filtered_var[t] * c.a / f.predicted_var[t + 1];
        ms[t] = f.filtered_mean[t] + g * (ms[t + 1] - f.predicted_mean[t + 1]);
        ps[t] = f.filtered_var[t] + g * g * (ps[t + 1] - f.predicted_var[t + 1]);
    }
    (ms, ps)
}

/// Exact posterior over assignments of `pdf.len()` detected objects to
/// distinct observations out of `m`, when everything but the product of
/// predictive densities is constant across assignments.
pub fn enumerate_associations(pdf: &[Vec<f64>], m: usize) -> HashMap<Vec<usize>, f64> {
    fn rec(pdf: &[Vec<f64>], used: &mut Vec<bool>, cur: &mut Vec<usize>, w: f64, out: &mut HashMap<Vec<usize>, f64>) {
        let k = cur.len();
        if k == pdf.len() {
            out.insert(cur.clone(), w);
            return;
        }
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                cur.push(j);
                rec(pdf, used, cur, w * pdf[k][j], out);
                cur.pop();
                used[j] = false;
            }
        }
    }
    let mut out = HashMap::new();
    rec(pdf, &mut vec![false; m], &mut Vec::new(), 1.0, &mut out);
    let total: f64 = out.values().sum();
    for v in out.values_mut() {
        *v /= total;
    }
    out
}

/// Running mean and variance.
#[derive(Clone, Copy, Debug, Default)]
pub struct Moments {
    pub n: f64,
    pub mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    pub fn var(&self) -> f64 {
        self.m2 / (self.n - 1.0)
    }

    pub fn std_err(&self) -> f64 {
        (self.var() / self.n).sqrt()
    }
}

/// |mean_a - mean_b| in units of the combined standard error.
pub fn z_score(a: &Moments, b: &Moments) -> f64 {
    (a.mean - b.mean).abs() / (a.std_err().powi(2) + b.std_err().powi(2)).sqrt()
}
