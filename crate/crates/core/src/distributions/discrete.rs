use rand::Rng;

use super::special::{ln_factorial, log_poisson_pmf};
use super::Distribution;
use crate::{Error, Result};

/// Rate at and above which Poisson draws switch from inversion to
/// transformed rejection.
const PTRS_THRESHOLD: f64 = 30.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Poisson {
    rate: f64,
}

impl Poisson {
    pub fn new(rate: f64) -> Result<Self> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(Error::InvalidParameter(format!("Poisson rate must be positive, got {rate}")));
        }
        Ok(Self { rate })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    fn sample_inversion<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        let u: f64 = rng.random();
        let mut k = 0i64;
        let mut p = (-self.rate).exp();
        let mut cdf = p;
        while u > cdf {
            k += 1;
            p *= self.rate / k as f64;
            let next = cdf + p;
            if next == cdf {
                // remaining tail is below rounding
                break;
            }
            cdf = next;
        }
        k
    }

    // Hörmann's PTRS: transformed rejection with squeeze.
    fn sample_ptrs<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        let mu = self.rate;
        let log_mu = mu.ln();
        let b = 0.931 + 2.53 * mu.sqrt();
        let a = -0.059 + 0.02483 * b;
        let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        let v_r = 0.9277 - 3.6224 / (b - 2.0);
        loop {
            let u = rng.random::<f64>() - 0.5;
            let v: f64 = rng.random();
            let us = 0.5 - u.abs();
            let k = ((2.0 * a / us + b) * u + mu + 0.43).floor();
            if us >= 0.07 && v <= v_r {
                return k as i64;
            }
            if k < 0.0 || (us < 0.013 && v > us) {
                continue;
            }
            let lhs = v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln();
            let rhs = -mu + k * log_mu - ln_factorial(k as u64);
            if lhs <= rhs {
                return k as i64;
            }
        }
    }
}

impl Distribution for Poisson {
    type Value = i64;

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        if self.rate < PTRS_THRESHOLD {
            self.sample_inversion(rng)
        } else {
            self.sample_ptrs(rng)
        }
    }

    fn log_density(&self, k: &i64) -> f64 {
        log_poisson_pmf(*k, self.rate)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bernoulli {
    prob: f64,
}

impl Bernoulli {
    pub fn new(prob: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&prob) {
            return Err(Error::InvalidParameter(format!("Bernoulli probability must lie in [0, 1], got {prob}")));
        }
        Ok(Self { prob })
    }

    pub fn prob(&self) -> f64 {
        self.prob
    }
}

impl Distribution for Bernoulli {
    type Value = bool;

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> bool {
        rng.random::<f64>() < self.prob
    }

    fn log_density(&self, x: &bool) -> f64 {
        if *x {
            self.prob.ln()
        } else {
            (1.0 - self.prob).ln()
        }
    }
}

/// Categorical over `0..probs.len()`.
#[derive(Clone, Debug, PartialEq)]
pub struct Categorical {
    probs: Vec<f64>,
}

impl Categorical {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidParameter("categorical needs at least one category".into()));
        }
        if probs.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidParameter("categorical probabilities must be nonnegative".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("categorical probabilities sum to {total}, not 1")));
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Inverse-cdf lookup of `u ∈ [0, 1)`, never returning a zero-probability
    /// category.
    pub fn quantile(&self, u: f64) -> usize {
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > 0.0 {
                last_positive = i;
                acc += p;
                if u < acc {
                    return i;
                }
            }
        }
        last_positive
    }
}

impl Distribution for Categorical {
    type Value = usize;

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.quantile(rng.random())
    }

    fn log_density(&self, k: &usize) -> f64 {
        self.probs.get(*k).map_or(f64::NEG_INFINITY, |p| p.ln())
    }
}
