//! Special functions: Poisson pmf/cdf, log rising factorial, and stable
//! log-space weight arithmetic.

use statrs::function::gamma::ln_gamma;

use crate::{Error, Result};

fn check_rate(rate: f64) -> Result<()> {
    if rate > 0.0 && rate.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("Poisson rate must be positive, got {rate}")))
    }
}

/// `ln k!`.
pub fn ln_factorial(k: u64) -> f64 {
    ln_gamma(k as f64 + 1.0)
}

/// Log-pmf of a Poisson distribution. Negative counts are outside the support.
pub fn log_poisson_pmf(k: i64, rate: f64) -> f64 {
    if k < 0 {
        return f64::NEG_INFINITY;
    }
    -rate + k as f64 * rate.ln() - ln_factorial(k as u64)
}

pub fn poisson_pmf(k: i64, rate: f64) -> Result<f64> {
    check_rate(rate)?;
    if k < 0 {
        return Err(Error::InvalidParameter(format!("Poisson count must be nonnegative, got {k}")));
    }
    Ok(log_poisson_pmf(k, rate).exp())
}

/// Cumulative distribution function, accumulated from [`poisson_pmf`] so the
/// two always agree term by term.
pub fn poisson_cdf(k: i64, rate: f64) -> Result<f64> {
    check_rate(rate)?;
    if k < 0 {
        return Err(Error::InvalidParameter(format!("Poisson count must be nonnegative, got {k}")));
    }
    let mut total = 0.0;
    for j in 0..=k {
        total += log_poisson_pmf(j, rate).exp();
    }
    Ok(total.min(1.0))
}

/// `ln(a (a+1) ... (a+n-1))`, zero for `n = 0`.
pub fn log_rising_factorial(a: f64, n: u64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::InvalidParameter(format!("rising factorial base must be positive, got {a}")));
    }
    if n == 0 {
        return Ok(0.0);
    }
    Ok(ln_gamma(a + n as f64) - ln_gamma(a))
}

/// `ln Σ exp(x_i)` by max-shift. Returns `-inf` for an empty slice or when
/// every term is `-inf`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}

/// `ln((1/n) Σ exp(x_i))`.
pub fn log_mean_exp(xs: &[f64]) -> f64 {
    log_sum_exp(xs) - (xs.len() as f64).ln()
}

/// Normalized probabilities and the log mean weight. If every weight is
/// `-inf` the probabilities are all zero and the log mean is `-inf`.
pub fn normalize_log_weights(xs: &[f64]) -> (Vec<f64>, f64) {
    let lse = log_sum_exp(xs);
    let log_mean = lse - (xs.len() as f64).ln();
    if lse == f64::NEG_INFINITY {
        return (vec![0.0; xs.len()], f64::NEG_INFINITY);
    }
    let probs = xs.iter().map(|&x| (x - lse).exp()).collect();
    (probs, log_mean)
}
