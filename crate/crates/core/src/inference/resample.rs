use crate::distributions::log_sum_exp;

/// Effective sample size `(Σw)² / Σw²` of unnormalized log-weights.
/// All `-inf` gives 0.
pub fn ess(log_weights: &[f64]) -> f64 {
    let a = log_sum_exp(log_weights);
    if a == f64::NEG_INFINITY {
        return 0.0;
    }
    let doubled: Vec<f64> = log_weights.iter().map(|w| 2.0 * w).collect();
    (2.0 * a - log_sum_exp(&doubled)).exp()
}

/// Systematic resampling: `n = probs.len()` ancestors from one uniform `u`
/// in `[0, 1)`, using the grid `(u + k) / n`. The result is sorted and each
/// index `i` appears `floor(n p_i)` or `ceil(n p_i)` times.
pub fn systematic_resample(probs: &[f64], u: f64) -> Vec<usize> {
    let n = probs.len();
    let mut out = Vec::with_capacity(n);
    let mut cumulative = 0.0;
    let mut i = 0;
    for k in 0..n {
        let point = (u + k as f64) / n as f64;
        while i + 1 < n && cumulative + probs[i] <= point {
            cumulative += probs[i];
            i += 1;
        }
        // rounding in the running sum can step onto a trailing zero-weight index
        let mut j = i;
        while j > 0 && probs[j] == 0.0 {
            j -= 1;
        }
        out.push(j);
    }
    out
}
