//! Primitive distributions and the special functions behind the tracking
//! model's survival and association terms.

use delayppl::distributions::{
    log_rising_factorial, log_sum_exp, normalize_log_weights, poisson_cdf, poisson_pmf, Distribution, Gaussian1D,
    Poisson,
};
use delayppl::Stream;
use rand::SeedableRng;

fn main() -> delayppl::Result<()> {
    let mut rng = Stream::seed_from_u64(1);

    let poisson = Poisson::new(3.7)?;
    let draws: Vec<i64> = (0..10_000).map(|_| poisson.sample(&mut rng)).collect();
    let mean = draws.iter().sum::<i64>() as f64 / draws.len() as f64;
    println!("Poisson(3.7): sample mean {mean:.3}");
    for k in 0..5 {
        println!("  k={k}  pmf {:.6}  cdf {:.6}", poisson_pmf(k, 3.7)?, poisson_cdf(k, 3.7)?);
    }

    // (M+1)(M+2)...(M+K) for M = 4 observations and K = 3 detections
    let lr = log_rising_factorial(5.0, 3)?;
    println!("ln rising(5, 3) = {lr:.6} = ln {}", lr.exp().round());

    let g = Gaussian1D::new(0.0, 2.0)?;
    let log_w: Vec<f64> = [-1.0, 0.5, 2.0].iter().map(|x| g.log_density(x)).collect();
    let (probs, log_mean) = normalize_log_weights(&log_w);
    println!("weights {probs:.4?}, log mean {log_mean:.4}, log sum {:.4}", log_sum_exp(&log_w));
    Ok(())
}
