//! The linear-Gaussian model with an unknown coefficient θ ~ U(0, 1).
//! The bootstrap filter (eager) samples everything; the delayed filter
//! marginalizes the state chain and keeps far more effective particles.

use delayppl::inference::FilterConfig;
use delayppl::model::GraphMode;
use delayppl::scalar_ssm::{run_example, simulate_lgssm, LinearGaussianSSMSpec, NonlinearSSMSpec, Theta};
use delayppl::Stream;
use rand::SeedableRng;

fn main() -> delayppl::Result<()> {
    let truth = LinearGaussianSSMSpec::with_theta(0.7);
    let sample = simulate_lgssm(&truth, 40, &mut Stream::seed_from_u64(3))?;
    let spec = NonlinearSSMSpec::from(LinearGaussianSSMSpec {
        theta: Theta::Uniform { lower: 0.0, upper: 1.0 },
        ..truth
    });
    let config = FilterConfig {
        particles: 512,
        seed: 9,
        ..FilterConfig::default()
    };
    for mode in [GraphMode::Eager, GraphMode::Delayed] {
        let report = run_example(&spec, &sample.ys, mode, &config)?;
        let mean_ess = report.ess.iter().sum::<f64>() / report.ess.len() as f64;
        let resamples = report.resampled.iter().filter(|r| **r).count();
        println!(
            "{mode:?}: log Z {:.4}, mean ESS {mean_ess:.1}, {resamples} resampling steps, posterior θ draw {:.3}",
            report.log_z, report.theta
        );
    }
    println!("true θ {:.3}", sample.theta);
    Ok(())
}
