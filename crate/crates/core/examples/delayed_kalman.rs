//! A chain of Gaussian nodes in the delayed-sampling graph. Observing each
//! step conditions the chain analytically, so the marginals are the Kalman
//! filter's and the summed log-weights are the exact log-likelihood.

use delayppl::graph::{DistExpr, GraphArena};
use delayppl::scalar_ssm::{kalman_filter, LinearGaussianSSMSpec};
use delayppl::distributions::Value;
use delayppl::Stream;
use rand::SeedableRng;

fn main() -> delayppl::Result<()> {
    let spec = LinearGaussianSSMSpec::with_theta(0.9);
    let ys = [0.3, 0.8, 1.1, 0.4, -0.2];
    let mut rng = Stream::seed_from_u64(0);

    let mut g = GraphArena::new();
    let mut x = g.assume(DistExpr::gaussian(spec.init_mean, spec.init_var))?;
    let mut log_lik = 0.0;
    for (t, y) in ys.iter().enumerate() {
        if t > 0 {
            x = g.assume(DistExpr::gaussian(0.9 * x, spec.trans_var))?;
        }
        let obs = g.assume(DistExpr::gaussian(x, spec.obs_var))?;
        log_lik += g.observe(obs, Value::Real(*y), &mut rng)?;
        let m = g.marginal(x).expect("x is marginalized after its child is observed");
        println!("t={} filtered mean {:+.6} var {:.6}", t + 1, m.mean[0], m.covariance[(0, 0)]);
    }

    let oracle = kalman_filter(&spec, &ys)?;
    println!("graph log-likelihood  {log_lik:.12}");
    println!("Kalman log-likelihood {:.12}", oracle.log_likelihood);

    // backward sampling: realizing the last state then its predecessors
    let last = g.realize_real(x, &mut rng)?;
    println!("one smoothed draw of x_T: {last:+.4}");
    Ok(())
}
