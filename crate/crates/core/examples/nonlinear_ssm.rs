//! A nonlinear transition `θ sin(x)`. The state must be realized before
//! the sine applies, so delayed sampling falls back to simulation for the
//! state while still marginalizing each observation's noise.

use std::sync::Arc;

use delayppl::inference::FilterConfig;
use delayppl::model::{run_ssm, GraphMode, ObservationSchedule};
use delayppl::scalar_ssm::{run_example, NonlinearSSMSpec, ThetaValue, TransitionFn, Theta};
use delayppl::Stream;
use rand::SeedableRng;

fn main() -> delayppl::Result<()> {
    let mut spec = NonlinearSSMSpec {
        f: TransitionFn::Sine,
        ..NonlinearSSMSpec::default()
    };
    spec.noise.theta = Theta::Fixed(2.0);
    spec.noise.trans_var = 0.2;

    // simulate data by running the model forward with nothing observed
    let mut rng = Stream::seed_from_u64(4);
    let mut exec = run_ssm(Arc::new(spec.clone()), Arc::new(ObservationSchedule::empty()), 30, GraphMode::Eager)?;
    exec.run_to_end(&mut rng)?;
    let ids: Vec<_> = exec.model().path().iter().map(|s| s.obs).collect();
    assert!(matches!(exec.model().theta(), Some(ThetaValue::Fixed(_))));
    let ys: Vec<f64> = ids
        .into_iter()
        .map(|id| exec.arena_mut().realize_real(id, &mut rng))
        .collect::<delayppl::Result<_>>()?;

    // a custom transition is just a closure
    let mut custom = spec.clone();
    custom.f = TransitionFn::custom(|x, theta| theta * x.sin());

    let config = FilterConfig {
        particles: 1000,
        seed: 5,
        ..FilterConfig::default()
    };
    let built_in = run_example(&spec, &ys, GraphMode::Delayed, &config)?;
    let closure = run_example(&custom, &ys, GraphMode::Delayed, &config)?;
    println!("log Z with built-in sine {:.6}", built_in.log_z);
    println!("log Z with closure      {:.6}", closure.log_z);
    println!("posterior path head {:.3?}", &built_in.xs[..5]);
    Ok(())
}
