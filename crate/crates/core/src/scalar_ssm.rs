//! Scalar state-space models: a linear-Gaussian model with an autoregressive
//! coefficient, its nonlinear generalization with pluggable transition and
//! observation functions, and a textbook Kalman filter.
//!
//! ```text
//! θ ~ Uniform(0, 1)          (or fixed)
//! x1 ~ N(0, 1)
//! x_t ~ N(f(x_{t-1}, θ), 1)
//! y_t ~ N(g(x_t), 0.1)
//! ```
//!
//! Variances, not standard deviations, parameterize every Gaussian.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::distributions::{Distribution, Gaussian1D, Uniform, Value};
use crate::graph::{Affine, DistExpr, NodeId};
use crate::inference::{particle_filter, posterior_stream, FilterConfig};
use crate::model::{run_ssm, Ctx, GraphMode, ObservationSchedule, StateSpaceModel};
use crate::{Error, Result};

/// How the autoregressive coefficient is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Theta {
    Fixed(f64),
    Uniform { lower: f64, upper: f64 },
}

impl Default for Theta {
    fn default() -> Self {
        Theta::Uniform { lower: 0.0, upper: 1.0 }
    }
}

impl Theta {
    pub fn fixed(&self) -> Option<f64> {
        match self {
            Theta::Fixed(v) => Some(*v),
            Theta::Uniform { .. } => None,
        }
    }
}

fn default_init_var() -> f64 {
    1.0
}

fn default_trans_var() -> f64 {
    1.0
}

fn default_obs_var() -> f64 {
    0.1
}

/// `x_t ~ N(θ x_{t-1}, trans_var)`, `y_t ~ N(x_t, obs_var)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearGaussianSSMSpec {
    #[serde(default)]
    pub theta: Theta,
    #[serde(default)]
    pub init_mean: f64,
    #[serde(default = "default_init_var")]
    pub init_var: f64,
    #[serde(default = "default_trans_var")]
    pub trans_var: f64,
    #[serde(default = "default_obs_var")]
    pub obs_var: f64,
}

impl Default for LinearGaussianSSMSpec {
    fn default() -> Self {
        Self {
            theta: Theta::default(),
            init_mean: 0.0,
            init_var: 1.0,
            trans_var: 1.0,
            obs_var: 0.1,
        }
    }
}

impl LinearGaussianSSMSpec {
    pub fn with_theta(theta: f64) -> Self {
        Self {
            theta: Theta::Fixed(theta),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Theta::Uniform { lower, upper } = self.theta {
            if !(lower < upper) {
                return Err(Error::InvalidParameter(format!("θ range [{lower}, {upper}] is empty")));
            }
        }
        for (name, v) in [
            ("init_var", self.init_var),
            ("trans_var", self.trans_var),
        ] {
            if !(v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        // a zero observation variance is the noise-free limit and is allowed
        if !(self.obs_var >= 0.0) {
            return Err(Error::InvalidParameter(format!("obs_var must be non-negative, got {}", self.obs_var)));
        }
        Ok(())
    }
}

type ScalarFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// State transition mean `f(x, θ)`.
#[derive(Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionFn {
    /// `θ x`; keeps the chain linear-Gaussian.
    #[default]
    Linear,
    /// `θ sin(x)`
    Sine,
    /// `θ tanh(x)`
    Tanh,
    /// `x / 2 + 25 x / (1 + x²)`, scaled by θ
    Growth,
    #[serde(skip)]
    Custom(ScalarFn),
}

impl TransitionFn {
    pub fn custom(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        TransitionFn::Custom(Arc::new(f))
    }

    pub fn eval(&self, x: f64, theta: f64) -> f64 {
        match self {
            TransitionFn::Linear => theta * x,
            TransitionFn::Sine => theta * x.sin(),
            TransitionFn::Tanh => theta * x.tanh(),
            TransitionFn::Growth => theta * (0.5 * x + 25.0 * x / (1.0 + x * x)),
            TransitionFn::Custom(f) => f(x, theta),
        }
    }
}

impl fmt::Debug for TransitionFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransitionFn::Linear => write!(f, "Linear"),
            TransitionFn::Sine => write!(f, "Sine"),
            TransitionFn::Tanh => write!(f, "Tanh"),
            TransitionFn::Growth => write!(f, "Growth"),
            TransitionFn::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Observation mean `g(x, θ)`.
#[derive(Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationFn {
    #[default]
    Identity,
    Square,
    #[serde(skip)]
    Custom(ScalarFn),
}

impl ObservationFn {
    pub fn custom(g: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        ObservationFn::Custom(Arc::new(g))
    }

    pub fn eval(&self, x: f64, theta: f64) -> f64 {
        match self {
            ObservationFn::Identity => x,
            ObservationFn::Square => x * x,
            ObservationFn::Custom(g) => g(x, theta),
        }
    }
}

impl fmt::Debug for ObservationFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObservationFn::Identity => write!(f, "Identity"),
            ObservationFn::Square => write!(f, "Square"),
            ObservationFn::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Same noise structure as [`LinearGaussianSSMSpec`], arbitrary `f` and `g`.
///
/// Linear choices stay lazy in the graph. Any other function needs the
/// value of its argument, so that node is realized first.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearSSMSpec {
    #[serde(flatten)]
    pub noise: LinearGaussianSSMSpec,
    #[serde(default)]
    pub f: TransitionFn,
    #[serde(default)]
    pub g: ObservationFn,
}

impl From<LinearGaussianSSMSpec> for NonlinearSSMSpec {
    fn from(noise: LinearGaussianSSMSpec) -> Self {
        Self {
            noise,
            f: TransitionFn::Linear,
            g: ObservationFn::Identity,
        }
    }
}

/// The coefficient as seen by the model: a constant or a graph node.
#[derive(Clone, Copy, Debug)]
pub enum ThetaValue {
    Fixed(f64),
    Node(NodeId),
}

impl StateSpaceModel for NonlinearSSMSpec {
    type Param = ThetaValue;
    type State = NodeId;
    type Obs = NodeId;
    type Given = f64;

    fn parameter(&self, ctx: &mut Ctx<'_>) -> Result<ThetaValue> {
        Ok(match self.noise.theta {
            Theta::Fixed(v) => ThetaValue::Fixed(v),
            Theta::Uniform { lower, upper } => ThetaValue::Node(ctx.assume(Uniform::new(lower, upper)?)?),
        })
    }

    fn initial(&self, _theta: &ThetaValue, ctx: &mut Ctx<'_>) -> Result<NodeId> {
        ctx.assume(DistExpr::gaussian(self.noise.init_mean, self.noise.init_var))
    }

    fn transition(&self, prev: &NodeId, theta: &ThetaValue, ctx: &mut Ctx<'_>) -> Result<NodeId> {
        let mean: Affine = match (&self.f, theta) {
            (TransitionFn::Linear, ThetaValue::Fixed(c)) => *c * Affine::from(*prev),
            (TransitionFn::Linear, ThetaValue::Node(id)) => ctx.product(*id, *prev)?,
            (f, theta) => {
                let c = match theta {
                    ThetaValue::Fixed(c) => *c,
                    ThetaValue::Node(id) => ctx.realize_real(*id)?,
                };
                let x = ctx.realize_real(*prev)?;
                return ctx.assume(DistExpr::gaussian(f.eval(x, c), self.noise.trans_var));
            }
        };
        ctx.assume(DistExpr::gaussian(mean, self.noise.trans_var))
    }

    fn observation(
        &self,
        x: &mut NodeId,
        theta: &ThetaValue,
        given: Option<&f64>,
        ctx: &mut Ctx<'_>,
    ) -> Result<NodeId> {
        let given = given.map(|y| Value::Real(*y));
        match &self.g {
            ObservationFn::Identity => ctx.tilde(given, DistExpr::gaussian(*x, self.noise.obs_var)),
            g => {
                let c = match theta {
                    ThetaValue::Fixed(c) => *c,
                    ThetaValue::Node(id) => ctx.realize_real(*id)?,
                };
                let v = ctx.realize_real(*x)?;
                ctx.tilde(given, DistExpr::gaussian(g.eval(v, c), self.noise.obs_var))
            }
        }
    }
}

/// One forward draw of the linear-Gaussian model.
#[derive(Clone, Debug, PartialEq)]
pub struct LgssmSample {
    pub theta: f64,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

/// Draws `(θ, x_{1:T}, y_{1:T})` by plain forward simulation.
pub fn simulate_lgssm<R: rand::Rng + ?Sized>(spec: &LinearGaussianSSMSpec, steps: usize, rng: &mut R) -> Result<LgssmSample> {
    spec.validate()?;
    let theta = match spec.theta {
        Theta::Fixed(v) => v,
        Theta::Uniform { lower, upper } => Uniform::new(lower, upper)?.sample(rng),
    };
    let mut xs = Vec::with_capacity(steps);
    let mut ys = Vec::with_capacity(steps);
    for t in 0..steps {
        let x = if t == 0 {
            Gaussian1D::new(spec.init_mean, spec.init_var)?.sample(rng)
        } else {
            Gaussian1D::new(theta * xs[t - 1], spec.trans_var)?.sample(rng)
        };
        let y = if spec.obs_var == 0.0 {
            x
        } else {
            Gaussian1D::new(x, spec.obs_var)?.sample(rng)
        };
        xs.push(x);
        ys.push(y);
    }
    Ok(LgssmSample { theta, xs, ys })
}

/// Running scalar Kalman filter for a fixed coefficient.
#[derive(Clone, Debug, PartialEq)]
pub struct KalmanFilter {
    pub theta: f64,
    pub trans_var: f64,
    pub obs_var: f64,
    /// Filtered moments after the last step (the prior before the first).
    pub mean: f64,
    pub var: f64,
    pub steps: usize,
    pub log_likelihood: f64,
}

/// Moments and likelihood terms of one filter step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KalmanStep {
    pub predicted_mean: f64,
    pub predicted_var: f64,
    pub filtered_mean: f64,
    pub filtered_var: f64,
    pub log_increment: f64,
}

impl KalmanFilter {
    pub fn new(spec: &LinearGaussianSSMSpec, theta: f64) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            theta,
            trans_var: spec.trans_var,
            obs_var: spec.obs_var,
            mean: spec.init_mean,
            var: spec.init_var,
            steps: 0,
            log_likelihood: 0.0,
        })
    }

    pub fn step(&mut self, y: f64) -> KalmanStep {
        let (pm, pv) = if self.steps == 0 {
            (self.mean, self.var)
        } else {
            (self.theta * self.mean, self.theta * self.theta * self.var + self.trans_var)
        };
        let s = pv + self.obs_var;
        let r = y - pm;
        let inc = -0.5 * ((2.0 * std::f64::consts::PI * s).ln() + r * r / s);
        let k = pv / s;
        self.mean = pm + k * r;
        self.var = pv * self.obs_var / s;
        self.steps += 1;
        self.log_likelihood += inc;
        KalmanStep {
            predicted_mean: pm,
            predicted_var: pv,
            filtered_mean: self.mean,
            filtered_var: self.var,
            log_increment: inc,
        }
    }
}

/// Per-step output of [`kalman_filter`].
#[derive(Clone, Debug, PartialEq)]
pub struct KalmanOracle {
    pub steps: Vec<KalmanStep>,
    pub log_likelihood: f64,
}

impl KalmanOracle {
    pub fn filtered_means(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.filtered_mean).collect()
    }

    pub fn filtered_vars(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.filtered_var).collect()
    }
}

/// Exact log-likelihood and filtered moments of `ys` under a fixed θ.
pub fn kalman_filter(spec: &LinearGaussianSSMSpec, ys: &[f64]) -> Result<KalmanOracle> {
    let theta = spec
        .theta
        .fixed()
        .ok_or_else(|| Error::InvalidParameter("the Kalman filter needs a fixed θ".into()))?;
    if ys.is_empty() {
        return Err(Error::InvalidParameter("the Kalman filter needs at least one observation".into()));
    }
    let mut kf = KalmanFilter::new(spec, theta)?;
    let steps = ys.iter().map(|y| kf.step(*y)).collect();
    Ok(KalmanOracle {
        steps,
        log_likelihood: kf.log_likelihood,
    })
}

/// Output of [`run_example`].
#[derive(Clone, Debug, PartialEq)]
pub struct ExampleReport {
    pub log_z: f64,
    pub per_step_log_increments: Vec<f64>,
    pub ess: Vec<f64>,
    pub resampled: Vec<bool>,
    /// θ in the selected particle (realized if it was random).
    pub theta: f64,
    /// States of the selected particle, realized from last to first.
    pub xs: Vec<f64>,
}

/// Filters `ys` with the given model in eager (bootstrap) or delayed mode
/// and extracts one posterior path.
pub fn run_example(spec: &NonlinearSSMSpec, ys: &[f64], mode: GraphMode, config: &FilterConfig) -> Result<ExampleReport> {
    spec.noise.validate()?;
    let schedule = Arc::new(ObservationSchedule::fully_observed(ys.iter().copied()));
    let proto = run_ssm(Arc::new(spec.clone()), schedule, ys.len(), mode)?;
    let out = particle_filter(&proto, config)?;
    let mut exec = out.posterior.execution;
    let mut rng = posterior_stream(config.seed);
    let path: Vec<NodeId> = exec.model().path().iter().map(|s| s.state).collect();
    let theta_value = exec.model().theta().copied();
    let arena = exec.arena_mut();
    let mut xs = vec![0.0; path.len()];
    for (t, id) in path.iter().enumerate().rev() {
        xs[t] = arena.realize_real(*id, &mut rng)?;
    }
    let theta = match theta_value {
        Some(ThetaValue::Fixed(c)) => c,
        Some(ThetaValue::Node(id)) => arena.realize_real(id, &mut rng)?,
        None => return Err(Error::Model("run finished without a parameter".into())),
    };
    Ok(ExampleReport {
        log_z: out.evidence.log_z,
        per_step_log_increments: out.evidence.per_step_log_increments,
        ess: out.ess,
        resampled: out.resampled,
        theta,
        xs,
    })
}
