use std::sync::Arc;

use super::{Ctx, GraphMode, Model, ModelExecution, Progress, Trace};
use crate::{Error, Result};

/// A state-space model given by its four factors: parameter, initial state,
/// transition, and observation.
///
/// The signatures enforce the factorization: a transition sees only the
/// previous state and the parameter, an observation only the current state
/// and the parameter.
pub trait StateSpaceModel: Send + Sync {
    type Param: Clone + Send + Sync;
    type State: Clone + Send + Sync;
    /// What the observation block leaves behind for one step.
    type Obs: Clone + Send + Sync;
    /// A given (conditioned-on) observation for one step.
    type Given: Send + Sync;

    fn parameter(&self, ctx: &mut Ctx<'_>) -> Result<Self::Param>;

    fn initial(&self, theta: &Self::Param, ctx: &mut Ctx<'_>) -> Result<Self::State>;

    fn transition(&self, prev: &Self::State, theta: &Self::Param, ctx: &mut Ctx<'_>) -> Result<Self::State>;

    /// `state` is mutable so per-object bookkeeping (such as which objects
    /// were detected) can live with the state.
    fn observation(
        &self,
        state: &mut Self::State,
        theta: &Self::Param,
        given: Option<&Self::Given>,
        ctx: &mut Ctx<'_>,
    ) -> Result<Self::Obs>;
}

/// Given observations per time step (index 0 is time 1). Missing or `None`
/// entries are latent.
#[derive(Clone, Debug)]
pub struct ObservationSchedule<G> {
    steps: Vec<Option<G>>,
}

impl<G> ObservationSchedule<G> {
    pub fn new(steps: Vec<Option<G>>) -> Self {
        Self { steps }
    }

    /// Nothing observed: pure prior simulation.
    pub fn empty() -> Self {
        Self { steps: Vec::new() }
    }

    pub fn fully_observed(values: impl IntoIterator<Item = G>) -> Self {
        Self {
            steps: values.into_iter().map(Some).collect(),
        }
    }

    /// Given value at time `t` (1-based).
    pub fn get(&self, t: usize) -> Option<&G> {
        self.steps.get(t.checked_sub(1)?)?.as_ref()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

pub struct SsmStep<S: StateSpaceModel> {
    pub state: S::State,
    pub obs: S::Obs,
}

impl<S: StateSpaceModel> Clone for SsmStep<S> {
    fn clone(&self) -> Self {
        Self {
            state: self.state.clone(),
            obs: self.obs.clone(),
        }
    }
}

/// Runs a [`StateSpaceModel`] one time step per segment: the parameter
/// block before time 1, then initial (t = 1) or transition, then
/// observation, then a checkpoint.
pub struct SsmExecution<S: StateSpaceModel> {
    spec: Arc<S>,
    schedule: Arc<ObservationSchedule<S::Given>>,
    horizon: usize,
    theta: Option<S::Param>,
    path: Trace<SsmStep<S>>,
}

impl<S: StateSpaceModel> Clone for SsmExecution<S> {
    fn clone(&self) -> Self {
        Self {
            spec: Arc::clone(&self.spec),
            schedule: Arc::clone(&self.schedule),
            horizon: self.horizon,
            theta: self.theta.clone(),
            path: self.path.clone(),
        }
    }
}

impl<S: StateSpaceModel> SsmExecution<S> {
    pub fn new(spec: Arc<S>, schedule: Arc<ObservationSchedule<S::Given>>, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidParameter("a state-space model needs at least one step".into()));
        }
        Ok(Self {
            spec,
            schedule,
            horizon,
            theta: None,
            path: Trace::new(),
        })
    }

    pub fn spec(&self) -> &S {
        &self.spec
    }

    /// Current time step (0 before the first segment).
    pub fn time(&self) -> usize {
        self.path.len()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn theta(&self) -> Option<&S::Param> {
        self.theta.as_ref()
    }

    /// States and observations so far, oldest first.
    pub fn path(&self) -> Vec<&SsmStep<S>> {
        self.path.to_vec()
    }

    pub fn last(&self) -> Option<&SsmStep<S>> {
        self.path.last()
    }
}

impl<S: StateSpaceModel> Model for SsmExecution<S> {
    fn resume(&mut self, ctx: &mut Ctx<'_>) -> Result<Progress> {
        let t = self.path.len() + 1;
        if t > self.horizon {
            return Ok(Progress::Done);
        }
        if self.theta.is_none() {
            self.theta = Some(self.spec.parameter(ctx)?);
        }
        let theta = self.theta.as_ref().unwrap();
        let mut state = match self.path.last() {
            None => self.spec.initial(theta, ctx)?,
            Some(prev) => self.spec.transition(&prev.state, theta, ctx)?,
        };
        let obs = self.spec.observation(&mut state, theta, self.schedule.get(t), ctx)?;
        self.path.push(SsmStep { state, obs });
        Ok(Progress::Checkpoint)
    }
}

/// Wraps a state-space model and its schedule as a fresh execution.
pub fn run_ssm<S: StateSpaceModel>(
    spec: Arc<S>,
    schedule: Arc<ObservationSchedule<S::Given>>,
    steps: usize,
    mode: GraphMode,
) -> Result<ModelExecution<SsmExecution<S>>> {
    Ok(ModelExecution::new(SsmExecution::new(spec, schedule, steps)?, mode))
}
