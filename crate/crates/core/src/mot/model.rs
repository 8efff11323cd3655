use std::sync::Arc;

use nalgebra::DVector;
use rand::seq::SliceRandom;

use super::GlobalParams;
use crate::distributions::{
    log_rising_factorial, poisson_cdf, poisson_pmf, Bernoulli, Categorical, Poisson, UniformBox, Value,
};
use crate::graph::{DistExpr, NodeId};
use crate::model::{Ctx, StateSpaceModel};
use crate::{Error, Result};

/// Predictive densities below this count as zero in the proposal.
pub const PDF_FLOOR: f64 = 1e-300;

/// One object: its identity, birth time, and current graph nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct Track {
    /// Unique within one execution.
    pub id: usize,
    pub birth_time: usize,
    /// State at the current time.
    pub x: NodeId,
    /// Observation node at the current time, present iff detected.
    pub y: Option<NodeId>,
}

/// The live objects at one time.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MultiState {
    pub t: usize,
    /// Survivors in their previous order, then births.
    pub tracks: Vec<Track>,
    next_id: usize,
}

impl MultiState {
    pub fn empty() -> Self {
        Self::default()
    }
}

/// Which observation each object was assigned at one time, by index into
/// that time's observation list. Unassigned observations are clutter.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Association {
    /// One entry per track, in track order; `None` when undetected.
    pub assigned: Vec<Option<usize>>,
    pub clutter: Vec<usize>,
}

impl Association {
    /// Assigned indices are in range and distinct, and together with the
    /// clutter they cover every observation exactly once.
    pub fn validate(&self, observations: usize) -> Result<()> {
        let mut seen = vec![false; observations];
        for j in self.assigned.iter().flatten().chain(&self.clutter) {
            if *j >= observations || seen[*j] {
                return Err(Error::Model(format!("invalid association {self:?} of {observations} observations")));
            }
            seen[*j] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Model(format!("association {self:?} leaves observations unaccounted")));
        }
        Ok(())
    }
}

/// What the observation step leaves behind.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiObs {
    pub association: Association,
    /// The observation list, when it was simulated rather than given.
    pub simulated: Option<Arc<Vec<DVector<f64>>>>,
}

/// Probability that an object seen for `age + 1` steps is still present on
/// the next: one minus the Poisson hazard `Pr[S = age] / Pr[S ≥ age]`.
/// Zero when `Pr[S ≥ age]` underflows.
pub fn survival_prob(age: i64, lifetime_rate: f64) -> Result<f64> {
    if age < 0 {
        return Err(Error::InvalidParameter(format!("object age must be nonnegative, got {age}")));
    }
    let pmf = poisson_pmf(age, lifetime_rate)?;
    let tail = if (age as f64) <= lifetime_rate {
        // below the mode 1 - cdf(age - 1) has no cancellation
        1.0 - if age == 0 { 0.0 } else { poisson_cdf(age - 1, lifetime_rate)? }
    } else {
        poisson_upper_tail(age, lifetime_rate, pmf)
    };
    if tail <= 0.0 {
        return Ok(0.0);
    }
    Ok((1.0 - pmf / tail).clamp(0.0, 1.0))
}

/// `Pr[S ≥ k]` for `k` above the mode, summed upward from `pmf(k)`. This
/// stays accurate where `1 - cdf(k - 1)` cancels.
fn poisson_upper_tail(k: i64, rate: f64, pmf_k: f64) -> f64 {
    let mut term = pmf_k;
    let mut total = 0.0;
    let mut j = k;
    while term > total * 1e-18 {
        total += term;
        j += 1;
        term *= rate / j as f64;
    }
    total
}

/// Creates a track born at `t`: the mean position is drawn uniformly on the
/// domain (velocity and acceleration means zero) and the state is assumed
/// around it with the initial covariance.
pub fn track_initial(params: &GlobalParams, ctx: &mut Ctx<'_>, id: usize, t: usize) -> Result<Track> {
    let d = params.domain_dim();
    let mut mean = DVector::zeros(params.state_dim());
    let position = ctx.simulate(&params.domain()?);
    mean.rows_mut(0, d).copy_from(&position);
    let x = ctx.assume(DistExpr::gaussian_nd(mean, Arc::clone(&params.initial_cov)))?;
    Ok(Track {
        id,
        birth_time: t,
        x,
        y: None,
    })
}

/// Moves the track one step: the new state is assumed around the
/// transition of the old one.
pub fn track_step(track: &mut Track, params: &GlobalParams, ctx: &mut Ctx<'_>) -> Result<()> {
    let mean = &params.transition * track.x;
    track.x = ctx.assume(DistExpr::gaussian_nd(mean, Arc::clone(&params.transition_cov)))?;
    track.y = None;
    Ok(())
}

/// Draws whether the track is detected. If so, its observation node is
/// assumed (never simulated here, in either graph mode) so that it can
/// later be observed at an assigned measurement or realized in simulation.
pub fn track_observation(track: &mut Track, params: &GlobalParams, ctx: &mut Ctx<'_>) -> Result<()> {
    let detected = ctx.simulate(&Bernoulli::new(params.detection_prob)?);
    track.y = if detected {
        let mean = &params.observation * track.x;
        Some(
            ctx.arena_mut()
                .assume(DistExpr::gaussian_nd(mean, Arc::clone(&params.observation_cov)))?,
        )
    } else {
        None
    };
    Ok(())
}

/// Advances to time `prev.t + 1`: each object survives with
/// [`survival_prob`] and is stepped, then a Poisson number of new objects is
/// appended. Every resulting object then draws its detection.
pub fn multi_transition(prev: &MultiState, params: &GlobalParams, ctx: &mut Ctx<'_>) -> Result<MultiState> {
    let t = prev.t + 1;
    let mut next = MultiState {
        t,
        tracks: Vec::with_capacity(prev.tracks.len() + 1),
        next_id: prev.next_id,
    };
    for track in &prev.tracks {
        let age = (t - track.birth_time - 1) as i64;
        let survive = ctx.simulate(&Bernoulli::new(survival_prob(age, params.lifetime_rate)?)?);
        if survive {
            let mut moved = track.clone();
            track_step(&mut moved, params, ctx)?;
            next.tracks.push(moved);
        }
    }
    let births = ctx.simulate(&Poisson::new(params.birth_rate)?);
    for _ in 0..births {
        let id = next.next_id;
        next.next_id += 1;
        let track = track_initial(params, ctx, id, t)?;
        next.tracks.push(track);
    }
    for track in &mut next.tracks {
        track_observation(track, params, ctx)?;
    }
    Ok(next)
}

/// Assigns the given observations to the detected tracks and yields the
/// importance weight of the assignment.
///
/// Tracks are visited in list order. Each detected track picks one of the
/// remaining observations in proportion to its predictive density, is
/// observed there (yielding the log predictive density), and yields the
/// negative log proposal probability. After the loop the log prior
/// probability of the association is yielded once, then the clutter terms:
/// the count of leftovers minus one under the clutter Poisson, and each
/// leftover under the uniform law on the domain.
pub fn associate(
    observations: &[DVector<f64>],
    tracks: &[Track],
    params: &GlobalParams,
    ctx: &mut Ctx<'_>,
) -> Result<Association> {
    let m = observations.len();
    if m == 0 {
        return Err(Error::InvalidParameter("association needs at least one observation".into()));
    }
    let mut remaining: Vec<usize> = (0..m).collect();
    let mut assigned = Vec::with_capacity(tracks.len());
    let mut detected = 0u64;
    let mut q = Vec::with_capacity(m);
    for track in tracks {
        let Some(y) = track.y else {
            assigned.push(None);
            continue;
        };
        detected += 1;
        q.clear();
        for j in &remaining {
            let p = ctx.predictive_pdf(y, &Value::Vector(observations[*j].clone()))?;
            q.push(if p < PDF_FLOOR { 0.0 } else { p });
        }
        let total: f64 = q.iter().sum();
        if total > 0.0 && total.is_finite() {
            for p in q.iter_mut() {
                *p /= total;
            }
            debug_assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let n = ctx.simulate(&Categorical::new(q.clone())?);
            let j = remaining.remove(n);
            ctx.observe_node(y, Value::Vector(observations[j].clone()))?;
            ctx.yield_weight(-q[n].ln());
            assigned.push(Some(j));
        } else {
            ctx.yield_weight(f64::NEG_INFINITY);
            assigned.push(None);
        }
    }
    ctx.yield_weight(-log_rising_factorial(m as f64 + 1.0, detected)?);
    let clutter_count = remaining.len() as i64 - 1;
    ctx.observe_value(&clutter_count, &Poisson::new(params.clutter_rate)?);
    let domain: UniformBox = params.domain()?;
    for j in &remaining {
        ctx.observe_value(&observations[*j], &domain);
    }
    let association = Association {
        assigned,
        clutter: remaining,
    };
    // a -inf weight may leave a detected track without an observation
    if association.assigned.iter().flatten().count() + association.clutter.len() == m {
        association.validate(m)?;
    }
    Ok(association)
}

/// Simulates the observation list: the detected tracks' observations are
/// realized, one plus a Poisson number of clutter points are drawn on the
/// domain, and the list is shuffled.
pub fn simulate_observations(
    tracks: &[Track],
    params: &GlobalParams,
    ctx: &mut Ctx<'_>,
) -> Result<(Vec<DVector<f64>>, Association)> {
    let mut points: Vec<(Option<usize>, DVector<f64>)> = Vec::new();
    for (i, track) in tracks.iter().enumerate() {
        if let Some(y) = track.y {
            points.push((Some(i), ctx.realize(y)?.to_vector()));
        }
    }
    let extra = ctx.simulate(&Poisson::new(params.clutter_rate)?);
    let domain = params.domain()?;
    for _ in 0..=extra {
        points.push((None, ctx.simulate(&domain)));
    }
    points.shuffle(ctx.rng());
    let mut assigned = vec![None; tracks.len()];
    let mut clutter = Vec::new();
    for (j, (owner, _)) in points.iter().enumerate() {
        match owner {
            Some(i) => assigned[*i] = Some(j),
            None => clutter.push(j),
        }
    }
    let association = Association { assigned, clutter };
    association.validate(points.len())?;
    Ok((points.into_iter().map(|(_, p)| p).collect(), association))
}

/// Observation step: associate when observations are given and nonempty,
/// simulate otherwise. An empty list counts as missing because the model
/// always produces at least one clutter point.
pub fn multi_observation(
    state: &MultiState,
    params: &GlobalParams,
    given: Option<&[DVector<f64>]>,
    ctx: &mut Ctx<'_>,
) -> Result<MultiObs> {
    match given {
        Some(obs) if !obs.is_empty() => Ok(MultiObs {
            association: associate(obs, &state.tracks, params, ctx)?,
            simulated: None,
        }),
        _ => {
            let (obs, association) = simulate_observations(&state.tracks, params, ctx)?;
            Ok(MultiObs {
                association,
                simulated: Some(Arc::new(obs)),
            })
        }
    }
}

/// The multiple-object model as a state-space model. The first state is the
/// transition out of an empty scene, so objects can appear at time 1.
#[derive(Clone, Debug)]
pub struct MotModel {
    pub params: Arc<GlobalParams>,
}

impl MotModel {
    pub fn new(params: GlobalParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params: Arc::new(params),
        })
    }
}

impl StateSpaceModel for MotModel {
    type Param = Arc<GlobalParams>;
    type State = MultiState;
    type Obs = MultiObs;
    type Given = Vec<DVector<f64>>;

    fn parameter(&self, _ctx: &mut Ctx<'_>) -> Result<Self::Param> {
        Ok(Arc::clone(&self.params))
    }

    fn initial(&self, theta: &Self::Param, ctx: &mut Ctx<'_>) -> Result<MultiState> {
        multi_transition(&MultiState::empty(), theta, ctx)
    }

    fn transition(&self, prev: &MultiState, theta: &Self::Param, ctx: &mut Ctx<'_>) -> Result<MultiState> {
        multi_transition(prev, theta, ctx)
    }

    fn observation(
        &self,
        state: &mut MultiState,
        theta: &Self::Param,
        given: Option<&Self::Given>,
        ctx: &mut Ctx<'_>,
    ) -> Result<MultiObs> {
        multi_observation(state, theta, given.map(Vec::as_slice), ctx)
    }
}
