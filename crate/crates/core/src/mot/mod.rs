//! Multiple-object tracking.
//!
//! An unknown, changing number of objects move in a box with
//! constant-acceleration linear-Gaussian dynamics. Each is detected with
//! some probability per step and then observed with Gaussian noise on its
//! position; at least one clutter point appears every step. Objects appear
//! as a Poisson process and live for a Poisson number of steps.
//!
//! Each object's states stay lazy in the graph, so inside one particle every
//! object is tracked by its own Kalman filter. Observations are assigned to
//! detected objects by proposing from the objects' predictive densities and
//! correcting the weight by the prior over assignments.

mod extract;
mod model;
mod params;

pub use extract::{extract_tracks, steps, MotExecution, TrackPath};
pub use model::{
    associate, multi_observation, multi_transition, simulate_observations, survival_prob, track_initial,
    track_observation, track_step, Association, MotModel, MultiObs, MultiState, Track, PDF_FLOOR,
};
pub use params::GlobalParams;
