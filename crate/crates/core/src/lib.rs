//! Delayed sampling over a lazy random-variable graph, with a state-space
//! model API, particle filtering, and a multiple-object-tracking model.
//!
//! The pieces, bottom up:
//!
//! - [`distributions`]: primitive distributions and the special functions
//!   the tracking model needs.
//! - [`graph`]: the delayed-sampling arena. Gaussian nodes linked by affine
//!   expressions are marginalized forward and conditioned backward
//!   analytically, so a chain of them behaves like a Kalman filter followed by
//!   backward sampling.
//! - [`model`]: models as resumable executions that emit log-weight
//!   increments between checkpoints, plus the [`model::StateSpaceModel`]
//!   contract.
//! - [`inference`]: importance sampling and a particle filter with systematic
//!   resampling.
//! - [`scalar_ssm`]: reference scalar state-space models and a standalone
//!   Kalman filter.
//! - [`mot`]: the multiple-object-tracking model with its data-association
//!   proposal.
//! - [`cli`]: config, dataset and result formats, and the batch commands
//!   behind the `delayppl` binary.

pub mod cli;
pub mod distributions;
mod error;
pub mod graph;
pub mod inference;
pub mod model;
pub mod mot;
pub mod scalar_ssm;

pub use error::{Error, Result};

/// The random stream type injected everywhere randomness is needed.
pub type Stream = rand_chacha::ChaCha8Rng;
