//! Importance sampling and the particle filter.
//!
//! Both drive [`ModelExecution`]s one segment at a time. Every segment of
//! every particle draws from its own random stream keyed by the run seed, the
//! segment index, and the particle index, so results do not depend on how
//! the particles are spread across worker threads.

mod filter;
mod resample;

use rand::{Rng, SeedableRng};
use rayon::prelude::*;

use crate::distributions::{log_mean_exp, log_sum_exp};
use crate::model::{Model, ModelExecution, Progress};
use crate::{Error, Result, Stream};

pub use filter::{particle_filter, EvidenceEstimate, FilterConfig, FilterOutput, ParticleSystem, PosteriorSample};
pub use resample::{ess, systematic_resample};

const CONTROL_KEY: u64 = 0x5DEE_CE66_D1CE_4E5B;
const POSTERIOR_STEP: u64 = u64::MAX;

/// Stream for particle `particle` during segment `step`.
pub fn particle_stream(seed: u64, step: usize, particle: usize) -> Stream {
    let mut rng = Stream::seed_from_u64(seed);
    rng.set_stream(step as u64);
    rng.set_word_pos((particle as u128) << 40);
    rng
}

/// Stream for the shared, single-threaded decisions made after segment
/// `step` (the resampling uniform).
pub fn control_stream(seed: u64, step: usize) -> Stream {
    let mut rng = Stream::seed_from_u64(seed ^ CONTROL_KEY);
    rng.set_stream(step as u64);
    rng
}

/// Stream reserved for post-processing the selected posterior particle, such
/// as realizing its remaining latent nodes.
pub fn posterior_stream(seed: u64) -> Stream {
    let mut rng = Stream::seed_from_u64(seed ^ CONTROL_KEY);
    rng.set_stream(POSTERIOR_STEP);
    rng
}

pub(crate) fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// Advances each particle by one segment, in parallel.
pub(crate) fn advance_all<M: Model>(
    particles: &mut [ModelExecution<M>],
    seed: u64,
    step: usize,
) -> Result<Vec<(f64, Progress)>> {
    particles
        .par_iter_mut()
        .enumerate()
        .map(|(i, p)| {
            let mut rng = particle_stream(seed, step, i);
            let seg = p.advance(&mut rng)?;
            Ok((seg.log_weight, seg.progress))
        })
        .collect()
}

/// Output of [`importance_sample`].
#[derive(Clone, Debug)]
pub struct ImportanceOutput<M> {
    pub samples: Vec<ModelExecution<M>>,
    pub log_weights: Vec<f64>,
    pub log_z: f64,
    /// All weights were `-inf`.
    pub degenerate: bool,
}

/// Runs `n` independent copies of `prototype` to completion, weighting each
/// by its total yielded log-likelihood.
///
/// Segment streams are keyed the same way as in [`particle_filter`], so with
/// the same seed a filter that never resamples sees identical draws.
pub fn importance_sample<M: Model>(
    prototype: &ModelExecution<M>,
    n: usize,
    seed: u64,
    threads: usize,
) -> Result<ImportanceOutput<M>> {
    if n == 0 {
        return Err(Error::InvalidParameter("importance sampling needs at least one sample".into()));
    }
    let pool = thread_pool(threads)?;
    let mut samples = vec![prototype.clone(); n];
    let log_weights: Vec<f64> = pool.install(|| {
        samples
            .par_iter_mut()
            .enumerate()
            .map(|(i, p)| {
                let mut total = 0.0;
                let mut step = 0;
                loop {
                    let seg = p.advance(&mut particle_stream(seed, step, i))?;
                    total += seg.log_weight;
                    step += 1;
                    if seg.progress == Progress::Done {
                        return Ok(total);
                    }
                }
            })
            .collect::<Result<_>>()
    })?;
    let degenerate = log_weights.iter().all(|w| *w == f64::NEG_INFINITY);
    let log_z = log_mean_exp(&log_weights);
    Ok(ImportanceOutput {
        samples,
        log_weights,
        log_z,
        degenerate,
    })
}

/// Index drawn in proportion to `exp(log_weights)`.
pub(crate) fn draw_index<R: Rng + ?Sized>(log_weights: &[f64], rng: &mut R) -> usize {
    let total = log_sum_exp(log_weights);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, w) in log_weights.iter().enumerate() {
        if *w == f64::NEG_INFINITY {
            continue;
        }
        acc += (w - total).exp();
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}
