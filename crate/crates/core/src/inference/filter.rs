use rand::Rng;

use super::{advance_all, control_stream, draw_index, ess, systematic_resample, thread_pool};
use crate::distributions::{log_sum_exp, normalize_log_weights};
use crate::model::{Model, ModelExecution, Progress};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct FilterConfig {
    pub particles: usize,
    /// Resample when ESS falls below this fraction of the particle count.
    pub resample_threshold: f64,
    /// Worker threads; 0 picks the number of cores.
    pub threads: usize,
    pub seed: u64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            particles: 1024,
            resample_threshold: 0.5,
            threads: 0,
            seed: 0,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.particles == 0 {
            return Err(Error::InvalidParameter("particle count must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.resample_threshold) {
            return Err(Error::InvalidParameter(format!(
                "resample threshold {} outside [0, 1]",
                self.resample_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvidenceEstimate {
    pub log_z: f64,
    /// One entry per segment: the log of the ratio between the total
    /// particle weight after and before the segment.
    pub per_step_log_increments: Vec<f64>,
}

/// One execution selected in proportion to the final weights.
#[derive(Clone, Debug)]
pub struct PosteriorSample<M> {
    pub execution: ModelExecution<M>,
    pub index: usize,
    pub log_z: f64,
}

#[derive(Clone, Debug)]
pub struct FilterOutput<M> {
    pub evidence: EvidenceEstimate,
    pub posterior: PosteriorSample<M>,
    /// ESS after each segment, before any resampling.
    pub ess: Vec<f64>,
    /// Whether resampling fired after each segment.
    pub resampled: Vec<bool>,
    pub particles: ParticleSystem<M>,
}

/// N executions with their log-weights.
#[derive(Clone, Debug)]
pub struct ParticleSystem<M> {
    pub particles: Vec<ModelExecution<M>>,
    pub log_weights: Vec<f64>,
    /// Ancestor indices chosen at each segment; the identity when no
    /// resampling happened.
    pub ancestors: Vec<Vec<usize>>,
    /// Evidence of completed resampling epochs.
    pub log_evidence: f64,
}

impl<M: Model> ParticleSystem<M> {
    pub fn new(prototype: &ModelExecution<M>, n: usize) -> Self {
        Self {
            particles: vec![prototype.clone(); n],
            log_weights: vec![0.0; n],
            ancestors: Vec::new(),
            log_evidence: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Evidence including the current, unfinished epoch.
    pub fn current_log_evidence(&self) -> f64 {
        self.log_evidence + log_sum_exp(&self.log_weights) - (self.len() as f64).ln()
    }

    /// Replaces the particle set by copies of the given ancestors and closes
    /// the epoch.
    pub fn resample(&mut self, ancestors: &[usize]) {
        self.log_evidence = self.current_log_evidence();
        self.particles = ancestors.iter().map(|&a| self.particles[a].clone()).collect();
        self.log_weights = vec![0.0; self.particles.len()];
    }
}

/// Runs a particle filter over `prototype`, aligning particles at every
/// checkpoint. Increments are recorded at each checkpoint; weights are reset
/// only when resampling fires.
///
/// A single particle is allowed; with delayed sampling on a
/// linear-Gaussian model it already gives the exact likelihood.
pub fn particle_filter<M: Model>(prototype: &ModelExecution<M>, config: &FilterConfig) -> Result<FilterOutput<M>> {
    config.validate()?;
    let n = config.particles;
    let pool = thread_pool(config.threads)?;
    let mut system = ParticleSystem::new(prototype, n);
    let mut increments = Vec::new();
    let mut ess_trace = Vec::new();
    let mut resampled = Vec::new();
    let mut step = 0;
    loop {
        let before = log_sum_exp(&system.log_weights);
        let results = pool.install(|| advance_all(&mut system.particles, config.seed, step))?;
        step += 1;
        let progress = results[0].1;
        if results.iter().any(|(_, p)| *p != progress) {
            return Err(Error::Misaligned { step });
        }
        for (lw, (w, _)) in system.log_weights.iter_mut().zip(&results) {
            if w.is_nan() {
                return Err(Error::Model(format!("log-weight is NaN at step {step}")));
            }
            *lw += w;
        }
        let had_weights = results.iter().any(|(w, _)| *w != 0.0);
        if progress == Progress::Done && !had_weights {
            break;
        }
        let after = log_sum_exp(&system.log_weights);
        if after == f64::NEG_INFINITY {
            return Err(Error::Degenerate { step });
        }
        increments.push(after - before);
        let e = ess(&system.log_weights);
        ess_trace.push(e);
        let fire = progress == Progress::Checkpoint && e < config.resample_threshold * n as f64;
        resampled.push(fire);
        if fire {
            let (probs, _) = normalize_log_weights(&system.log_weights);
            let u: f64 = control_stream(config.seed, step).random();
            let ancestors = systematic_resample(&probs, u);
            system.resample(&ancestors);
            system.ancestors.push(ancestors);
        } else {
            system.ancestors.push((0..n).collect());
        }
        if progress == Progress::Done {
            break;
        }
    }
    let log_z = system.current_log_evidence();
    if log_z == f64::NEG_INFINITY {
        return Err(Error::Degenerate { step });
    }
    let index = draw_index(&system.log_weights, &mut control_stream(config.seed, step + 1));
    let posterior = PosteriorSample {
        execution: system.particles[index].clone(),
        index,
        log_z,
    };
    Ok(FilterOutput {
        evidence: EvidenceEstimate {
            log_z,
            per_step_log_increments: increments,
        },
        posterior,
        ess: ess_trace,
        resampled,
        particles: system,
    })
}
