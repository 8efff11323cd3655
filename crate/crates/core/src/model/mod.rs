//! Models as resumable executions.
//!
//! A model runs in segments. Each call to [`Model::resume`] performs one
//! segment of work against a [`Ctx`], which owns the graph operations and
//! collects the log-weight increments the segment produces. The end of a
//! segment is a checkpoint: the point where particle systems compare and
//! resample executions, and where an execution can be cloned.
//!
//! [`ModelExecution`] wraps a model with its graph arena and exposes the
//! segments either as a flat [`WeightEvent`] stream or one segment at a time.

mod ssm;
mod trace;

use std::collections::VecDeque;

use crate::distributions::{Distribution, Value};
use crate::graph::{Affine, DistExpr, GraphArena, NodeId};
use crate::{Result, Stream};

pub use ssm::{run_ssm, ObservationSchedule, SsmExecution, SsmStep, StateSpaceModel};
pub use trace::Trace;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WeightEvent {
    LogWeight(f64),
    Checkpoint,
    Done,
}

/// How a segment ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Progress {
    Checkpoint,
    Done,
}

/// Whether `~` defers simulation to the graph or simulates immediately.
/// Eager mode is plain forward simulation, which turns a particle filter into
/// the bootstrap filter.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum GraphMode {
    #[default]
    Delayed,
    Eager,
}

/// Everything a model segment may touch.
pub struct Ctx<'a> {
    arena: &'a mut GraphArena,
    rng: &'a mut Stream,
    mode: GraphMode,
    weights: &'a mut Vec<f64>,
}

impl<'a> Ctx<'a> {
    pub fn new(arena: &'a mut GraphArena, rng: &'a mut Stream, mode: GraphMode, weights: &'a mut Vec<f64>) -> Self {
        Self {
            arena,
            rng,
            mode,
            weights,
        }
    }

    pub fn mode(&self) -> GraphMode {
        self.mode
    }

    pub fn arena(&self) -> &GraphArena {
        self.arena
    }

    pub fn arena_mut(&mut self) -> &mut GraphArena {
        self.arena
    }

    pub fn rng(&mut self) -> &mut Stream {
        self.rng
    }

    /// The `~` statement. Without a given value the node is assumed (and,
    /// in eager mode, realized at once). With a given value the node is
    /// observed and its log-likelihood yielded.
    pub fn tilde(&mut self, given: Option<Value>, expr: impl Into<DistExpr>) -> Result<NodeId> {
        let id = self.arena.assume(expr)?;
        match given {
            Some(v) => {
                let w = self.arena.observe(id, v, self.rng)?;
                self.weights.push(w);
            }
            None => {
                if self.mode == GraphMode::Eager {
                    self.arena.realize(id, self.rng)?;
                }
            }
        }
        Ok(id)
    }

    pub fn assume(&mut self, expr: impl Into<DistExpr>) -> Result<NodeId> {
        self.tilde(None, expr)
    }

    /// The `<~` statement: draw immediately, no graph node.
    pub fn simulate<D: Distribution>(&mut self, dist: &D) -> D::Value {
        dist.sample(self.rng)
    }

    /// The `~>` statement: yield the log density of a known value.
    pub fn observe_value<D: Distribution>(&mut self, value: &D::Value, dist: &D) -> f64 {
        let w = dist.log_density(value);
        self.weights.push(w);
        w
    }

    /// Observes an existing node and yields its log predictive density.
    pub fn observe_node(&mut self, id: NodeId, value: Value) -> Result<f64> {
        let w = self.arena.observe(id, value, self.rng)?;
        self.weights.push(w);
        Ok(w)
    }

    /// Explicit `yield` of a log-weight increment.
    pub fn yield_weight(&mut self, w: f64) {
        self.weights.push(w);
    }

    pub fn realize(&mut self, id: NodeId) -> Result<Value> {
        self.arena.realize(id, self.rng)
    }

    pub fn realize_real(&mut self, id: NodeId) -> Result<f64> {
        self.arena.realize_real(id, self.rng)
    }

    pub fn predictive_pdf(&mut self, id: NodeId, candidate: &Value) -> Result<f64> {
        self.arena.predictive_pdf(id, candidate, self.rng)
    }

    pub fn product(&mut self, coefficient: NodeId, term: impl Into<Affine>) -> Result<Affine> {
        self.arena.product(coefficient, term, self.rng)
    }

    /// Log-weights yielded so far in this segment.
    pub fn yielded(&self) -> &[f64] {
        self.weights
    }
}

/// A pausable model. Implementations keep whatever state they need to pick
/// up where the previous segment stopped; they must be cheap to clone at a
/// checkpoint.
pub trait Model: Clone + Send + Sync {
    fn resume(&mut self, ctx: &mut Ctx<'_>) -> Result<Progress>;
}

/// Result of running one segment.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    /// Sum of the segment's log-weight increments, in emission order.
    pub log_weight: f64,
    pub increments: usize,
    pub progress: Progress,
}

/// A model together with its graph arena.
#[derive(Clone, Debug)]
pub struct ModelExecution<M> {
    model: M,
    arena: GraphArena,
    mode: GraphMode,
    pending: VecDeque<WeightEvent>,
    finished: bool,
    checkpoints: usize,
}

impl<M: Model> ModelExecution<M> {
    pub fn new(model: M, mode: GraphMode) -> Self {
        Self {
            model,
            arena: GraphArena::new(),
            mode,
            pending: VecDeque::new(),
            finished: false,
            checkpoints: 0,
        }
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    pub fn arena(&self) -> &GraphArena {
        &self.arena
    }

    pub fn arena_mut(&mut self) -> &mut GraphArena {
        &mut self.arena
    }

    /// The model and its arena, borrowed together.
    pub fn parts_mut(&mut self) -> (&mut M, &mut GraphArena) {
        (&mut self.model, &mut self.arena)
    }

    pub fn mode(&self) -> GraphMode {
        self.mode
    }

    pub fn is_finished(&self) -> bool {
        self.finished && self.pending.is_empty()
    }

    /// Checkpoints passed so far.
    pub fn checkpoints(&self) -> usize {
        self.checkpoints
    }

    fn run_segment(&mut self, rng: &mut Stream) -> Result<(Vec<f64>, Progress)> {
        if self.finished {
            return Ok((Vec::new(), Progress::Done));
        }
        let mut weights = Vec::new();
        let progress = {
            let mut ctx = Ctx::new(&mut self.arena, rng, self.mode, &mut weights);
            self.model.resume(&mut ctx)?
        };
        match progress {
            Progress::Checkpoint => self.checkpoints += 1,
            Progress::Done => self.finished = true,
        }
        Ok((weights, progress))
    }

    /// Fiber-style access: the next event of the weight stream.
    pub fn next_event(&mut self, rng: &mut Stream) -> Result<WeightEvent> {
        if self.pending.is_empty() {
            let (weights, progress) = self.run_segment(rng)?;
            self.pending.extend(weights.into_iter().map(WeightEvent::LogWeight));
            self.pending.push_back(match progress {
                Progress::Checkpoint => WeightEvent::Checkpoint,
                Progress::Done => WeightEvent::Done,
            });
        }
        Ok(self.pending.pop_front().expect("segment always ends with a marker"))
    }

    /// Runs to the next checkpoint (or the end) and sums the increments.
    pub fn advance(&mut self, rng: &mut Stream) -> Result<Segment> {
        let mut log_weight = 0.0;
        let mut increments = 0;
        // drain anything left over from event-wise stepping first
        while let Some(event) = self.pending.pop_front() {
            match event {
                WeightEvent::LogWeight(w) => {
                    log_weight += w;
                    increments += 1;
                }
                WeightEvent::Checkpoint => {
                    return Ok(Segment {
                        log_weight,
                        increments,
                        progress: Progress::Checkpoint,
                    })
                }
                WeightEvent::Done => {
                    return Ok(Segment {
                        log_weight,
                        increments,
                        progress: Progress::Done,
                    })
                }
            }
        }
        let (weights, progress) = self.run_segment(rng)?;
        for w in &weights {
            log_weight += w;
        }
        Ok(Segment {
            log_weight,
            increments: increments + weights.len(),
            progress,
        })
    }

    /// Runs to completion, returning the total log-weight.
    pub fn run_to_end(&mut self, rng: &mut Stream) -> Result<f64> {
        let mut total = 0.0;
        loop {
            let seg = self.advance(rng)?;
            total += seg.log_weight;
            if seg.progress == Progress::Done {
                return Ok(total);
            }
        }
    }
}
