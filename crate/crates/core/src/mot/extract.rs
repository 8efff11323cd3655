use std::collections::BTreeMap;

use nalgebra::DVector;
use rand::Rng;

use super::{MotModel, MultiObs, MultiState};
use crate::graph::{GraphArena, NodeId};
use crate::model::{ModelExecution, SsmExecution};
use crate::Result;

/// The realized life of one object.
#[derive(Clone, Debug, PartialEq)]
pub struct TrackPath {
    pub id: usize,
    pub birth_time: usize,
    /// Full state at each time from birth on.
    pub states: Vec<DVector<f64>>,
    /// Observation index assigned at each time, if any.
    pub associations: Vec<Option<usize>>,
}

impl TrackPath {
    /// Position part of each state.
    pub fn positions(&self, domain_dim: usize) -> Vec<DVector<f64>> {
        self.states.iter().map(|x| x.rows(0, domain_dim).into_owned()).collect()
    }

    pub fn last_time(&self) -> usize {
        self.birth_time + self.states.len() - 1
    }
}

pub type MotExecution = ModelExecution<SsmExecution<MotModel>>;

/// Per-step states and observation records of an execution, oldest first.
pub fn steps(exec: &MotExecution) -> Vec<(&MultiState, &MultiObs)> {
    exec.model().path().into_iter().map(|s| (&s.state, &s.obs)).collect()
}

/// Realizes every object's states, latest first within each object, which
/// draws them jointly from their distribution given everything observed.
/// Objects are returned in order of appearance.
pub fn extract_tracks<R: Rng + ?Sized>(exec: &mut MotExecution, rng: &mut R) -> Result<Vec<TrackPath>> {
    let mut nodes: BTreeMap<usize, (usize, Vec<NodeId>, Vec<Option<usize>>)> = BTreeMap::new();
    for (state, obs) in steps(exec) {
        for (i, track) in state.tracks.iter().enumerate() {
            let entry = nodes
                .entry(track.id)
                .or_insert_with(|| (track.birth_time, Vec::new(), Vec::new()));
            entry.1.push(track.x);
            entry.2.push(obs.association.assigned.get(i).copied().flatten());
        }
    }
    let arena: &mut GraphArena = exec.arena_mut();
    let mut out = Vec::with_capacity(nodes.len());
    for (id, (birth_time, xs, associations)) in nodes {
        let mut states = vec![DVector::zeros(0); xs.len()];
        for (k, x) in xs.iter().enumerate().rev() {
            states[k] = arena.realize(*x, rng)?.to_vector();
        }
        out.push(TrackPath {
            id,
            birth_time,
            states,
            associations,
        });
    }
    Ok(out)
}
