//! The delayed-sampling graph.
//!
//! Random variables are created lazily with [`GraphArena::assume`] and stay
//! [`NodeState::Uninitialized`] until something needs them. Gaussian nodes
//! whose mean is an affine function of another Gaussian node form chains.
//! When a node is needed, [`GraphArena::graft`] marginalizes the chain forward
//! in closed form; when a node is realized or observed, its parent is
//! conditioned on the value. Over a linear-Gaussian state-space model this is
//! a Kalman filter forward pass, and realizing the states from last to first
//! samples the exact posterior backward.
//!
//! The currently marginalized nodes form disjoint paths: a node has at most
//! one marginalized child at a time. Grafting a node whose parent already has
//! a different marginalized child first prunes (realizes) that child's chain.
//!
//! Only linear-Gaussian parent/child pairs are handled analytically. A
//! Gaussian whose mean depends on any other kind of node realizes that node
//! first.

mod conjugate;
mod expr;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

pub use conjugate::{condition_backward, marginalize_forward, GaussianMarginal};
pub use expr::{Affine, DistExpr, LinearMap, Mean, NodeId, Offset};

use crate::distributions::{check_symmetric, Dist, Value};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeState {
    Uninitialized,
    Marginalized,
    Realized,
}

#[derive(Clone, Debug)]
struct Link {
    parent: NodeId,
    a: Arc<DMatrix<f64>>,
    b: DVector<f64>,
}

#[derive(Clone, Debug)]
enum Prior {
    Gaussian {
        link: Option<Link>,
        // constant mean when there is no link
        mean: Option<DVector<f64>>,
        noise: Arc<DMatrix<f64>>,
        scalar: bool,
    },
    Fixed(Dist),
}

#[derive(Clone, Debug)]
enum Marginal {
    Gaussian(GaussianMarginal),
    Fixed(Dist),
}

#[derive(Clone, Debug)]
struct Node {
    prior: Prior,
    state: NodeState,
    marginal: Option<Marginal>,
    value: Option<Value>,
    child: Option<NodeId>,
    dim: usize,
}

impl Node {
    fn link(&self) -> Option<&Link> {
        match &self.prior {
            Prior::Gaussian { link, .. } => link.as_ref(),
            Prior::Fixed(_) => None,
        }
    }

    fn is_gaussian(&self) -> bool {
        matches!(self.prior, Prior::Gaussian { .. })
    }
}

/// Arena of random nodes owned by one model execution.
///
/// Cloning is a logical deep copy: node storage is shared copy-on-write, so
/// a clone never observes mutations made through another clone, and node
/// ids stay valid in both.
#[derive(Clone, Debug, Default)]
pub struct GraphArena {
    nodes: Vec<Arc<Node>>,
}

impl GraphArena {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn node(&self, id: NodeId) -> Result<&Node> {
        self.nodes.get(id.0).map(Arc::as_ref).ok_or(Error::UnknownNode(id.0))
    }

    fn node_mut(&mut self, id: NodeId) -> &mut Node {
        Arc::make_mut(&mut self.nodes[id.0])
    }

    pub fn state(&self, id: NodeId) -> Result<NodeState> {
        Ok(self.node(id)?.state)
    }

    pub fn value(&self, id: NodeId) -> Option<&Value> {
        self.nodes.get(id.0).and_then(|n| n.value.as_ref())
    }

    /// Current Gaussian marginal of a marginalized Gaussian node.
    pub fn marginal(&self, id: NodeId) -> Option<&GaussianMarginal> {
        match self.nodes.get(id.0)?.marginal.as_ref()? {
            Marginal::Gaussian(g) => Some(g),
            Marginal::Fixed(_) => None,
        }
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.nodes.get(id.0)?.link().map(|l| l.parent)
    }

    pub fn marginalized_child(&self, id: NodeId) -> Option<NodeId> {
        self.nodes.get(id.0)?.child
    }

    pub fn dim(&self, id: NodeId) -> Result<usize> {
        Ok(self.node(id)?.dim)
    }

    /// Adds a node without simulating anything.
    pub fn assume(&mut self, expr: impl Into<DistExpr>) -> Result<NodeId> {
        let (prior, dim) = match expr.into() {
            DistExpr::Fixed(d) => {
                let dim = d.dim();
                (Prior::Fixed(d), dim)
            }
            DistExpr::Gaussian {
                mean,
                covariance,
                scalar,
            } => {
                if !covariance.is_square() {
                    return Err(Error::DimensionMismatch {
                        expected: covariance.nrows(),
                        found: covariance.ncols(),
                    });
                }
                check_symmetric(&covariance)?;
                if (0..covariance.nrows()).any(|i| !(covariance[(i, i)] >= 0.0)) {
                    return Err(Error::InvalidParameter("covariance has a negative diagonal".into()));
                }
                let dim = covariance.nrows();
                let (link, mean) = match mean {
                    Mean::Const(m) => {
                        if m.len() != dim {
                            return Err(Error::DimensionMismatch {
                                expected: dim,
                                found: m.len(),
                            });
                        }
                        (None, Some(m))
                    }
                    Mean::Linear(affine) => {
                        let parent_dim = self.node(affine.parent)?.dim;
                        let (a, b) = affine.resolve(parent_dim)?;
                        if a.nrows() != dim {
                            return Err(Error::DimensionMismatch {
                                expected: dim,
                                found: a.nrows(),
                            });
                        }
                        (
                            Some(Link {
                                parent: affine.parent,
                                a,
                                b,
                            }),
                            None,
                        )
                    }
                };
                if scalar && dim != 1 {
                    return Err(Error::DimensionMismatch { expected: 1, found: dim });
                }
                (
                    Prior::Gaussian {
                        link,
                        mean,
                        noise: covariance,
                        scalar,
                    },
                    dim,
                )
            }
        };
        let id = NodeId(self.nodes.len());
        self.nodes.push(Arc::new(Node {
            prior,
            state: NodeState::Uninitialized,
            marginal: None,
            value: None,
            child: None,
            dim,
        }));
        Ok(id)
    }

    /// Makes `id` the tip of its marginalized path: marginalizes any
    /// uninitialized ancestors forward and prunes any marginalized
    /// descendants.
    pub fn graft<R: Rng + ?Sized>(&mut self, id: NodeId, rng: &mut R) -> Result<()> {
        match self.node(id)?.state {
            NodeState::Realized => return Ok(()),
            NodeState::Marginalized => {
                if let Some(child) = self.node(id)?.child {
                    self.prune(child, rng)?;
                }
                return Ok(());
            }
            NodeState::Uninitialized => {}
        }

        // Walk up through uninitialized Gaussian ancestors; the chain is
        // processed top-down so long unobserved runs do not recurse.
        let mut chain = vec![id];
        loop {
            let top = *chain.last().unwrap();
            let Some(parent) = self.node(top)?.link().map(|l| l.parent) else {
                break;
            };
            let p = self.node(parent)?;
            match (p.is_gaussian(), p.state) {
                (_, NodeState::Realized) => break,
                (false, _) => {
                    self.realize(parent, rng)?;
                    break;
                }
                (true, NodeState::Marginalized) => {
                    if let Some(child) = p.child {
                        self.prune(child, rng)?;
                    }
                    break;
                }
                (true, NodeState::Uninitialized) => chain.push(parent),
            }
        }
        for &node in chain.iter().rev() {
            self.marginalize(node)?;
        }
        debug_assert!(self.local_invariants(id));
        Ok(())
    }

    /// Computes the marginal of an uninitialized node whose parent, if any,
    /// is realized or a childless marginalized Gaussian.
    fn marginalize(&mut self, id: NodeId) -> Result<()> {
        let node = self.node(id)?;
        let (marginal, parent_child) = match &node.prior {
            Prior::Fixed(d) => (Marginal::Fixed(d.clone()), None),
            Prior::Gaussian { link: None, mean, noise, .. } => (
                Marginal::Gaussian(GaussianMarginal::new(mean.clone().unwrap(), noise.as_ref().clone())),
                None,
            ),
            Prior::Gaussian {
                link: Some(link), noise, ..
            } => {
                let parent = self.node(link.parent)?;
                match (&parent.state, &parent.value, &parent.marginal) {
                    (NodeState::Realized, Some(v), _) => {
                        let v = v.to_vector();
                        if v.len() != link.a.ncols() {
                            return Err(Error::DimensionMismatch {
                                expected: link.a.ncols(),
                                found: v.len(),
                            });
                        }
                        let mean = link.a.as_ref() * v + &link.b;
                        (Marginal::Gaussian(GaussianMarginal::new(mean, noise.as_ref().clone())), None)
                    }
                    (NodeState::Marginalized, _, Some(Marginal::Gaussian(pm))) => {
                        debug_assert!(parent.child.is_none());
                        (
                            Marginal::Gaussian(marginalize_forward(pm, &link.a, &link.b, noise)),
                            Some(link.parent),
                        )
                    }
                    _ => unreachable!("parent of a grafted node must be realized or marginalized"),
                }
            }
        };
        if let Some(parent) = parent_child {
            self.node_mut(parent).child = Some(id);
        }
        let node = self.node_mut(id);
        node.marginal = Some(marginal);
        node.state = NodeState::Marginalized;
        Ok(())
    }

    /// Realizes a marginalized node together with every marginalized
    /// descendant, deepest first.
    fn prune<R: Rng + ?Sized>(&mut self, id: NodeId, rng: &mut R) -> Result<()> {
        let mut path = vec![id];
        while let Some(child) = self.node(*path.last().unwrap())?.child {
            path.push(child);
        }
        for &node in path.iter().rev() {
            let value = self.draw(node, rng)?;
            self.set_realized(node, value)?;
        }
        Ok(())
    }

    fn draw<R: Rng + ?Sized>(&self, id: NodeId, rng: &mut R) -> Result<Value> {
        let node = self.node(id)?;
        debug_assert!(node.child.is_none());
        match node.marginal.as_ref().expect("drawing from an unmarginalized node") {
            Marginal::Fixed(d) => Ok(d.sample(rng)),
            Marginal::Gaussian(g) => {
                let x = g.sample(rng)?;
                Ok(gaussian_value(&node.prior, x))
            }
        }
    }

    /// Records the value and conditions the marginalized parent on it.
    fn set_realized(&mut self, id: NodeId, value: Value) -> Result<()> {
        let node = self.node(id)?;
        if let Some(link) = node.link() {
            let parent = self.node(link.parent)?;
            if parent.state == NodeState::Marginalized && parent.child == Some(id) {
                let Some(Marginal::Gaussian(pm)) = &parent.marginal else {
                    unreachable!("marginalized Gaussian parent without a Gaussian marginal");
                };
                let Prior::Gaussian { noise, .. } = &node.prior else {
                    unreachable!()
                };
                let updated = condition_backward(pm, &link.a, &link.b, noise, &value.to_vector())?;
                let parent_id = link.parent;
                let p = self.node_mut(parent_id);
                p.marginal = Some(Marginal::Gaussian(updated));
                p.child = None;
            }
        }
        let node = self.node_mut(id);
        node.value = Some(value);
        node.marginal = None;
        node.child = None;
        node.state = NodeState::Realized;
        Ok(())
    }

    /// Forces a value for the node, sampling it from its current marginal.
    /// Realizing an already realized node returns the stored value.
    pub fn realize<R: Rng + ?Sized>(&mut self, id: NodeId, rng: &mut R) -> Result<Value> {
        if let Some(v) = &self.node(id)?.value {
            return Ok(v.clone());
        }
        self.graft(id, rng)?;
        let value = self.draw(id, rng)?;
        self.set_realized(id, value.clone())?;
        Ok(value)
    }

    /// Realizes the node at `value` and returns its log density under the
    /// node's marginal. Out-of-support values give `-inf`.
    pub fn observe<R: Rng + ?Sized>(&mut self, id: NodeId, value: Value, rng: &mut R) -> Result<f64> {
        if self.node(id)?.state == NodeState::Realized {
            return Err(Error::AlreadyRealized(id.0));
        }
        let log_weight = self.predictive_log_density(id, &value, rng)?;
        let node = self.node(id)?;
        let value = match (&node.prior, value) {
            // keep the node's value kind consistent with what a draw would give
            (Prior::Gaussian { .. }, v) => gaussian_value(&node.prior, v.to_vector()),
            (_, v) => v,
        };
        self.set_realized(id, value)?;
        Ok(log_weight)
    }

    /// Log density of `candidate` under the node's current marginal, grafting
    /// it if needed but not realizing it.
    pub fn predictive_log_density<R: Rng + ?Sized>(
        &mut self,
        id: NodeId,
        candidate: &Value,
        rng: &mut R,
    ) -> Result<f64> {
        if self.node(id)?.state == NodeState::Realized {
            return Err(Error::AlreadyRealized(id.0));
        }
        self.graft(id, rng)?;
        let node = self.node(id)?;
        match node.marginal.as_ref().expect("grafted node has a marginal") {
            Marginal::Fixed(d) => d.log_density(candidate),
            Marginal::Gaussian(g) => {
                let x = match candidate {
                    Value::Real(_) | Value::Vector(_) => candidate.to_vector(),
                    other => return Err(Error::TypeMismatch(format!("{other:?} for a Gaussian node"))),
                };
                g.log_density(&x)
            }
        }
    }

    pub fn predictive_pdf<R: Rng + ?Sized>(&mut self, id: NodeId, candidate: &Value, rng: &mut R) -> Result<f64> {
        Ok(self.predictive_log_density(id, candidate, rng)?.exp())
    }

    /// Realizes a scalar node and returns its value as a real.
    pub fn realize_real<R: Rng + ?Sized>(&mut self, id: NodeId, rng: &mut R) -> Result<f64> {
        let v = self.realize(id, rng)?;
        v.as_real()
            .ok_or_else(|| Error::TypeMismatch(format!("expected a scalar, node {} holds {v:?}", id.0)))
    }

    /// `coefficient * term` where both sides are random. The product is not
    /// linear-Gaussian, so the coefficient is realized and the result stays
    /// affine in `term`'s parent.
    pub fn product<R: Rng + ?Sized>(
        &mut self,
        coefficient: NodeId,
        term: impl Into<Affine>,
        rng: &mut R,
    ) -> Result<Affine> {
        let c = self.realize_real(coefficient, rng)?;
        Ok(c * term.into())
    }

    /// `term + other` where `other` is a second random node. Only one
    /// marginalized parent is supported, so `other` is realized and folded
    /// into the offset.
    pub fn sum<R: Rng + ?Sized>(&mut self, term: impl Into<Affine>, other: NodeId, rng: &mut R) -> Result<Affine> {
        let v = self.realize(other, rng)?;
        Ok(match v {
            Value::Vector(v) => term.into() + v,
            v => term.into() + v.as_real().unwrap_or_default(),
        })
    }

    fn local_invariants(&self, id: NodeId) -> bool {
        let Ok(node) = self.node(id) else { return false };
        if node.state != NodeState::Marginalized || node.child.is_some() {
            return false;
        }
        match node.link() {
            Some(link) => {
                let p = &self.nodes[link.parent.0];
                p.state != NodeState::Marginalized || !p.is_gaussian() || p.child == Some(id)
            }
            None => true,
        }
    }

    /// Full structural check: value/marginal presence matches each state, every
    /// marginalized child pointer is reciprocated, and no node has more than
    /// one marginalized child.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let mut marginalized_children = vec![0usize; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            match node.state {
                NodeState::Uninitialized => {
                    if node.value.is_some() || node.marginal.is_some() || node.child.is_some() {
                        return Err(format!("uninitialized node {i} carries state"));
                    }
                }
                NodeState::Marginalized => {
                    if node.value.is_some() || node.marginal.is_none() {
                        return Err(format!("marginalized node {i} has a value or lacks a marginal"));
                    }
                }
                NodeState::Realized => {
                    if node.value.is_none() || node.marginal.is_some() || node.child.is_some() {
                        return Err(format!("realized node {i} has a marginal or lacks a value"));
                    }
                }
            }
            if let Some(child) = node.child {
                let c = &self.nodes[child.0];
                if c.state != NodeState::Marginalized || c.link().map(|l| l.parent.0) != Some(i) {
                    return Err(format!("node {i} points at {} which is not its marginalized child", child.0));
                }
            }
            if node.state == NodeState::Marginalized {
                if let Some(link) = node.link() {
                    let p = &self.nodes[link.parent.0];
                    if p.state == NodeState::Marginalized {
                        marginalized_children[link.parent.0] += 1;
                        if p.child != Some(NodeId(i)) {
                            return Err(format!(
                                "node {i} is marginalized under {} without being its child",
                                link.parent.0
                            ));
                        }
                    }
                }
            }
        }
        if let Some(i) = marginalized_children.iter().position(|&c| c > 1) {
            return Err(format!("node {i} has more than one marginalized child"));
        }
        Ok(())
    }
}

fn gaussian_value(prior: &Prior, x: DVector<f64>) -> Value {
    match prior {
        Prior::Gaussian { scalar: true, .. } => Value::Real(x[0]),
        _ => Value::Vector(x),
    }
}
