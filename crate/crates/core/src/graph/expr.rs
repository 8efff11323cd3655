//! Lazy affine expressions over graph nodes.
//!
//! `2.0 * x + 1.0` or `&a * x + b` build an [`Affine`] without touching the
//! arena; nested affine operations fold into a single map and offset. The
//! dimensions are checked when the expression is handed to
//! [`GraphArena::assume`](super::GraphArena::assume).

use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::distributions::{Bernoulli, Categorical, Dist, Gaussian1D, GaussianND, Poisson, Uniform, UniformBox};
use crate::{Error, Result};

/// Handle to a node in a [`GraphArena`](super::GraphArena). Stable across clones.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub(crate) usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
pub enum LinearMap {
    Identity,
    Scalar(f64),
    Matrix(Arc<DMatrix<f64>>),
}

#[derive(Clone, Debug)]
pub enum Offset {
    Zero,
    Scalar(f64),
    Vector(DVector<f64>),
}

/// `map · parent + offset`.
#[derive(Clone, Debug)]
pub struct Affine {
    pub(crate) parent: NodeId,
    pub(crate) map: LinearMap,
    pub(crate) offset: Offset,
    // set when composition hit incompatible shapes; reported at assume
    pub(crate) shape_error: Option<(usize, usize)>,
}

impl Affine {
    pub fn parent(&self) -> NodeId {
        self.parent
    }

    /// Materializes the map and offset for a parent of dimension `dim`.
    pub(crate) fn resolve(&self, dim: usize) -> Result<(Arc<DMatrix<f64>>, DVector<f64>)> {
        if let Some((expected, found)) = self.shape_error {
            return Err(Error::DimensionMismatch { expected, found });
        }
        let a = match &self.map {
            LinearMap::Identity => Arc::new(DMatrix::identity(dim, dim)),
            LinearMap::Scalar(s) => Arc::new(DMatrix::identity(dim, dim) * *s),
            LinearMap::Matrix(m) => {
                if m.ncols() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: m.ncols(),
                    });
                }
                Arc::clone(m)
            }
        };
        let rows = a.nrows();
        let b = match &self.offset {
            Offset::Zero => DVector::zeros(rows),
            Offset::Scalar(s) => {
                if rows != 1 {
                    return Err(Error::DimensionMismatch { expected: rows, found: 1 });
                }
                DVector::from_element(1, *s)
            }
            Offset::Vector(v) => {
                if v.len() != rows {
                    return Err(Error::DimensionMismatch {
                        expected: rows,
                        found: v.len(),
                    });
                }
                v.clone()
            }
        };
        Ok((a, b))
    }

    fn scaled(mut self, s: f64) -> Self {
        self.map = match self.map {
            LinearMap::Identity => LinearMap::Scalar(s),
            LinearMap::Scalar(a) => LinearMap::Scalar(a * s),
            LinearMap::Matrix(m) => LinearMap::Matrix(Arc::new(m.as_ref() * s)),
        };
        self.offset = match self.offset {
            Offset::Zero => Offset::Zero,
            Offset::Scalar(b) => Offset::Scalar(b * s),
            Offset::Vector(v) => Offset::Vector(v * s),
        };
        self
    }

    fn premultiplied(mut self, m: &Arc<DMatrix<f64>>) -> Self {
        self.map = match self.map {
            LinearMap::Identity => LinearMap::Matrix(Arc::clone(m)),
            LinearMap::Scalar(a) => LinearMap::Matrix(Arc::new(m.as_ref() * a)),
            LinearMap::Matrix(inner) => {
                if m.ncols() != inner.nrows() {
                    self.shape_error.get_or_insert((m.ncols(), inner.nrows()));
                    LinearMap::Matrix(inner)
                } else {
                    LinearMap::Matrix(Arc::new(m.as_ref() * inner.as_ref()))
                }
            }
        };
        self.offset = match self.offset {
            Offset::Zero => Offset::Zero,
            Offset::Scalar(b) => {
                if m.ncols() != 1 {
                    self.shape_error.get_or_insert((m.ncols(), 1));
                }
                Offset::Vector(m.column(0) * b)
            }
            Offset::Vector(v) => {
                if m.ncols() != v.len() {
                    self.shape_error.get_or_insert((m.ncols(), v.len()));
                    Offset::Vector(v)
                } else {
                    Offset::Vector(m.as_ref() * v)
                }
            }
        };
        self
    }

    fn shifted(mut self, delta: Offset) -> Self {
        self.offset = match (self.offset, delta) {
            (o, Offset::Zero) => o,
            (Offset::Zero, d) => d,
            (Offset::Scalar(a), Offset::Scalar(b)) => Offset::Scalar(a + b),
            (Offset::Vector(a), Offset::Vector(b)) => {
                if a.len() != b.len() {
                    self.shape_error.get_or_insert((a.len(), b.len()));
                    Offset::Vector(a)
                } else {
                    Offset::Vector(a + b)
                }
            }
            (Offset::Scalar(a), Offset::Vector(v)) | (Offset::Vector(v), Offset::Scalar(a)) => {
                if v.len() != 1 {
                    self.shape_error.get_or_insert((1, v.len()));
                }
                Offset::Vector(v.add_scalar(a))
            }
        };
        self
    }
}

impl From<NodeId> for Affine {
    fn from(parent: NodeId) -> Self {
        Affine {
            parent,
            map: LinearMap::Identity,
            offset: Offset::Zero,
            shape_error: None,
        }
    }
}

impl Mul<NodeId> for f64 {
    type Output = Affine;
    fn mul(self, rhs: NodeId) -> Affine {
        Affine::from(rhs).scaled(self)
    }
}

impl Mul<Affine> for f64 {
    type Output = Affine;
    fn mul(self, rhs: Affine) -> Affine {
        rhs.scaled(self)
    }
}

impl Mul<NodeId> for &Arc<DMatrix<f64>> {
    type Output = Affine;
    fn mul(self, rhs: NodeId) -> Affine {
        Affine::from(rhs).premultiplied(self)
    }
}

impl Mul<Affine> for &Arc<DMatrix<f64>> {
    type Output = Affine;
    fn mul(self, rhs: Affine) -> Affine {
        rhs.premultiplied(self)
    }
}

impl Mul<NodeId> for &DMatrix<f64> {
    type Output = Affine;
    fn mul(self, rhs: NodeId) -> Affine {
        Affine::from(rhs).premultiplied(&Arc::new(self.clone()))
    }
}

impl Mul<Affine> for &DMatrix<f64> {
    type Output = Affine;
    fn mul(self, rhs: Affine) -> Affine {
        rhs.premultiplied(&Arc::new(self.clone()))
    }
}

impl Add<f64> for Affine {
    type Output = Affine;
    fn add(self, rhs: f64) -> Affine {
        self.shifted(Offset::Scalar(rhs))
    }
}

impl Sub<f64> for Affine {
    type Output = Affine;
    fn sub(self, rhs: f64) -> Affine {
        self.shifted(Offset::Scalar(-rhs))
    }
}

impl Add<DVector<f64>> for Affine {
    type Output = Affine;
    fn add(self, rhs: DVector<f64>) -> Affine {
        self.shifted(Offset::Vector(rhs))
    }
}

impl Add<f64> for NodeId {
    type Output = Affine;
    fn add(self, rhs: f64) -> Affine {
        Affine::from(self) + rhs
    }
}

impl Add<DVector<f64>> for NodeId {
    type Output = Affine;
    fn add(self, rhs: DVector<f64>) -> Affine {
        Affine::from(self) + rhs
    }
}

impl Neg for Affine {
    type Output = Affine;
    fn neg(self) -> Affine {
        self.scaled(-1.0)
    }
}

/// The mean of a Gaussian: a constant, or an affine function of one node.
#[derive(Clone, Debug)]
pub enum Mean {
    Const(DVector<f64>),
    Linear(Affine),
}

impl From<f64> for Mean {
    fn from(x: f64) -> Self {
        Mean::Const(DVector::from_element(1, x))
    }
}

impl From<DVector<f64>> for Mean {
    fn from(v: DVector<f64>) -> Self {
        Mean::Const(v)
    }
}

impl From<NodeId> for Mean {
    fn from(id: NodeId) -> Self {
        Mean::Linear(id.into())
    }
}

impl From<Affine> for Mean {
    fn from(a: Affine) -> Self {
        Mean::Linear(a)
    }
}

/// The right-hand side of an `assume`.
#[derive(Clone, Debug)]
pub enum DistExpr {
    /// `N(mean, covariance)`; `scalar` nodes realize to [`Value::Real`](crate::distributions::Value::Real).
    Gaussian {
        mean: Mean,
        covariance: Arc<DMatrix<f64>>,
        scalar: bool,
    },
    /// A distribution with constant parameters and no conjugate structure.
    Fixed(Dist),
}

impl DistExpr {
    /// Scalar Gaussian with the given variance.
    pub fn gaussian(mean: impl Into<Mean>, variance: f64) -> Self {
        DistExpr::Gaussian {
            mean: mean.into(),
            covariance: Arc::new(DMatrix::from_element(1, 1, variance)),
            scalar: true,
        }
    }

    pub fn gaussian_nd(mean: impl Into<Mean>, covariance: impl Into<Arc<DMatrix<f64>>>) -> Self {
        DistExpr::Gaussian {
            mean: mean.into(),
            covariance: covariance.into(),
            scalar: false,
        }
    }
}

impl From<Dist> for DistExpr {
    fn from(d: Dist) -> Self {
        DistExpr::Fixed(d)
    }
}

macro_rules! expr_from {
    ($($t:ty),*) => {
        $(impl From<$t> for DistExpr {
            fn from(d: $t) -> Self {
                DistExpr::Fixed(d.into())
            }
        })*
    };
}

expr_from!(Gaussian1D, GaussianND, Uniform, UniformBox, Poisson, Bernoulli, Categorical);
