//! Writing a model against the `StateSpaceModel` contract: a 2-D
//! constant-velocity object seen through noisy position fixes, with one
//! missing fix. The delayed filter runs a Kalman filter inside every
//! particle, so even 16 particles give the exact evidence.

use std::sync::Arc;

use delayppl::distributions::Value;
use delayppl::graph::{DistExpr, NodeId};
use delayppl::inference::{particle_filter, FilterConfig};
use delayppl::model::{run_ssm, Ctx, GraphMode, ObservationSchedule, StateSpaceModel};
use nalgebra::{dmatrix, dvector, DMatrix, DVector};

struct ConstantVelocity {
    transition: Arc<DMatrix<f64>>,
    observation: Arc<DMatrix<f64>>,
}

impl StateSpaceModel for ConstantVelocity {
    type Param = ();
    type State = NodeId;
    type Obs = NodeId;
    type Given = DVector<f64>;

    fn parameter(&self, _ctx: &mut Ctx<'_>) -> delayppl::Result<()> {
        Ok(())
    }

    fn initial(&self, _: &(), ctx: &mut Ctx<'_>) -> delayppl::Result<NodeId> {
        ctx.assume(DistExpr::gaussian_nd(DVector::zeros(4), DMatrix::identity(4, 4)))
    }

    fn transition(&self, prev: &NodeId, _: &(), ctx: &mut Ctx<'_>) -> delayppl::Result<NodeId> {
        let noise = DMatrix::from_diagonal(&dvector![0.01, 0.01, 0.05, 0.05]);
        ctx.assume(DistExpr::gaussian_nd(&self.transition * *prev, noise))
    }

    fn observation(
        &self,
        x: &mut NodeId,
        _: &(),
        given: Option<&DVector<f64>>,
        ctx: &mut Ctx<'_>,
    ) -> delayppl::Result<NodeId> {
        let given = given.map(|y| Value::Vector(y.clone()));
        ctx.tilde(given, DistExpr::gaussian_nd(&self.observation * *x, DMatrix::identity(2, 2) * 0.2))
    }
}

fn main() -> delayppl::Result<()> {
    let model = ConstantVelocity {
        transition: Arc::new(dmatrix![
            1.0, 0.0, 1.0, 0.0;
            0.0, 1.0, 0.0, 1.0;
            0.0, 0.0, 1.0, 0.0;
            0.0, 0.0, 0.0, 1.0
        ]),
        observation: Arc::new(dmatrix![1.0, 0.0, 0.0, 0.0; 0.0, 1.0, 0.0, 0.0]),
    };
    let fixes = vec![
        Some(dvector![0.1, -0.2]),
        Some(dvector![1.2, 0.4]),
        None,
        Some(dvector![2.9, 1.7]),
        Some(dvector![4.1, 2.2]),
    ];
    let steps = fixes.len();
    let proto = run_ssm(Arc::new(model), Arc::new(ObservationSchedule::new(fixes)), steps, GraphMode::Delayed)?;
    for (particles, seed) in [(1, 0), (16, 1), (16, 2)] {
        let config = FilterConfig {
            particles,
            seed,
            ..FilterConfig::default()
        };
        let out = particle_filter(&proto, &config)?;
        println!(
            "N={particles:>2} seed={seed}: log Z = {:.10}  per step {:.4?}",
            out.evidence.log_z, out.evidence.per_step_log_increments
        );
    }
    Ok(())
}
