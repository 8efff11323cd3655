//! One data-association step by hand: three detected objects with known
//! predictive positions, five observations. Running the proposal many
//! times and weighting each outcome gives the association posterior.

use std::collections::BTreeMap;

use delayppl::distributions::log_sum_exp;
use delayppl::graph::{DistExpr, GraphArena};
use delayppl::model::{Ctx, GraphMode};
use delayppl::mot::{associate, GlobalParams, Track};
use delayppl::Stream;
use nalgebra::{dvector, DMatrix, DVector};
use rand::SeedableRng;

fn main() -> delayppl::Result<()> {
    let params = GlobalParams::default();
    let centres = [dvector![0.0, 0.0], dvector![1.0, 0.5], dvector![-4.0, 3.0]];
    let observations: Vec<DVector<f64>> = vec![
        dvector![0.2, -0.1],
        dvector![0.9, 0.7],
        dvector![-3.5, 3.2],
        dvector![6.0, -6.0],
        dvector![0.5, 0.2],
    ];

    let mut outcomes: BTreeMap<Vec<Option<usize>>, Vec<f64>> = BTreeMap::new();
    for seed in 0..20_000u64 {
        let mut arena = GraphArena::new();
        let mut rng = Stream::seed_from_u64(seed);
        let mut weights = Vec::new();
        let tracks: Vec<Track> = centres
            .iter()
            .enumerate()
            .map(|(id, c)| {
                let x = arena.assume(DistExpr::gaussian_nd(c.clone(), DMatrix::identity(2, 2) * 0.3)).unwrap();
                let y = arena.assume(DistExpr::gaussian_nd(x, DMatrix::identity(2, 2) * 0.1)).unwrap();
                Track {
                    id,
                    birth_time: 1,
                    x,
                    y: Some(y),
                }
            })
            .collect();
        let mut ctx = Ctx::new(&mut arena, &mut rng, GraphMode::Delayed, &mut weights);
        let a = associate(&observations, &tracks, &params, &mut ctx)?;
        outcomes.entry(a.assigned).or_default().push(weights.iter().sum());
    }

    let all: Vec<f64> = outcomes.values().flatten().copied().collect();
    let total = log_sum_exp(&all);
    let mut ranked: Vec<(f64, &Vec<Option<usize>>)> =
        outcomes.iter().map(|(k, w)| ((log_sum_exp(w) - total).exp(), k)).collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0));
    for (p, assigned) in ranked.iter().take(5) {
        println!("{assigned:?}  posterior {p:.4}");
    }
    Ok(())
}
