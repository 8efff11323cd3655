//! End to end: simulate a scene, filter it, and compare the posterior
//! sample's tracks with the truth. The degeneracy error is reported, not
//! hidden; a run fails when no particle can explain some observation.

use std::sync::Arc;

use delayppl::inference::{particle_filter, posterior_stream, FilterConfig};
use delayppl::model::{run_ssm, GraphMode, ObservationSchedule};
use delayppl::mot::{extract_tracks, steps, GlobalParams, MotModel};
use delayppl::Stream;
use rand::SeedableRng;

fn main() -> delayppl::Result<()> {
    let model = Arc::new(MotModel::new(GlobalParams::default())?);
    let horizon = 20;

    let mut rng = Stream::seed_from_u64(2);
    let mut truth = run_ssm(Arc::clone(&model), Arc::new(ObservationSchedule::empty()), horizon, GraphMode::Delayed)?;
    truth.run_to_end(&mut rng)?;
    let scans: Vec<_> = steps(&truth)
        .iter()
        .map(|(_, obs)| obs.simulated.as_ref().expect("simulated").as_ref().clone())
        .collect();
    let true_tracks = extract_tracks(&mut truth, &mut rng)?;
    println!("truth: {} objects, {} observations", true_tracks.len(), scans.iter().map(Vec::len).sum::<usize>());

    let proto = run_ssm(model, Arc::new(ObservationSchedule::fully_observed(scans)), horizon, GraphMode::Delayed)?;
    let config = FilterConfig {
        particles: 2048,
        seed: 7,
        ..FilterConfig::default()
    };
    match particle_filter(&proto, &config) {
        Ok(out) => {
            println!("log Z {:.3}", out.evidence.log_z);
            let mut exec = out.posterior.execution;
            for t in extract_tracks(&mut exec, &mut posterior_stream(config.seed))? {
                let start = &t.positions(2)[0];
                println!(
                    "  track {:>2} born t={:<2} at ({:+.2}, {:+.2}), alive {} steps",
                    t.id,
                    t.birth_time,
                    start[0],
                    start[1],
                    t.states.len()
                );
            }
        }
        Err(e) => println!("filter stopped: {e}"),
    }
    Ok(())
}
