//! Multi-threaded validation. Trial `t` draws from streams `2t` and `2t + 1`
//! of the master seed no matter which worker runs it, and aggregation sorts
//! by trial, so the report does not depend on the worker count.

use std::thread;

use repgap_core::theorem::{run_trial, ScenarioConfig, TrialRecord, ValidationReport, MIN_TRIALS};

use crate::Result;

pub fn validate(cfg: &ScenarioConfig, trials: usize, workers: usize) -> Result<ValidationReport> {
    if trials < MIN_TRIALS {
        return Err(repgap_core::Error::InvalidInput(format!("validation needs at least {MIN_TRIALS} trials")).into());
    }
    cfg.validate()?;
    let world = cfg.world.build()?;
    let workers = workers.clamp(1, trials);
    let results: Vec<repgap_core::Result<Vec<TrialRecord>>> = thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let world = &world;
                scope.spawn(move || {
                    (w..trials)
                        .step_by(workers)
                        .map(|t| run_trial(cfg, world, t as u64))
                        .collect::<repgap_core::Result<Vec<_>>>()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("trial worker panicked")).collect()
    });
    let mut records = Vec::with_capacity(trials);
    for r in results {
        records.extend(r?);
    }
    Ok(ValidationReport::aggregate(cfg.clone(), records))
}
