use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{run_trial, ExperimentSpec, TrialRecord};
use crate::config::SystemConfig;
use crate::error::Result;

/// Seed of trial `index`: the index-th 64-bit word of the ChaCha stream of
/// the experiment seed. The same index gets the same seed at every (N, M), so
/// scenarios share their user drops.
pub fn trial_seed(experiment_seed: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(experiment_seed);
    rng.set_word_pos(2 * index as u128);
    rng.next_u64()
}

fn jobs(config: &SystemConfig, spec: &ExperimentSpec) -> Vec<(SystemConfig, u64)> {
    let mut out = Vec::with_capacity(spec.n_grid.len() * spec.m_grid.len() * spec.num_trials);
    for &n in &spec.n_grid {
        for &m in &spec.m_grid {
            let scenario = SystemConfig {
                num_irs_elements: n,
                num_bs_antennas: m,
                ..config.clone()
            };
            for t in 0..spec.num_trials {
                out.push((scenario.clone(), trial_seed(spec.seed, t)));
            }
        }
    }
    out
}

/// How trials are scheduled. Results are identical either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Rayon work stealing over trials.
    #[cfg(feature = "parallel")]
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        #[cfg(feature = "parallel")]
        return Execution::Parallel;
        #[cfg(not(feature = "parallel"))]
        Execution::Sequential
    }
}

#[cfg(feature = "parallel")]
fn run_parallel(jobs: &[(SystemConfig, u64)], spec: &ExperimentSpec) -> Result<Vec<TrialRecord>> {
    use rayon::prelude::*;
    let work = || jobs.par_iter().map(|(cfg, seed)| run_trial(cfg, spec, *seed)).collect();
    match spec.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| crate::error::Error::invalid(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    }
}

/// Runs every (N, M, trial) job and returns the records sorted by
/// (N, M, seed).
pub fn run_experiment_with(config: &SystemConfig, spec: &ExperimentSpec, execution: Execution) -> Result<Vec<TrialRecord>> {
    spec.validate()?;
    config.validate()?;
    let jobs = jobs(config, spec);
    let mut records = match execution {
        Execution::Sequential => jobs
            .iter()
            .map(|(cfg, seed)| run_trial(cfg, spec, *seed))
            .collect::<Result<Vec<_>>>()?,
        #[cfg(feature = "parallel")]
        Execution::Parallel => run_parallel(&jobs, spec)?,
    };
    records.sort_by_key(|r| (r.num_irs_elements, r.num_bs_antennas, r.seed));
    Ok(records)
}

/// [`run_experiment_with`] using the default execution: parallel when the
/// `parallel` feature is on.
pub fn run_experiment(config: &SystemConfig, spec: &ExperimentSpec) -> Result<Vec<TrialRecord>> {
    run_experiment_with(config, spec, Execution::default())
}
