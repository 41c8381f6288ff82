//! Paired Monte Carlo trials, the benchmark baselines and result emission.
//!
//! A trial draws one geometry and channel set and runs every requested method
//! on it. Random draws come from separate ChaCha streams of the trial seed so
//! adding or removing a method never shifts another method's randomness.

mod baselines;
mod emit;
mod experiment;
mod trial;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};

pub use baselines::{conventional_bf, random_pac, ConventionalMode};
pub use emit::{emit_results, git_blob_hash, summarize, SummaryRow, NULL_TOKEN, SUMMARY_HEADER};
pub use experiment::{run_experiment, run_experiment_with, trial_seed, Execution};
pub use trial::{run_trial, MethodOutcome, Timings, TrialRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    /// Correlation clustering, ZF, stage 1 then stage 2.
    Proposed,
    /// ZF beams shared by time division instead of NOMA.
    Conventional,
    /// The full pipeline on a uniformly random user grouping.
    RandomClustering,
    /// Proposed clusters and beams with random power split.
    RandomPac,
    /// The proposed pipeline stopped after stage 1.
    NoOrca,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Proposed,
        Method::Conventional,
        Method::RandomClustering,
        Method::RandomPac,
        Method::NoOrca,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::Conventional => "conventional",
            Method::RandomClustering => "random-clustering",
            Method::RandomPac => "random-pac",
            Method::NoOrca => "no-orca",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| Error::invalid(format!("unknown method {s:?}")))
    }
}

/// What to run: the (N, M) grid, trial count, methods and output location.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub n_grid: Vec<usize>,
    pub m_grid: Vec<usize>,
    pub num_trials: usize,
    pub methods: Vec<Method>,
    pub out_dir: PathBuf,
    pub seed: u64,
    /// Worker threads; `None` uses the global pool. Ignored without `parallel`.
    pub workers: Option<usize>,
    pub conventional_mode: ConventionalMode,
    /// Aggregate trials whose QoS floor was unattainable instead of skipping them.
    pub include_infeasible: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            n_grid: vec![16, 32, 48, 64],
            m_grid: vec![8],
            num_trials: 100,
            methods: vec![
                Method::Proposed,
                Method::Conventional,
                Method::RandomClustering,
                Method::RandomPac,
            ],
            out_dir: PathBuf::from("results"),
            seed: 1,
            workers: None,
            conventional_mode: ConventionalMode::TimeSharing,
            include_infeasible: false,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_trials == 0 {
            return Err(Error::invalid("num_trials must be at least 1"));
        }
        if self.n_grid.is_empty() || self.m_grid.is_empty() {
            return Err(Error::invalid("scenario grids must be nonempty"));
        }
        if self.methods.is_empty() {
            return Err(Error::invalid("no methods requested"));
        }
        if self.workers == Some(0) {
            return Err(Error::invalid("workers must be at least 1"));
        }
        Ok(())
    }

    pub fn runs(&self, method: Method) -> bool {
        self.methods.contains(&method)
    }

    /// Plain-text echo used in the manifest.
    pub fn describe(&self) -> String {
        let list = |v: &[usize]| v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",");
        let methods: Vec<&str> = self.methods.iter().map(|m| m.name()).collect();
        format!(
            "n_grid = {}\nm_grid = {}\ntrials = {}\nmethods = {}\nseed = {}\nconventional_mode = {}\ninclude_infeasible = {}\n",
            list(&self.n_grid),
            list(&self.m_grid),
            self.num_trials,
            methods.join(","),
            self.seed,
            self.conventional_mode,
            self.include_infeasible,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("greedy".parse::<Method>().is_err());
    }

    #[test]
    fn spec_rejects_empty_grids() {
        let spec = ExperimentSpec { n_grid: vec![], ..ExperimentSpec::default() };
        assert!(spec.validate().is_err());
        let spec = ExperimentSpec { num_trials: 0, ..ExperimentSpec::default() };
        assert!(spec.validate().is_err());
    }
}
