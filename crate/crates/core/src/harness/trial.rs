use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::baselines::{conventional_bf, random_pac};
use super::{ExperimentSpec, Method};
use crate::beamforming::build_zf_beamformers;
use crate::channel::{synthesize_channels, ChannelSet, LinkGains, UserGeometry};
use crate::clustering::{cluster_users, random_clusters, ClusterPlan, CorrelationTable};
use crate::config::SystemConfig;
use crate::error::Result;
use crate::linalg::{CVector, C64};
use crate::opac::{dinkelbach_outer, Stage1State, Stage1TraceRecord};
use crate::orca::{lift_user_matrices, orca_iterate, LiftedUsers, ReflectionState, Stage2TraceRecord};

// Independent streams of one trial seed.
const STREAM_CHANNEL: u64 = 0;
const STREAM_CLUSTERING: u64 = 1;
const STREAM_RANDOM_CLUSTERS: u64 = 2;
const STREAM_RANDOM_PAC: u64 = 3;
const STREAM_ORCA: u64 = 4;
const STREAM_ORCA_RANDOM_CLUSTERS: u64 = 5;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutcome {
    pub method: Method,
    /// Σ_i R_i / P_{i,T} in bits/Joule.
    pub energy_efficiency: f64,
    /// Mean ICI at the weakest user of each cluster (W).
    pub far_user_ici: f64,
    /// Whether the QoS floor, SIC gaps and budget hold at the reported point.
    pub feasible: bool,
}

/// Wall clock per stage of the proposed pipeline. Not part of any output file.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Timings {
    pub stage1: Duration,
    pub stage2: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub seed: u64,
    pub num_irs_elements: usize,
    pub num_bs_antennas: usize,
    /// Whether the QoS floor was attainable with the proposed clusters.
    pub qos_attained: bool,
    pub outcomes: Vec<MethodOutcome>,
    pub stage1_trace: Vec<Stage1TraceRecord>,
    pub stage2_trace: Vec<Stage2TraceRecord>,
    pub stage1_iterations: usize,
    pub stage2_iterations: usize,
    pub timings: Timings,
}

impl TrialRecord {
    pub fn outcome(&self, method: Method) -> Option<&MethodOutcome> {
        self.outcomes.iter().find(|o| o.method == method)
    }

    /// The record with its wall-clock fields cleared, for equality checks.
    pub fn without_timings(&self) -> Self {
        TrialRecord { timings: Timings::default(), ..self.clone() }
    }
}

/// Clusters, beams and both stages on one channel draw.
struct Pipeline {
    links: LinkGains,
    lifted: LiftedUsers,
    stage1: Stage1State,
}

impl Pipeline {
    fn build(channels: &ChannelSet, effective: &[CVector], plan: &ClusterPlan, config: &SystemConfig, b0: &CVector) -> Result<Self> {
        let strongest: Vec<CVector> = plan.strongest_users().iter().map(|&u| effective[u].clone()).collect();
        let zf = build_zf_beamformers(&strongest)?;
        let lifted = lift_user_matrices(channels, &zf.beams, &plan.clusters, config)?;
        let links = lifted.links(b0)?;
        let stage1 = dinkelbach_outer(&links, config)?;
        Ok(Pipeline { links, lifted, stage1 })
    }

    fn stage1_outcome(&self, method: Method, config: &SystemConfig) -> MethodOutcome {
        MethodOutcome {
            method,
            energy_efficiency: self.links.energy_efficiency(&self.stage1.beta, config),
            far_user_ici: self.links.far_user_interference(&self.stage1.beta, config),
            feasible: self.stage1.qos_attained,
        }
    }

    fn stage2_outcome(&self, method: Method, state: &ReflectionState, config: &SystemConfig) -> Result<MethodOutcome> {
        let links = self.lifted.links(&state.b)?;
        Ok(MethodOutcome {
            method,
            energy_efficiency: state.energy_efficiency,
            far_user_ici: links.far_user_interference(&self.stage1.beta, config),
            feasible: self.stage1.qos_attained,
        })
    }
}

/// One paired trial: every method sees the same geometry and channels, and
/// all methods but random clustering share the correlation-based clusters
/// and their ZF beams. `config` carries the scenario's N and M.
///
/// QoS-unattainable draws are not errors; the record is flagged through
/// `qos_attained` and each outcome's `feasible`.
pub fn run_trial(config: &SystemConfig, spec: &ExperimentSpec, seed: u64) -> Result<TrialRecord> {
    config.validate()?;
    let mut rng = stream(seed, STREAM_CHANNEL);
    let geometry = UserGeometry::sample(config, &mut rng);
    let channels = synthesize_channels(config, &geometry, &mut rng)?;
    let b0 = CVector::from_element(config.num_irs_elements, C64::new(1.0, 0.0));
    let effective = channels.effective_channels(&b0)?;
    let plan = cluster_users(
        &effective,
        config.users_per_cluster,
        config.num_clusters,
        config.correlation_threshold,
        &mut stream(seed, STREAM_CLUSTERING),
    )?;

    let mut timings = Timings::default();
    let clock = Instant::now();
    let proposed = Pipeline::build(&channels, &effective, &plan, config, &b0)?;
    timings.stage1 = clock.elapsed();

    let mut outcomes = Vec::with_capacity(spec.methods.len());
    let mut stage2_trace = Vec::new();
    let mut stage2_iterations = 0;
    for &method in &spec.methods {
        let outcome = match method {
            Method::Proposed => {
                let clock = Instant::now();
                let state = orca_iterate(&proposed.lifted, &proposed.stage1, config, &b0, &mut stream(seed, STREAM_ORCA))?;
                timings.stage2 = clock.elapsed();
                stage2_trace = state.trace.clone();
                stage2_iterations = state.iterations;
                proposed.stage2_outcome(method, &state, config)?
            }
            Method::NoOrca => proposed.stage1_outcome(method, config),
            Method::Conventional => conventional_bf(&proposed.links, config, spec.conventional_mode),
            Method::RandomPac => random_pac(&proposed.links, config, &mut stream(seed, STREAM_RANDOM_PAC)).1,
            Method::RandomClustering => {
                let gains = CorrelationTable::new(&effective)?.gains().to_vec();
                let shuffled = random_clusters(
                    &gains,
                    config.users_per_cluster,
                    config.num_clusters,
                    &mut stream(seed, STREAM_RANDOM_CLUSTERS),
                );
                let pipeline = Pipeline::build(&channels, &effective, &shuffled, config, &b0)?;
                let state = orca_iterate(
                    &pipeline.lifted,
                    &pipeline.stage1,
                    config,
                    &b0,
                    &mut stream(seed, STREAM_ORCA_RANDOM_CLUSTERS),
                )?;
                pipeline.stage2_outcome(method, &state, config)?
            }
        };
        outcomes.push(outcome);
    }

    Ok(TrialRecord {
        seed,
        num_irs_elements: config.num_irs_elements,
        num_bs_antennas: config.num_bs_antennas,
        qos_attained: proposed.stage1.qos_attained,
        outcomes,
        stage1_trace: proposed.stage1.trace.clone(),
        stage2_trace,
        stage1_iterations: proposed.stage1.iterations,
        stage2_iterations,
        timings,
    })
}
