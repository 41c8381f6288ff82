//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use irs_noma::beamforming::build_zf_beamformers;
use irs_noma::channel::{synthesize_channels, ChannelSet, LinkGains, UserGeometry};
use irs_noma::clustering::{cluster_users, ClusterPlan};
use irs_noma::conic::{Operand, SdpProblem};
use irs_noma::linalg::{CMatrix, CVector, C64};
use irs_noma::orca::{lift_user_matrices, LiftedUsers};
use irs_noma::SystemConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One reference-scenario drop with proposed clusters and ZF beams at b = 1.
pub struct Instance {
    pub channels: ChannelSet,
    pub effective: Vec<CVector>,
    pub plan: ClusterPlan,
    pub beams: Vec<CVector>,
    pub lifted: LiftedUsers,
    pub links: LinkGains,
    pub b0: CVector,
}

pub fn instance(config: &SystemConfig, seed: u64) -> Instance {
    let mut r = rng(seed);
    let geometry = UserGeometry::sample(config, &mut r);
    let channels = synthesize_channels(config, &geometry, &mut r).unwrap();
    let b0 = CVector::from_element(config.num_irs_elements, C64::new(1.0, 0.0));
    let effective = channels.effective_channels(&b0).unwrap();
    let plan = cluster_users(
        &effective,
        config.users_per_cluster,
        config.num_clusters,
        config.correlation_threshold,
        &mut r,
    )
    .unwrap();
    let strongest: Vec<CVector> = plan.strongest_users().iter().map(|&u| effective[u].clone()).collect();
    let beams = build_zf_beamformers(&strongest).unwrap().beams;
    let lifted = lift_user_matrices(&channels, &beams, &plan.clusters, config).unwrap();
    let links = lifted.links(&b0).unwrap();
    Instance {
        channels,
        effective,
        plan,
        beams,
        lifted,
        links,
        b0,
    }
}

pub fn random_cvector<R: Rng>(n: usize, rng: &mut R) -> CVector {
    CVector::from_fn(n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

/// Random PSD matrix with unit diagonal bound: a normalised Gram matrix.
pub fn random_psd<R: Rng>(n: usize, rank: usize, rng: &mut R) -> CMatrix {
    let mut b = CMatrix::zeros(n, n);
    for _ in 0..rank {
        let v = random_cvector(n, rng);
        b.gerc(C64::new(1.0, 0.0), &v, &v, C64::new(1.0, 0.0));
    }
    let top = (0..n).map(|i| b[(i, i)].re).fold(0.0, f64::max);
    b / C64::new(top, 0.0)
}

/// The frozen 3×3 problems and their reference optima.
pub fn conic_oracle_problems() -> Vec<(SdpProblem, f64)> {
    let text = include_str!("../data/conic3x3.txt");
    let matrix = |nums: &[f64]| CMatrix::from_fn(3, 3, |r, c| C64::new(nums[2 * (3 * r + c)], nums[2 * (3 * r + c) + 1]));
    let mut out: Vec<(SdpProblem, f64)> = Vec::new();
    for line in text.lines() {
        let mut parts = line.split_whitespace();
        let tag = parts.next().unwrap();
        let nums: Vec<f64> = parts.map(|s| s.parse().unwrap()).collect();
        match tag {
            "problem" => out.push((SdpProblem::new(CMatrix::zeros(3, 3)), nums[3])),
            "C" => {
                let p = &mut out.last_mut().unwrap().0;
                p.objective = matrix(&nums);
            }
            "L" => out.last_mut().unwrap().0.add_log_term(nums[0], Operand::Dense(matrix(&nums[2..])), nums[1]),
            "A" => out.last_mut().unwrap().0.add_constraint(Operand::Dense(matrix(&nums[1..])), nums[0]),
            other => panic!("unexpected tag {other}"),
        }
    }
    out
}
