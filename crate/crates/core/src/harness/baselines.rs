use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;

use super::{Method, MethodOutcome};
use crate::channel::{cluster_rate_and_power, LinkGains};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::opac::is_feasible;

/// How the conventional baseline shares a beam among its cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConventionalMode {
    /// Each user gets the beam at full power for 1/K of the time.
    #[default]
    TimeSharing,
    /// Only the strongest user of each cluster is served.
    SingleUser,
}

impl fmt::Display for ConventionalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConventionalMode::TimeSharing => "time-sharing",
            ConventionalMode::SingleUser => "single-user",
        })
    }
}

impl FromStr for ConventionalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "time-sharing" => Ok(ConventionalMode::TimeSharing),
            "single-user" => Ok(ConventionalMode::SingleUser),
            other => Err(Error::invalid(format!("unknown conventional mode {other:?}"))),
        }
    }
}

/// Orthogonal service through the same beams. Every beam radiates the full
/// cluster budget all the time, so the ICI seen by a user is that of the NOMA
/// system at full power; within a beam there is no superposition.
pub fn conventional_bf(links: &LinkGains, config: &SystemConfig, mode: ConventionalMode) -> MethodOutcome {
    let k_users = links.users_per_cluster();
    let budget = config.beta_budget();
    let full = DMatrix::from_element(links.num_clusters(), k_users, budget / k_users as f64);
    let p = config.cluster_power * budget;
    let mut ee = 0.0;
    let mut feasible = true;
    for i in 0..links.num_clusters() {
        let sinr_of = |k: usize| {
            let psi = links.interference(i, k, &full, config);
            p * links.own_gain(i, k) / (psi + config.noise_power)
        };
        let (served, duty): (Vec<usize>, f64) = match mode {
            ConventionalMode::TimeSharing => ((0..k_users).collect(), 1.0 / k_users as f64),
            ConventionalMode::SingleUser => (vec![k_users - 1], 1.0),
        };
        let gammas: Vec<f64> = served.iter().map(|&k| sinr_of(k)).collect();
        feasible &= gammas.iter().all(|&g| g >= config.min_sinr);
        let (rate, power) = cluster_rate_and_power(&gammas, &[budget], links.beam_norm_sq(i), config);
        ee += duty * rate / power;
    }
    MethodOutcome {
        method: Method::Conventional,
        energy_efficiency: ee,
        far_user_ici: links.far_user_interference(&full, config),
        feasible,
    }
}

/// Uniform random split of the full budget inside each cluster.
pub fn random_pac<R: Rng + ?Sized>(links: &LinkGains, config: &SystemConfig, rng: &mut R) -> (DMatrix<f64>, MethodOutcome) {
    let k_users = links.users_per_cluster();
    let budget = config.beta_budget();
    let mut beta = DMatrix::zeros(links.num_clusters(), k_users);
    for i in 0..links.num_clusters() {
        let draws: Vec<f64> = (0..k_users).map(|_| rng.random_range(f64::EPSILON..1.0)).collect();
        let total: f64 = draws.iter().sum();
        for (k, d) in draws.iter().enumerate() {
            beta[(i, k)] = budget * d / total;
        }
    }
    let outcome = MethodOutcome {
        method: Method::RandomPac,
        energy_efficiency: links.energy_efficiency(&beta, config),
        far_user_ici: links.far_user_interference(&beta, config),
        feasible: is_feasible(links, &beta, config, config.min_sinr),
    };
    (beta, outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    fn links() -> LinkGains {
        // Two clusters of two; rows are (cluster, user) and columns beams.
        let gains = DMatrix::from_row_slice(4, 2, &[2e-9, 1e-13, 5e-9, 3e-13, 4e-14, 1e-9, 0.0, 7e-9]);
        LinkGains::new(gains, 2, vec![1.0, 1.0]).unwrap()
    }

    #[test]
    fn time_sharing_matches_direct_formula() {
        let cfg = SystemConfig::default();
        let l = links();
        let got = conventional_bf(&l, &cfg, ConventionalMode::TimeSharing).energy_efficiency;
        let p = cfg.cluster_power;
        let mut want = 0.0;
        for i in 0..2 {
            let mut rate = 0.0;
            for k in 0..2 {
                let psi = l.gain(i, k, 1 - i) * p;
                rate += cfg.bandwidth * (1.0 + p * l.own_gain(i, k) / (psi + cfg.noise_power)).ln() / LN_2 / 2.0;
            }
            want += rate / (p + cfg.circuit_power);
        }
        assert!((got - want).abs() <= 1e-12 * want, "{got} vs {want}");
    }

    #[test]
    fn single_user_mode_serves_strongest() {
        let cfg = SystemConfig::default();
        let l = links();
        let got = conventional_bf(&l, &cfg, ConventionalMode::SingleUser).energy_efficiency;
        let p = cfg.cluster_power;
        let want: f64 = (0..2)
            .map(|i| {
                let psi = l.gain(i, 1, 1 - i) * p;
                cfg.bandwidth * (1.0 + p * l.own_gain(i, 1) / (psi + cfg.noise_power)).log2() / (p + cfg.circuit_power)
            })
            .sum();
        assert!((got - want).abs() <= 1e-12 * want);
    }

    #[test]
    fn random_pac_spends_full_budget() {
        use rand::SeedableRng;
        let cfg = SystemConfig::default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let (beta, out) = random_pac(&links(), &cfg, &mut rng);
        for i in 0..2 {
            assert!((beta.row(i).sum() - cfg.beta_budget()).abs() < 1e-12);
        }
        assert!(out.energy_efficiency > 0.0);
    }
}
