//! Closed-form power allocation of one cluster for fixed duals.
//!
//! Constraint rows are kept in units of β: the SINR row of user k is divided
//! by P g_k, the SIC row by P g_{k+1} and the power row by P. The duals below
//! multiply these normalised rows.

use std::f64::consts::LN_2;

use nalgebra::DMatrix;

use super::dual::ConstraintSlacks;
use super::sca::ScaCoefficients;
use crate::channel::LinkGains;
use crate::config::SystemConfig;

/// One cluster with the inter-cluster interference frozen.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterProblem {
    /// |u_{i,k} f_i|², weakest user first.
    pub own_gain: Vec<f64>,
    /// Ψ_{i,k} in watts.
    pub interference: Vec<f64>,
    pub cluster_power: f64,
    pub beam_norm_sq: f64,
    pub noise_power: f64,
    pub circuit_power: f64,
    pub bandwidth: f64,
    /// SINR floor in force; zero when the floor is dropped.
    pub min_sinr: f64,
    pub sic_gap: f64,
    /// Largest admissible Σβ.
    pub beta_max: f64,
}

/// Duals of the normalised power, SINR and SIC rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterDuals {
    pub power: f64,
    pub sinr: Vec<f64>,
    /// One per adjacent pair (k, k+1).
    pub sic: Vec<f64>,
}

impl ClusterDuals {
    pub fn zeros(users: usize) -> Self {
        ClusterDuals {
            power: 0.0,
            sinr: vec![0.0; users],
            sic: vec![0.0; users.saturating_sub(1)],
        }
    }

    fn sic_or_zero(&self, k: usize) -> f64 {
        self.sic.get(k).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PacOutcome {
    Value(f64),
    /// The duals price power at or below zero; no finite maximiser.
    DualInfeasible,
}

impl ClusterProblem {
    /// Cluster `i` of `links` with interference evaluated at `beta`.
    pub fn from_links(
        links: &LinkGains,
        i: usize,
        beta: &DMatrix<f64>,
        config: &SystemConfig,
        min_sinr: f64,
    ) -> Self {
        let k_users = links.users_per_cluster();
        ClusterProblem {
            own_gain: (0..k_users).map(|k| links.own_gain(i, k)).collect(),
            interference: (0..k_users).map(|k| links.interference(i, k, beta, config)).collect(),
            cluster_power: config.cluster_power,
            beam_norm_sq: links.beam_norm_sq(i),
            noise_power: config.noise_power,
            circuit_power: config.circuit_power,
            bandwidth: config.bandwidth,
            min_sinr,
            sic_gap: config.sic_power_gap,
            beta_max: config.beta_budget(),
        }
    }

    pub fn users(&self) -> usize {
        self.own_gain.len()
    }

    /// (Ψ_k + σ²) / (P g_k): interference plus noise in units of β.
    pub fn noise_term(&self, k: usize) -> f64 {
        (self.interference[k] + self.noise_power) / (self.cluster_power * self.own_gain[k].max(f64::MIN_POSITIVE))
    }

    /// P_g / (P g_{k+1}): the SIC gap of pair (k, k+1) in units of β.
    pub fn sic_term(&self, k: usize) -> f64 {
        self.sic_gap / (self.cluster_power * self.own_gain[k + 1].max(f64::MIN_POSITIVE))
    }

    /// Denominator of γ_k in units of β.
    pub fn sinr_denominator(&self, k: usize, beta: &[f64]) -> f64 {
        beta[k + 1..].iter().sum::<f64>() + self.noise_term(k)
    }

    pub fn sinr(&self, k: usize, beta: &[f64]) -> f64 {
        beta[k] / self.sinr_denominator(k, beta)
    }

    pub fn sinrs(&self, beta: &[f64]) -> Vec<f64> {
        (0..self.users()).map(|k| self.sinr(k, beta)).collect()
    }

    pub fn rate(&self, beta: &[f64]) -> f64 {
        (0..self.users())
            .map(|k| self.bandwidth * self.sinr(k, beta).ln_1p() / LN_2)
            .sum()
    }

    pub fn power(&self, beta: &[f64]) -> f64 {
        self.beam_norm_sq * self.cluster_power * beta.iter().sum::<f64>() + self.circuit_power
    }

    pub fn energy_efficiency(&self, beta: &[f64]) -> f64 {
        self.rate(beta) / self.power(beta)
    }

    /// Σ_k BW (ζ_k log2 γ_k + Ω_k).
    pub fn surrogate_rate(&self, beta: &[f64], sca: &[ScaCoefficients]) -> f64 {
        (0..self.users())
            .map(|k| self.bandwidth * sca[k].lower_bound(self.sinr(k, beta)))
            .sum()
    }

    /// Marginal cost of β in the parametric objective, ρ ‖f‖² P.
    pub fn power_price(&self, rho: f64) -> f64 {
        rho * self.beam_norm_sq * self.cluster_power
    }

    pub fn slacks(&self, beta: &[f64]) -> ConstraintSlacks {
        let k_users = self.users();
        let later = |k: usize| beta[k + 1..].iter().sum::<f64>();
        ConstraintSlacks {
            power: self.beta_max - beta.iter().sum::<f64>(),
            sinr: (0..k_users)
                .map(|k| beta[k] - self.min_sinr * (later(k) + self.noise_term(k)))
                .collect(),
            sic: (0..k_users.saturating_sub(1))
                .map(|k| beta[k] - later(k) - self.sic_term(k))
                .collect(),
        }
    }

    /// Parametric Lagrangian with the surrogate rate and normalised rows.
    pub fn lagrangian(&self, beta: &[f64], sca: &[ScaCoefficients], rho: f64, duals: &ClusterDuals) -> f64 {
        let s = self.slacks(beta);
        self.surrogate_rate(beta, sca) - rho * self.power(beta)
            + duals.power * s.power
            + duals.sinr.iter().zip(&s.sinr).map(|(d, v)| d * v).sum::<f64>()
            + duals.sic.iter().zip(&s.sic).map(|(d, v)| d * v).sum::<f64>()
    }

    /// Part of the β_k coefficient that does not involve the rate of earlier users.
    fn linear_price(&self, k: usize, rho: f64, duals: &ClusterDuals) -> f64 {
        let own = self.power_price(rho) + duals.power - duals.sinr[k] - duals.sic_or_zero(k);
        let earlier: f64 = (0..k).map(|z| self.min_sinr * duals.sinr[z] + duals.sic_or_zero(z)).sum();
        own + earlier
    }
}

/// Closed-form maximiser of the Lagrangian in β_k.
///
/// The rates of the weaker users z < k depend on β_k through their SINR
/// denominators; those terms are evaluated at `anchor`, which makes the
/// Lagrangian separable:
///
/// β_k = BW ζ_k / ( ln2 (ρ‖f‖²P + α − φ_k − Υ_k) + Σ_{z<k} [ BW ζ_z γ_z/β_z + ln2 (γ_min φ_z + Υ_z) ] )
///
/// with γ_z/β_z = 1 / D_z(anchor).
pub fn closed_form_pac(
    k: usize,
    problem: &ClusterProblem,
    sca: &[ScaCoefficients],
    rho: f64,
    duals: &ClusterDuals,
    anchor: &[f64],
) -> PacOutcome {
    let bw = problem.bandwidth;
    let cross: f64 = (0..k)
        .map(|z| bw * sca[z].zeta / problem.sinr_denominator(z, anchor))
        .sum();
    let denom = LN_2 * problem.linear_price(k, rho, duals) + cross;
    if denom > 0.0 && denom.is_finite() {
        PacOutcome::Value(bw * sca[k].zeta / denom)
    } else {
        PacOutcome::DualInfeasible
    }
}

/// Self-consistent solution of the closed form: the stationary point of the
/// Lagrangian in every β_k, found by Gauss-Seidel sweeps of exact scalar solves.
pub fn stationary_pac(
    problem: &ClusterProblem,
    sca: &[ScaCoefficients],
    rho: f64,
    duals: &ClusterDuals,
) -> Option<Vec<f64>> {
    let k_users = problem.users();
    let bw = problem.bandwidth;
    let prices: Vec<f64> = (0..k_users).map(|k| problem.linear_price(k, rho, duals)).collect();
    if prices.iter().any(|&c| !(c > 0.0)) {
        return None;
    }
    let mut beta: Vec<f64> = (0..k_users).map(|k| bw * sca[k].zeta / (LN_2 * prices[k])).collect();
    for _ in 0..200 {
        let mut change: f64 = 0.0;
        for k in 0..k_users {
            // Offsets r_z of D_z = β_k + r_z for the weaker users z < k.
            let offsets: Vec<f64> = (0..k)
                .map(|z| {
                    (z + 1..k_users).filter(|&l| l != k).map(|l| beta[l]).sum::<f64>() + problem.noise_term(z)
                })
                .collect();
            let slope = |x: f64| {
                bw * sca[k].zeta / (x * LN_2)
                    - (0..k).map(|z| bw * sca[z].zeta / (LN_2 * (x + offsets[z]))).sum::<f64>()
                    - prices[k]
            };
            // slope > 0 near zero and slope(hi) <= 0 at the uncoupled solution.
            let hi = bw * sca[k].zeta / (LN_2 * prices[k]);
            let (mut lo, mut up) = (hi * 1e-30, hi);
            while slope(lo) <= 0.0 && lo > f64::MIN_POSITIVE * 1e30 {
                lo *= 1e-30;
            }
            if slope(up) >= 0.0 {
                lo = up;
            }
            for _ in 0..200 {
                if up <= lo * (1.0 + 1e-15) {
                    break;
                }
                let mid = (lo * up).sqrt();
                if slope(mid) > 0.0 {
                    lo = mid;
                } else {
                    up = mid;
                }
            }
            let next = 0.5 * (lo + up);
            change = change.max((next - beta[k]).abs() / next);
            beta[k] = next;
        }
        if change < 1e-14 {
            break;
        }
    }
    Some(beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opac::sca::sca_bound;

    fn problem() -> ClusterProblem {
        ClusterProblem {
            own_gain: vec![2e-9, 5e-9],
            interference: vec![1e-12, 0.0],
            cluster_power: 1.0,
            beam_norm_sq: 1.0,
            noise_power: 4e-15,
            circuit_power: 1.0,
            bandwidth: 1.0,
            min_sinr: 2.0,
            sic_gap: 4e-13,
            beta_max: 1.0,
        }
    }

    #[test]
    fn weakest_user_matches_uncoupled_formula() {
        let p = problem();
        let sca = [sca_bound(3.0).unwrap(), sca_bound(50.0).unwrap()];
        let duals = ClusterDuals {
            power: 0.5,
            sinr: vec![0.2, 0.1],
            sic: vec![0.3],
        };
        let rho = 4.0;
        // β_1 = BW ζ_1 / (ln2 ((ρ + α) P − φ_1 − Υ_1)) with normalised duals.
        let want = 0.75 / (LN_2 * (4.0 + 0.5 - 0.2 - 0.3));
        match closed_form_pac(0, &p, &sca, rho, &duals, &[0.5, 0.5]) {
            PacOutcome::Value(b) => assert!((b - want).abs() < 1e-14 * want),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_price_is_flagged() {
        let p = problem();
        let sca = [sca_bound(1.0).unwrap(), sca_bound(1.0).unwrap()];
        let out = closed_form_pac(0, &p, &sca, 0.0, &ClusterDuals::zeros(2), &[0.5, 0.5]);
        assert_eq!(out, PacOutcome::DualInfeasible);
        assert!(stationary_pac(&p, &sca, 0.0, &ClusterDuals::zeros(2)).is_none());
    }

    #[test]
    fn stationary_point_is_a_fixed_point_of_the_closed_form() {
        let p = problem();
        let sca = [sca_bound(2.0).unwrap(), sca_bound(30.0).unwrap()];
        let duals = ClusterDuals {
            power: 0.1,
            sinr: vec![0.05, 0.0],
            sic: vec![0.02],
        };
        let beta = stationary_pac(&p, &sca, 3.0, &duals).unwrap();
        for k in 0..2 {
            let PacOutcome::Value(b) = closed_form_pac(k, &p, &sca, 3.0, &duals, &beta) else {
                panic!("dual infeasible");
            };
            assert!((b - beta[k]).abs() < 1e-12 * beta[k], "{b} vs {}", beta[k]);
        }
    }
}
