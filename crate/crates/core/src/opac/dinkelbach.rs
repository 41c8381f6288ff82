//! Dinkelbach outer loop over all clusters.
//!
//! Each sweep freezes the inter-cluster interference at the current
//! allocation, solves every cluster's parametric problem with the closed form
//! and subgradient duals, and then moves all clusters jointly towards those
//! candidates. The joint constraints are linear in β, so the step is first cut
//! to the feasible set and then backtracked until no cluster loses EE, which
//! keeps every ρ_i trace monotone despite the lagged interference.

use nalgebra::DMatrix;

use super::dual::{subgradient_update, StepSizes};
use super::pac::{closed_form_pac, ClusterDuals, ClusterProblem, PacOutcome};
use super::sca::{sca_bound, ScaCoefficients};
use crate::channel::LinkGains;
use crate::config::SystemConfig;
use crate::error::{Error, Result};

/// Fraction of the budget used by the warm start.
const WARM_START_LOAD: f64 = 0.9;
/// Relative feasibility tolerance on the normalised rows.
const FEASIBILITY_TOL: f64 = 1e-9;
/// Largest blow-up of the minimal allocation used to build a strictly feasible start.
const FLOOR_SCALE: f64 = 4.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Stage1TraceRecord {
    pub iteration: usize,
    pub rho: Vec<f64>,
    pub energy_efficiency: f64,
    pub max_violation: f64,
    /// max_i |F_i| / (ρ_i P_{i,T}); absent for the starting point.
    pub residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage1State {
    /// I×K coefficients, fractions of the cluster power.
    pub beta: DMatrix<f64>,
    pub rho: Vec<f64>,
    pub duals: Vec<ClusterDuals>,
    /// SCA coefficients at the final allocation.
    pub sca: Vec<Vec<ScaCoefficients>>,
    pub iterations: usize,
    pub converged: bool,
    /// Whether the SINR floor was jointly attainable; when it is not, the
    /// floor is dropped and the allocation is best effort.
    pub qos_attained: bool,
    /// SINR floor that was enforced.
    pub min_sinr: f64,
    pub residual: f64,
    pub trace: Vec<Stage1TraceRecord>,
}

fn cluster_problems(links: &LinkGains, beta: &DMatrix<f64>, config: &SystemConfig, min_sinr: f64) -> Vec<ClusterProblem> {
    (0..links.num_clusters())
        .map(|i| ClusterProblem::from_links(links, i, beta, config, min_sinr))
        .collect()
}

fn row(beta: &DMatrix<f64>, i: usize) -> Vec<f64> {
    beta.row(i).iter().copied().collect()
}

/// Every normalised constraint row of every cluster at `beta`, interference included.
fn joint_slacks(links: &LinkGains, beta: &DMatrix<f64>, config: &SystemConfig, min_sinr: f64) -> Vec<f64> {
    cluster_problems(links, beta, config, min_sinr)
        .iter()
        .enumerate()
        .flat_map(|(i, p)| {
            let s = p.slacks(&row(beta, i));
            std::iter::once(s.power).chain(s.sinr).chain(s.sic).collect::<Vec<_>>()
        })
        .collect()
}

fn max_violation(slacks: &[f64]) -> f64 {
    slacks.iter().map(|s| (-s).max(0.0)).fold(0.0, f64::max)
}

/// Largest violation over every cluster's power, SINR and SIC rows, in
/// units of β.
pub fn constraint_violation(links: &LinkGains, beta: &DMatrix<f64>, config: &SystemConfig, min_sinr: f64) -> f64 {
    max_violation(&joint_slacks(links, beta, config, min_sinr))
}

/// Whether `beta` meets every row up to the solver tolerance.
pub fn is_feasible(links: &LinkGains, beta: &DMatrix<f64>, config: &SystemConfig, min_sinr: f64) -> bool {
    feasible(links, beta, config, min_sinr)
}

fn feasible(links: &LinkGains, beta: &DMatrix<f64>, config: &SystemConfig, min_sinr: f64) -> bool {
    max_violation(&joint_slacks(links, beta, config, min_sinr)) <= FEASIBILITY_TOL * config.beta_budget()
}

/// Largest t in [0, 1] keeping `from + t (to - from)` feasible, assuming `from` is.
fn max_feasible_step(
    links: &LinkGains,
    from: &DMatrix<f64>,
    to: &DMatrix<f64>,
    config: &SystemConfig,
    min_sinr: f64,
) -> f64 {
    let s0 = joint_slacks(links, from, config, min_sinr);
    let s1 = joint_slacks(links, to, config, min_sinr);
    let mut t: f64 = 1.0;
    for (&a, &b) in s0.iter().zip(&s1) {
        if b < a && b < 0.0 {
            t = t.min((a.max(0.0) / (a - b)).clamp(0.0, 1.0));
        }
    }
    t
}

/// Smallest allocation meeting every SINR floor and SIC gap, by the
/// standard interference fixed point started from zero. `None` when the
/// iteration leaves the power budget, i.e. the floors are jointly unattainable.
pub fn minimal_power_allocation(links: &LinkGains, config: &SystemConfig, min_sinr: f64) -> Option<DMatrix<f64>> {
    let (ni, nk) = (links.num_clusters(), links.users_per_cluster());
    let budget = config.beta_budget();
    let mut beta = DMatrix::zeros(ni, nk);
    for _ in 0..10_000 {
        let problems = cluster_problems(links, &beta, config, min_sinr);
        let mut next = DMatrix::zeros(ni, nk);
        for (i, p) in problems.iter().enumerate() {
            let mut later = 0.0;
            for k in (0..nk).rev() {
                let mut v = min_sinr * (later + p.noise_term(k));
                if k + 1 < nk {
                    v = v.max(later + p.sic_term(k));
                }
                next[(i, k)] = v;
                later += v;
            }
            if later > budget * (1.0 + 1e-12) {
                return None;
            }
        }
        let change = (&next - &beta).amax();
        beta = next;
        if change <= 1e-13 * beta.amax() {
            return Some(beta);
        }
    }
    None
}

/// Warm start β ∝ 1/‖u‖² at 90% of the budget. When that violates a row,
/// the start is moved towards a scaled-up copy of the minimal allocation,
/// which is strictly feasible: scaling by s > 1 multiplies every left-hand
/// side by s but the noise parts of the right-hand sides stay fixed.
fn initial_allocation(links: &LinkGains, config: &SystemConfig, min_sinr: f64) -> Result<DMatrix<f64>> {
    let (ni, nk) = (links.num_clusters(), links.users_per_cluster());
    let load = WARM_START_LOAD * config.beta_budget().min(1.0);
    let mut warm = DMatrix::zeros(ni, nk);
    for i in 0..ni {
        let inv: Vec<f64> = (0..nk).map(|k| 1.0 / links.user_norm_sq(i, k)).collect();
        let total: f64 = inv.iter().sum();
        for k in 0..nk {
            warm[(i, k)] = load * inv[k] / total;
        }
    }
    if feasible(links, &warm, config, min_sinr) {
        return Ok(warm);
    }
    let floor = minimal_power_allocation(links, config, min_sinr)
        .ok_or_else(|| Error::Infeasible("SIC gaps exceed the power budget".into()))?;
    let heaviest = (0..ni).map(|i| floor.row(i).sum()).fold(0.0, f64::max);
    let scale = if heaviest > 0.0 {
        (load / heaviest).clamp(1.0, FLOOR_SCALE)
    } else {
        1.0
    };
    let mut base = &floor * scale;
    // Zero entries (a dropped floor on the strongest user) get a token share.
    let tiny = 1e-6 * config.beta_budget();
    base.iter_mut().for_each(|b| *b = b.max(tiny));
    if !feasible(links, &base, config, min_sinr) {
        base = floor;
        base.iter_mut().for_each(|b| *b = b.max(1e-12 * config.beta_budget()));
    }
    let t = max_feasible_step(links, &base, &warm, config, min_sinr);
    Ok(&base + (&warm - &base) * (0.5 * t))
}

fn sca_at(problem: &ClusterProblem, beta: &[f64]) -> Result<Vec<ScaCoefficients>> {
    problem.sinrs(beta).into_iter().map(sca_bound).collect()
}

/// Approximately maximises the parametric surrogate of one cluster,
/// BW Σ (ζ log2 γ + Ω) − ρ P_T, subject to its normalised rows.
fn solve_parametric(
    problem: &ClusterProblem,
    sca: &[ScaCoefficients],
    rho: f64,
    anchor: &[f64],
    duals: &mut ClusterDuals,
    config: &SystemConfig,
) -> Vec<f64> {
    let nk = problem.users();
    let hi = problem.beta_max;
    let lo = 1e-12 * hi;
    let scale = problem.power_price(rho).max(f64::MIN_POSITIVE) / hi;
    let mut c = config.stage1_step_scale;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut trial = vec![0.0; nk];
    let mut beta = anchor.to_vec();
    for t in 1..=config.stage1_dual_iters {
        let mut flagged = false;
        for k in 0..nk {
            beta[k] = match closed_form_pac(k, problem, sca, rho, duals, anchor) {
                PacOutcome::Value(b) => b.clamp(lo, hi),
                PacOutcome::DualInfeasible => {
                    flagged = true;
                    hi
                }
            };
        }
        if flagged {
            c *= 0.5;
        }
        let slacks = problem.slacks(&beta);
        if slacks.max_violation() <= FEASIBILITY_TOL * hi {
            trial.copy_from_slice(&beta);
            repair(problem, &mut trial);
            if problem.slacks(&trial).power >= 0.0 {
                let value = problem.surrogate_rate(&trial, sca) - rho * problem.power(&trial);
                if best.as_ref().is_none_or(|(v, _)| value > *v) {
                    best = Some((value, trial.clone()));
                }
            }
        }
        let next = subgradient_update(duals, &slacks, StepSizes::diminishing(c * scale, t));
        let moved = (next.power - duals.power).abs()
            + next.sinr.iter().zip(&duals.sinr).map(|(a, b)| (a - b).abs()).sum::<f64>()
            + next.sic.iter().zip(&duals.sic).map(|(a, b)| (a - b).abs()).sum::<f64>();
        *duals = next;
        if moved <= 1e-12 * scale && best.is_some() {
            break;
        }
    }
    let mut out = best.map_or(beta, |(_, b)| b);
    repair(problem, &mut out);
    out
}

/// Raises coefficients, strongest user first, until every SINR and SIC row of
/// the cluster holds with a small margin. The subgradient iterates only reach
/// the boundary approximately, and an iterate outside it would block the
/// joint step when the current point is on the boundary.
fn repair(problem: &ClusterProblem, beta: &mut [f64]) {
    let nk = problem.users();
    let margin = 1e-12 * problem.beta_max;
    let mut later = 0.0;
    for k in (0..nk).rev() {
        let mut need = problem.min_sinr * (later + problem.noise_term(k));
        if k + 1 < nk {
            need = need.max(later + problem.sic_term(k));
        }
        if beta[k] < need + margin {
            beta[k] = need + margin;
        }
        later += beta[k];
    }
}

/// Raises a joint allocation until every row holds under the interference it
/// creates. The raise map is monotone, so the iteration converges whenever a
/// feasible point dominates the input; `None` if the budget is exceeded.
fn joint_repair(links: &LinkGains, beta: &DMatrix<f64>, config: &SystemConfig, min_sinr: f64) -> Option<DMatrix<f64>> {
    let mut current = beta.clone();
    for _ in 0..1_000 {
        let before = current.clone();
        for (i, p) in cluster_problems(links, &before, config, min_sinr).iter().enumerate() {
            let mut b = row(&current, i);
            repair(p, &mut b);
            if b.iter().sum::<f64>() > p.beta_max {
                return None;
            }
            current.row_mut(i).copy_from_slice(&b);
        }
        if max_violation(&joint_slacks(links, &current, config, min_sinr)) <= 0.0 {
            return Some(current);
        }
    }
    None
}

/// Stage 1 on fixed beams and reflection: returns the final allocation with
/// its ρ trace. Non-convergence within the iteration limit is flagged, not an error.
pub fn dinkelbach_outer(links: &LinkGains, config: &SystemConfig) -> Result<Stage1State> {
    config.validate()?;
    let (ni, nk) = (links.num_clusters(), links.users_per_cluster());
    let qos_attained = minimal_power_allocation(links, config, config.min_sinr).is_some();
    let min_sinr = if qos_attained { config.min_sinr } else { 0.0 };
    let mut beta = initial_allocation(links, config, min_sinr)?;
    let mut duals = vec![ClusterDuals::zeros(nk); ni];

    let ee_of = |b: &DMatrix<f64>| -> Vec<f64> {
        (0..ni).map(|i| links.cluster_energy_efficiency(i, b, config)).collect()
    };
    let mut rho = ee_of(&beta);
    let mut trace = vec![Stage1TraceRecord {
        iteration: 0,
        rho: rho.clone(),
        energy_efficiency: rho.iter().sum(),
        max_violation: max_violation(&joint_slacks(links, &beta, config, min_sinr)),
        residual: None,
    }];
    let mut converged = false;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;

    while iterations < config.stage1_max_iters {
        iterations += 1;
        let problems = cluster_problems(links, &beta, config, min_sinr);
        let sca: Vec<Vec<ScaCoefficients>> = problems
            .iter()
            .enumerate()
            .map(|(i, p)| sca_at(p, &row(&beta, i)))
            .collect::<Result<_>>()?;

        let mut candidate = beta.clone();
        for (i, p) in problems.iter().enumerate() {
            let b = solve_parametric(p, &sca[i], rho[i], &row(&beta, i), &mut duals[i], config);
            candidate.row_mut(i).copy_from_slice(&b);
        }

        // Candidates only respect the interference they were solved against.
        if let Some(fixed) = joint_repair(links, &candidate, config, min_sinr) {
            candidate = fixed;
        }
        let mut t = max_feasible_step(links, &beta, &candidate, config, min_sinr);
        let mut next = beta.clone();
        for _ in 0..60 {
            if t <= 0.0 {
                break;
            }
            let trial = &beta + (&candidate - &beta) * t;
            let ee = ee_of(&trial);
            if ee.iter().zip(&rho).all(|(new, old)| new >= old) {
                next = trial;
                break;
            }
            t *= 0.5;
        }

        // Dinkelbach residual of the old ρ at the new point, on the surrogate
        // anchored at the old point.
        let new_problems = cluster_problems(links, &next, config, min_sinr);
        residual = new_problems
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let b = row(&next, i);
                let cost = rho[i] * p.power(&b);
                ((p.surrogate_rate(&b, &sca[i]) - cost) / cost).abs()
            })
            .fold(0.0, f64::max);

        beta = next;
        rho = ee_of(&beta);
        trace.push(Stage1TraceRecord {
            iteration: iterations,
            rho: rho.clone(),
            energy_efficiency: rho.iter().sum(),
            max_violation: max_violation(&joint_slacks(links, &beta, config, min_sinr)),
            residual: Some(residual),
        });
        if residual <= config.stage1_tolerance {
            converged = true;
            break;
        }
    }

    let final_problems = cluster_problems(links, &beta, config, min_sinr);
    let sca = final_problems
        .iter()
        .enumerate()
        .map(|(i, p)| sca_at(p, &row(&beta, i)))
        .collect::<Result<_>>()?;
    Ok(Stage1State {
        beta,
        rho,
        duals,
        sca,
        iterations,
        converged,
        qos_attained,
        min_sinr,
        residual,
        trace,
    })
}
