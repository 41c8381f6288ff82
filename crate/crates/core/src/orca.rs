//! Stage 2: reflection coefficients for fixed beams and power allocation.
//!
//! The reflection vector is lifted to B = bbᴴ. Every received gain becomes
//! linear in B, each rate is bounded below by the logarithmic SCA bound, and
//! the concave-minus-concave rate is made concave by linearising the
//! interference-plus-noise logarithm. The rank-one requirement enters as the
//! penalty η(tr B − ‖B‖₂), with ‖B‖₂ replaced by its tangent lower bound.
//! Each step is a conic solve; b is recovered from the solution by
//! eigenvector projection or Gaussian randomisation, and the best feasible
//! reflection seen so far is kept.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::channel::{complex_gaussian, ChannelSet, LinkGains};
use crate::config::SystemConfig;
use crate::conic::{self, Operand, SdpProblem, SolveOptions};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, leading_eigenpair, outer, quad_form, unit_modulus, CMatrix, CVector, C64};
use crate::opac::{is_feasible, sca_bound, Stage1State};

/// Vectors ω_{(i,k),j} = W_{i,k} f_j, scaled by √(P/σ²) so that
/// |bᴴω|² is a signal-to-noise ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedUsers {
    /// Row-major over (user i·K + k, beam j).
    omega: Vec<CVector>,
    num_clusters: usize,
    users_per_cluster: usize,
    beam_norm_sq: Vec<f64>,
    /// σ²/P, to undo the scaling.
    gain_unit: f64,
}

pub fn lift_user_matrices(
    channels: &ChannelSet,
    beams: &[CVector],
    clusters: &[Vec<usize>],
    config: &SystemConfig,
) -> Result<LiftedUsers> {
    let k_users = clusters.first().map_or(0, Vec::len);
    if clusters.len() != beams.len() || clusters.iter().any(|c| c.len() != k_users) {
        return Err(Error::invalid("clusters and beams disagree"));
    }
    let scale = (config.cluster_power / config.noise_power).sqrt();
    let mut omega = Vec::with_capacity(clusters.len() * k_users * beams.len());
    for cluster in clusters {
        for &user in cluster {
            let w = channels
                .cascaded
                .get(user)
                .ok_or_else(|| Error::invalid(format!("user {user} has no channel")))?;
            for f in beams {
                if f.len() != w.ncols() {
                    return Err(Error::dims(w.ncols(), f.len()));
                }
                omega.push(w * f * C64::from(scale));
            }
        }
    }
    Ok(LiftedUsers {
        omega,
        num_clusters: clusters.len(),
        users_per_cluster: k_users,
        beam_norm_sq: beams.iter().map(|f| f.norm_squared()).collect(),
        gain_unit: config.noise_power / config.cluster_power,
    })
}

impl LiftedUsers {
    fn index(&self, i: usize, k: usize, j: usize) -> usize {
        (i * self.users_per_cluster + k) * self.num_clusters + j
    }

    pub fn dim(&self) -> usize {
        self.omega.first().map_or(0, DVector::len)
    }

    pub fn num_clusters(&self) -> usize {
        self.num_clusters
    }

    pub fn users_per_cluster(&self) -> usize {
        self.users_per_cluster
    }

    /// ω for user k of cluster i seen through beam j.
    pub fn omega(&self, i: usize, k: usize, j: usize) -> &CVector {
        &self.omega[self.index(i, k, j)]
    }

    /// ωωᴴ.
    pub fn lifted(&self, i: usize, k: usize, j: usize) -> CMatrix {
        outer(self.omega(i, k, j))
    }

    /// Scaled gain ⟨B, ωωᴴ⟩.
    fn snr(&self, b: &CMatrix, i: usize, k: usize, j: usize) -> f64 {
        quad_form(b, self.omega(i, k, j))
    }

    /// Link gains |u f|² at reflection `b`.
    pub fn links(&self, b: &CVector) -> Result<LinkGains> {
        if b.len() != self.dim() {
            return Err(Error::dims(self.dim(), b.len()));
        }
        let rows = self.num_clusters * self.users_per_cluster;
        let gains = DMatrix::from_fn(rows, self.num_clusters, |r, j| {
            let (i, k) = (r / self.users_per_cluster, r % self.users_per_cluster);
            b.dotc(self.omega(i, k, j)).norm_sqr() * self.gain_unit
        });
        LinkGains::new(gains, self.users_per_cluster, self.beam_norm_sq.clone())
    }

    /// Coefficients of the interference-plus-noise term
    /// D_{i,k}(B) = Σ_j c_j ⟨B, W_{ik,j}⟩ + 1 of user (i, k).
    fn denominator_terms(&self, i: usize, k: usize, beta: &DMatrix<f64>) -> Vec<(f64, usize)> {
        let later: f64 = (k + 1..self.users_per_cluster).map(|l| beta[(i, l)]).sum();
        let mut terms = Vec::with_capacity(self.num_clusters);
        if later > 0.0 {
            terms.push((later, self.index(i, k, i)));
        }
        for j in (0..self.num_clusters).filter(|&j| j != i) {
            terms.push((beta.row(j).sum(), self.index(i, k, j)));
        }
        terms
    }

    fn factored_value(&self, terms: &[(f64, usize)], b: &CMatrix) -> f64 {
        terms.iter().map(|&(c, r)| c * quad_form(b, &self.omega[r])).sum()
    }

    /// P β_k ⟨B, W_{ik,i}⟩ / σ².
    pub fn signal(&self, i: usize, k: usize, beta: &DMatrix<f64>, b: &CMatrix) -> f64 {
        beta[(i, k)] * self.snr(b, i, k, i)
    }

    /// (P Σ_{l>k} β_l ⟨B, W_{ik,i}⟩ + Ψ_{i,k}(B) + σ²) / σ².
    pub fn denominator(&self, i: usize, k: usize, beta: &DMatrix<f64>, b: &CMatrix) -> f64 {
        self.factored_value(&self.denominator_terms(i, k, beta), b) + 1.0
    }

    /// SINR of user (i, k) on the lifted variable.
    pub fn sinr(&self, i: usize, k: usize, beta: &DMatrix<f64>, b: &CMatrix) -> f64 {
        self.signal(i, k, beta, b) / self.denominator(i, k, beta, b)
    }
}

/// The two logarithms of one user's rate bound and the tangent of the second.
#[derive(Debug, Clone, PartialEq)]
pub struct DcLinearization {
    /// log2 of the signal term at the anchor, f₁(B⁽ᵗ⁾).
    pub f1_anchor: f64,
    /// f₂(B⁽ᵗ⁾).
    pub f2_anchor: f64,
    /// ∇f₂ at the anchor, in log2 units.
    pub gradient: CMatrix,
    anchor: CMatrix,
}

impl DcLinearization {
    /// Tangent upper bound f̄₂(B) of the concave f₂.
    pub fn f2_bar(&self, b: &CMatrix) -> f64 {
        self.f2_anchor + crate::linalg::herm_inner(&self.gradient, &(b - &self.anchor))
    }
}

pub fn f1(lifted: &LiftedUsers, i: usize, k: usize, beta: &DMatrix<f64>, b: &CMatrix) -> f64 {
    lifted.signal(i, k, beta, b).log2()
}

pub fn f2(lifted: &LiftedUsers, i: usize, k: usize, beta: &DMatrix<f64>, b: &CMatrix) -> f64 {
    lifted.denominator(i, k, beta, b).log2()
}

pub fn dc_linearize(lifted: &LiftedUsers, i: usize, k: usize, beta: &DMatrix<f64>, anchor: &CMatrix) -> Result<DcLinearization> {
    let signal = lifted.signal(i, k, beta, anchor);
    let d = lifted.denominator(i, k, beta, anchor);
    if !(signal > 0.0 && d > 0.0) {
        return Err(Error::Infeasible(format!("user ({i}, {k}) has no signal at the anchor")));
    }
    let n = lifted.dim();
    let mut gradient = CMatrix::zeros(n, n);
    let scale = 1.0 / (d * std::f64::consts::LN_2);
    for (c, r) in lifted.denominator_terms(i, k, beta) {
        let w = &lifted.omega[r];
        gradient.gerc((c * scale).into(), w, w, 1.0.into());
    }
    Ok(DcLinearization {
        f1_anchor: signal.log2(),
        f2_anchor: d.log2(),
        gradient,
        anchor: anchor.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankOnePenalty {
    /// tr(B) − ‖B‖₂.
    pub exact: f64,
    /// tr(B) − ‖B⁽ᵗ⁾‖₂ − Re tr(ϰϰᴴ(B − B⁽ᵗ⁾)), never below `exact`.
    pub surrogate: f64,
}

pub fn rank_one_penalty(b: &CMatrix, anchor: &CMatrix) -> RankOnePenalty {
    let trace = b.trace().re;
    let (lambda, _) = leading_eigenpair(b);
    let (lambda_t, kappa) = leading_eigenpair(anchor);
    let tangent = lambda_t + quad_form(b, &kappa) - quad_form(anchor, &kappa);
    RankOnePenalty {
        exact: trace - lambda,
        surrogate: trace - tangent,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extraction {
    Eigenvector,
    Randomized,
    /// No candidate beat the starting reflection.
    Initial,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage2TraceRecord {
    pub iteration: usize,
    /// Best EE reached so far.
    pub energy_efficiency: f64,
    pub exact_penalty: f64,
    pub eta: f64,
    /// Surrogate objective at the solver output, penalty included; `None`
    /// for the starting point.
    pub surrogate: Option<f64>,
    pub newton_steps: usize,
}

#[derive(Debug, Clone)]
pub struct ReflectionState {
    /// Unit-modulus reflection vector.
    pub b: CVector,
    /// Last conic solution.
    pub lift: CMatrix,
    pub eta: f64,
    /// Eigenvalues of `lift`, ascending.
    pub eigenvalues: DVector<f64>,
    pub leading_eigenvector: CVector,
    pub energy_efficiency: f64,
    pub initial_energy_efficiency: f64,
    pub extraction: Extraction,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<Stage2TraceRecord>,
}

/// Penalised surrogate problem at anchor B⁽ᵗ⁾.
struct Surrogate {
    problem: SdpProblem,
    constant: f64,
}

fn build_surrogate(
    lifted: &LiftedUsers,
    beta: &DMatrix<f64>,
    anchor: &CMatrix,
    eta: f64,
    config: &SystemConfig,
    min_sinr: f64,
) -> Result<Surrogate> {
    let n = lifted.dim();
    let (ni, nk) = (lifted.num_clusters, lifted.users_per_cluster);
    let (_, kappa) = leading_eigenpair(anchor);
    let mut objective = CMatrix::identity(n, n) * C64::from(-eta);
    objective.gerc(eta.into(), &kappa, &kappa, 1.0.into());
    let mut problem = SdpProblem::new(CMatrix::zeros(n, n));
    problem.vectors = lifted.omega.clone();
    let mut constant = 0.0;

    for i in 0..ni {
        let power = lifted.beam_norm_sq[i] * config.cluster_power * beta.row(i).sum() + config.circuit_power;
        for k in 0..nk {
            let gamma = lifted.sinr(i, k, beta, anchor);
            if !(gamma > 0.0) || !gamma.is_finite() {
                continue;
            }
            let sca = sca_bound(gamma)?;
            let dc = dc_linearize(lifted, i, k, beta, anchor)?;
            // weight · [ln signal − ln D̄] in nats, plus Ω.
            let weight = config.bandwidth * sca.zeta / (std::f64::consts::LN_2 * power);
            problem.add_log_term(weight, Operand::Factored(vec![(beta[(i, k)], lifted.index(i, k, i))]), 0.0);
            let ln2 = std::f64::consts::LN_2;
            objective -= &dc.gradient * C64::from(weight * ln2);
            constant += -weight * ln2 * (dc.f2_anchor - crate::linalg::herm_inner(&dc.gradient, anchor))
                + config.bandwidth * sca.omega / power;
        }
    }
    problem.objective = crate::linalg::hermitian_part(&objective);

    for i in 0..ni {
        for k in 0..nk {
            if min_sinr > 0.0 {
                // β_k S_own − γ(later S_own + Σ_j S_j S_ij) ≥ γ.
                let mut terms: Vec<(f64, usize)> = lifted
                    .denominator_terms(i, k, beta)
                    .into_iter()
                    .map(|(c, r)| (-min_sinr * c, r))
                    .collect();
                terms.push((beta[(i, k)], lifted.index(i, k, i)));
                problem.add_constraint(Operand::Factored(terms), min_sinr);
            }
            if k + 1 < nk {
                let margin = beta[(i, k)] - (k + 1..nk).map(|l| beta[(i, l)]).sum::<f64>();
                let gap = config.sic_power_gap / config.noise_power;
                problem.add_constraint(Operand::Factored(vec![(margin, lifted.index(i, k + 1, i))]), gap);
            }
        }
    }
    Ok(Surrogate { problem, constant })
}

impl Surrogate {
    fn value(&self, b: &CMatrix) -> f64 {
        self.problem.objective_value(b) + self.constant
    }
}

/// True EE at `b` with the stage 1 allocation, or None if a constraint fails.
fn evaluate(lifted: &LiftedUsers, b: &CVector, stage1: &Stage1State, config: &SystemConfig) -> Result<Option<f64>> {
    let links = lifted.links(b)?;
    if !is_feasible(&links, &stage1.beta, config, stage1.min_sinr) {
        return Ok(None);
    }
    Ok(Some(links.energy_efficiency(&stage1.beta, config)))
}

/// Recovers a unit-modulus vector from a lifted solution: the phase of the
/// leading eigenvector when it is feasible, otherwise the best feasible of
/// `candidates` Gaussian draws shaped by the solution.
pub fn extract_reflection<R: Rng + ?Sized>(
    lift: &CMatrix,
    lifted: &LiftedUsers,
    stage1: &Stage1State,
    config: &SystemConfig,
    candidates: usize,
    rng: &mut R,
) -> Result<Option<(CVector, f64, Extraction)>> {
    let (values, vectors) = hermitian_eigen(lift);
    let n = lift.nrows();
    let leading = unit_modulus(&vectors.column(n - 1).into_owned());
    if let Some(ee) = evaluate(lifted, &leading, stage1, config)? {
        return Ok(Some((leading, ee, Extraction::Eigenvector)));
    }
    let root = DVector::from_iterator(n, values.iter().map(|&v| C64::from(v.max(0.0).sqrt())));
    let mut best: Option<(CVector, f64, Extraction)> = None;
    for _ in 0..candidates {
        let z = CVector::from_fn(n, |r, _| complex_gaussian(rng) * root[r]);
        let b = unit_modulus(&(&vectors * z));
        if let Some(ee) = evaluate(lifted, &b, stage1, config)? {
            if best.as_ref().is_none_or(|(_, e, _)| ee > *e) {
                best = Some((b, ee, Extraction::Randomized));
            }
        }
    }
    Ok(best)
}

/// Runs the penalised SCA from `b0` and returns the best reflection found;
/// the EE never ends below that of `b0`.
pub fn orca_iterate<R: Rng + ?Sized>(
    lifted: &LiftedUsers,
    stage1: &Stage1State,
    config: &SystemConfig,
    b0: &CVector,
    rng: &mut R,
) -> Result<ReflectionState> {
    config.validate()?;
    let links0 = lifted.links(b0)?;
    let initial_ee = links0.energy_efficiency(&stage1.beta, config);
    let mut best = (b0.clone(), initial_ee, Extraction::Initial);
    let mut anchor = outer(b0);
    let mut eta = config.penalty_initial;
    let mut trace = vec![Stage2TraceRecord {
        iteration: 0,
        energy_efficiency: initial_ee,
        exact_penalty: rank_one_penalty(&anchor, &anchor).exact,
        eta,
        surrogate: None,
        newton_steps: 0,
    }];
    let options = |initial: &CMatrix| SolveOptions {
        tolerance: config.solver_tolerance,
        max_iters: config.solver_max_iters,
        initial: Some(initial.clone()),
    };
    let mut converged = false;
    let mut iterations = 0;
    let mut previous = initial_ee;

    while iterations < config.stage2_max_iters {
        iterations += 1;
        let surrogate = build_surrogate(lifted, &stage1.beta, &anchor, eta, config, stage1.min_sinr)?;
        let solution = match conic::solve(&surrogate.problem, &options(&anchor)) {
            Ok(s) => s,
            // No interior point around this anchor: keep what we have.
            Err(Error::Infeasible(_)) => break,
            Err(e) => return Err(e),
        };
        let lift = solution.matrix;
        let penalty = rank_one_penalty(&lift, &anchor);
        if let Some((b, ee, how)) =
            extract_reflection(&lift, lifted, stage1, config, config.randomization_candidates, rng)?
        {
            if ee > best.1 {
                best = (b, ee, how);
            }
        }
        trace.push(Stage2TraceRecord {
            iteration: iterations,
            energy_efficiency: best.1,
            exact_penalty: penalty.exact,
            eta,
            surrogate: Some(surrogate.value(&lift)),
            newton_steps: solution.newton_steps,
        });
        anchor = lift;
        let rank_one = penalty.exact <= config.penalty_tolerance * anchor.trace().re;
        if !rank_one {
            eta = (eta * config.penalty_growth).min(config.penalty_max);
        } else if (best.1 - previous).abs() <= config.stage2_tolerance * previous.abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
        previous = best.1;
    }

    let (eigenvalues, vectors) = hermitian_eigen(&anchor);
    let n = anchor.nrows();
    Ok(ReflectionState {
        b: best.0,
        leading_eigenvector: vectors.column(n - 1).into_owned(),
        eigenvalues,
        lift: anchor,
        eta,
        energy_efficiency: best.1,
        initial_energy_efficiency: initial_ee,
        extraction: best.2,
        iterations,
        converged,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ONE;

    #[test]
    fn rank_one_has_zero_exact_penalty() {
        let b = CVector::from_fn(5, |n, _| C64::from_polar(1.0, 0.3 * n as f64));
        let lift = outer(&b);
        let p = rank_one_penalty(&lift, &lift);
        assert!(p.exact.abs() < 1e-10);
        assert!(p.surrogate.abs() < 1e-10);
    }

    #[test]
    fn identity_penalty_is_n_minus_one() {
        let eye = CMatrix::identity(4, 4);
        let anchor = outer(&CVector::from_element(4, ONE));
        let p = rank_one_penalty(&eye, &anchor);
        assert!((p.exact - 3.0).abs() < 1e-12);
        assert!(p.surrogate >= p.exact - 1e-12);
    }
}
