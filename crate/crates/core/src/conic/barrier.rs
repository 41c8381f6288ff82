//! Primal log-barrier path following.
//!
//! The barrier Hessian at B is B⁻¹(·)B⁻¹ plus one rank-one term per linear
//! row, diagonal bound and log term. The first part inverts in closed form
//! (X ↦ BXB), so each Newton step only needs a Gram system whose size is the
//! number of terms, solved by Woodbury.

use nalgebra::DMatrix;

use super::{Operand, SdpProblem, SdpSolution, SolveOptions, SolveStatus};
use crate::error::{Error, Result};
use crate::linalg::{cholesky, herm_inner, hermitian_part, matmul, quad_form, sandwich, CMatrix, CVector, C64};

const ARMIJO: f64 = 0.25;
const BACKTRACK: f64 = 0.5;
const CENTRING_TOL: f64 = 1e-3;
const T_GROWTH: f64 = 10.0;

/// One operand as seen by the Newton system.
#[derive(Clone, Copy)]
enum Kop<'a> {
    Dense(&'a CMatrix),
    Factored(&'a [(f64, usize)]),
    /// e_n e_nᴴ.
    Unit(usize),
}

/// B K B for some operand K.
enum Image {
    Dense(CMatrix),
    LowRank(Vec<(f64, CVector)>),
}

/// A scalar function a(B, s) = scale·⟨K, B⟩ + offset + sigma·s entering the
/// barrier as weight·log a. Weights are 1 for constraints and t·w for log
/// objective terms.
struct Term<'a> {
    op: Kop<'a>,
    scale: f64,
    offset: f64,
    sigma: f64,
    weight: f64,
    /// Objective terms scale with t.
    objective: bool,
}

struct Barrier<'a> {
    p: &'a SdpProblem,
    terms: Vec<Term<'a>>,
    /// Phase I: maximise the slack s below this cap instead of the objective.
    slack_cap: Option<f64>,
}

#[derive(Clone)]
struct Point {
    b: CMatrix,
    s: f64,
}

impl<'a> Barrier<'a> {
    fn kop(op: &'a Operand) -> Kop<'a> {
        match op {
            Operand::Dense(a) => Kop::Dense(a),
            Operand::Factored(t) => Kop::Factored(t),
        }
    }

    fn value(&self, op: Kop, b: &CMatrix) -> f64 {
        match op {
            Kop::Dense(a) => herm_inner(a, b),
            Kop::Factored(t) => t.iter().map(|&(c, r)| c * quad_form(b, &self.p.vectors[r])).sum(),
            Kop::Unit(n) => b[(n, n)].re,
        }
    }

    fn image(&self, op: Kop, b: &CMatrix) -> Image {
        match op {
            Kop::Dense(a) => Image::Dense(sandwich(b, a)),
            Kop::Factored(t) => Image::LowRank(t.iter().map(|&(c, r)| (c, b * &self.p.vectors[r])).collect()),
            Kop::Unit(n) => Image::LowRank(vec![(1.0, b.column(n).into_owned())]),
        }
    }

    /// ⟨K, image⟩.
    fn inner(&self, op: Kop, img: &Image) -> f64 {
        match img {
            Image::Dense(s) => self.value(op, s),
            Image::LowRank(us) => us
                .iter()
                .map(|(c, u)| {
                    c * match op {
                        Kop::Dense(a) => quad_form(a, u),
                        Kop::Factored(t) => t
                            .iter()
                            .map(|&(cv, r)| cv * self.p.vectors[r].dotc(u).norm_sqr())
                            .sum(),
                        Kop::Unit(n) => u[n].norm_sqr(),
                    }
                })
                .sum(),
        }
    }

    fn args(&self, x: &Point) -> Vec<f64> {
        self.terms
            .iter()
            .map(|t| t.scale * self.value(t.op, &x.b) + t.offset + t.sigma * x.s)
            .collect()
    }

    fn objective(&self, x: &Point) -> f64 {
        match self.slack_cap {
            Some(_) => x.s,
            None => herm_inner(&self.p.objective, &x.b),
        }
    }

    /// Barrier value, or None outside its domain.
    fn phi(&self, x: &Point, t: f64) -> Option<f64> {
        let chol = cholesky(&x.b)?;
        let mut v = t * self.objective(x) + chol.log_det();
        if let Some(cap) = self.slack_cap {
            if x.s >= cap {
                return None;
            }
            v += (cap - x.s).ln();
        }
        for (term, a) in self.terms.iter().zip(self.args(x)) {
            if !(a > 0.0) {
                return None;
            }
            v += self.weight(term, t) * a.ln();
        }
        Some(v)
    }

    fn weight(&self, term: &Term, t: f64) -> f64 {
        if term.objective {
            t * term.weight
        } else {
            term.weight
        }
    }

    /// Newton direction and squared decrement at a strictly feasible point.
    ///
    /// The log det part of the gradient is B⁻¹, and B B⁻¹ B = B, so the
    /// inverse is never formed; that keeps the step accurate as B
    /// approaches low rank.
    fn newton(&self, x: &Point, t: f64) -> Option<(Point, f64)> {
        let args = self.args(x);

        // Gradient without the B⁻¹ term.
        let n = self.p.dim;
        let mut rb = CMatrix::zeros(n, n);
        let mut rs = 0.0;
        match self.slack_cap {
            Some(cap) => rs += t - 1.0 / (cap - x.s),
            None => rb += &self.p.objective * C64::from(t),
        }
        let mut d = Vec::with_capacity(self.terms.len());
        for (term, &a) in self.terms.iter().zip(&args) {
            let w = self.weight(term, t);
            let g = w / a;
            add_operand(self, &mut rb, term.op, g * term.scale);
            rs += g * term.sigma;
            d.push(w / (a * a));
        }
        let rb = hermitian_part(&rb);
        let hs = self.slack_cap.map(|cap| 1.0 / ((cap - x.s) * (cap - x.s)));

        // Woodbury on H0 + Σ d_j k_j k_jᵀ with H0⁻¹ = (B·B, 1/hs).
        let images: Vec<Image> = self.terms.iter().map(|term| self.image(term.op, &x.b)).collect();
        let base = &x.b + sandwich(&x.b, &rb);
        let base_s = hs.map_or(0.0, |h| rs / h);
        let m = self.terms.len();
        let sq: Vec<f64> = d.iter().map(|v| v.sqrt()).collect();
        let mut gram = DMatrix::<f64>::identity(m, m);
        let mut y = nalgebra::DVector::<f64>::zeros(m);
        for (j, tj) in self.terms.iter().enumerate() {
            y[j] = sq[j] * (tj.scale * self.value(tj.op, &base) + tj.sigma * base_s);
            for l in 0..=j {
                let tl = &self.terms[l];
                let mut g = tj.scale * tl.scale * self.inner(tj.op, &images[l]);
                if let Some(h) = hs {
                    g += tj.sigma * tl.sigma / h;
                }
                let v = sq[j] * sq[l] * g;
                gram[(j, l)] += v;
                if l != j {
                    gram[(l, j)] += v;
                }
            }
        }
        let z = if m > 0 {
            let c = gram.cholesky()?;
            let mut z = c.solve(&y);
            z.iter_mut().zip(&sq).for_each(|(z, s)| *z *= s);
            z
        } else {
            y
        };

        let mut db = base;
        let mut ds = base_s;
        // Diagonal terms combine into B diag(c) B.
        let mut diag = vec![0.0; n];
        for (j, term) in self.terms.iter().enumerate() {
            let c = z[j] * term.scale;
            match (&images[j], term.op) {
                (_, Kop::Unit(k)) => diag[k] += c,
                (Image::Dense(s), _) => db -= s * C64::from(c),
                (Image::LowRank(us), _) => {
                    for (cu, u) in us {
                        db.gerc((-c * cu).into(), u, u, 1.0.into());
                    }
                }
            }
            if let Some(h) = hs {
                ds -= z[j] * term.sigma / h;
            }
        }
        if diag.iter().any(|&c| c != 0.0) {
            let mut scaled = x.b.clone();
            for (k, &c) in diag.iter().enumerate() {
                scaled.column_mut(k).scale_mut(c);
            }
            db -= matmul(&scaled, &x.b);
        }
        let db = hermitian_part(&db);
        // ⟨B⁻¹, Δ⟩ = N + ⟨R, B⟩ − Σ z_j ⟨K_j, B⟩.
        let inv_part = n as f64 + herm_inner(&rb, &x.b)
            - self
                .terms
                .iter()
                .enumerate()
                .map(|(j, term)| z[j] * term.scale * self.value(term.op, &x.b))
                .sum::<f64>();
        let decrement = herm_inner(&rb, &db) + inv_part + rs * ds;
        Some((Point { b: db, s: ds }, decrement))
    }

    /// Damped Newton on the barrier at fixed t. Returns false when the step
    /// budget ran out first.
    fn centre(&self, x: &mut Point, t: f64, steps: &mut usize, max_steps: usize, stop: impl Fn(&Point) -> bool) -> Result<bool> {
        let mut phi0 = self.phi(x, t).ok_or_else(|| Error::Infeasible("barrier iterate left the interior".into()))?;
        loop {
            if stop(x) {
                return Ok(true);
            }
            if *steps >= max_steps {
                return Ok(false);
            }
            let (dir, dec) = self
                .newton(x, t)
                .ok_or_else(|| Error::Infeasible("barrier iterate left the interior".into()))?;
            if !(dec.is_finite()) {
                return Err(Error::Infeasible("non-finite Newton decrement".into()));
            }
            if dec / 2.0 <= CENTRING_TOL {
                return Ok(true);
            }
            *steps += 1;
            let mut step = 1.0;
            let mut moved = false;
            for _ in 0..60 {
                let trial = Point {
                    b: hermitian_part(&(&x.b + &dir.b * C64::from(step))),
                    s: x.s + step * dir.s,
                };
                if let Some(v) = self.phi(&trial, t) {
                    if v >= phi0 + ARMIJO * step * dec {
                        *x = trial;
                        phi0 = v;
                        moved = true;
                        break;
                    }
                }
                step *= BACKTRACK;
            }
            if !moved {
                // Rounding floor: the point is as central as it gets.
                return Ok(true);
            }
        }
    }
}

fn add_operand(barrier: &Barrier, acc: &mut CMatrix, op: Kop, c: f64) {
    match op {
        Kop::Dense(a) => *acc += a * C64::from(c),
        Kop::Factored(t) => {
            for &(cv, r) in t {
                let v = &barrier.p.vectors[r];
                acc.gerc((c * cv).into(), v, v, 1.0.into());
            }
        }
        Kop::Unit(n) => acc[(n, n)].re += c,
    }
}

fn operand_norm(p: &SdpProblem, op: &Operand) -> f64 {
    let n = p.operand_dense(op).norm();
    if n > 0.0 {
        n
    } else {
        1.0
    }
}

fn strictly_feasible(p: &SdpProblem, b: &CMatrix) -> bool {
    cholesky(b).is_some()
        && (0..p.dim).all(|n| b[(n, n)].re < 1.0)
        && p.constraints.iter().all(|c| p.operand_value(&c.operand, b) > c.bound)
        && p.log_terms.iter().all(|t| p.operand_value(&t.operand, b) + t.offset > 0.0)
}

fn diag_terms<'a>(n: usize) -> impl Iterator<Item = Term<'a>> {
    (0..n).map(|k| Term {
        op: Kop::Unit(k),
        scale: -1.0,
        offset: 1.0,
        sigma: 0.0,
        weight: 1.0,
        objective: false,
    })
}

/// Strictly feasible start: the caller's point or a scaled identity, pulled
/// into the interior, else a phase I solve.
fn starting_point(p: &SdpProblem, options: &SolveOptions, steps: &mut usize) -> Result<CMatrix> {
    let n = p.dim;
    let eye = CMatrix::identity(n, n);
    let mut tries = Vec::new();
    if let Some(b0) = &options.initial {
        if b0.shape() == (n, n) {
            let b0 = hermitian_part(b0);
            for theta in [0.5, 1e-1, 1e-2, 1e-3] {
                tries.push(&b0 * C64::from(1.0 - theta) + &eye * C64::from(0.5 * theta));
            }
        }
    }
    for s in [0.5, 0.9, 0.99, 0.25, 0.1, 0.01] {
        tries.push(&eye * C64::from(s));
    }
    if let Some(b) = tries.iter().find(|b| strictly_feasible(p, b)) {
        return Ok(b.clone());
    }
    // Phase I from the first candidate inside the cone and the diagonal bound.
    let inside = |b: &CMatrix| cholesky(b).is_some() && (0..n).all(|k| b[(k, k)].re < 1.0);
    let start = tries.into_iter().find(inside).unwrap_or_else(|| &eye * C64::from(0.5));
    phase_one(p, options, steps, start)
}

/// Maximise s subject to normalised rows ≥ s, from `b` inside the cone.
fn phase_one(p: &SdpProblem, options: &SolveOptions, steps: &mut usize, b: CMatrix) -> Result<CMatrix> {
    let n = p.dim;
    let mut terms: Vec<Term> = diag_terms(n).collect();
    for c in &p.constraints {
        let scale = 1.0 / operand_norm(p, &c.operand);
        terms.push(Term {
            op: Barrier::kop(&c.operand),
            scale,
            offset: -c.bound * scale,
            sigma: -1.0,
            weight: 1.0,
            objective: false,
        });
    }
    for l in &p.log_terms {
        let scale = 1.0 / operand_norm(p, &l.operand);
        terms.push(Term {
            op: Barrier::kop(&l.operand),
            scale,
            offset: l.offset * scale,
            sigma: -1.0,
            weight: 1.0,
            objective: false,
        });
    }
    let probe = Barrier {
        p,
        terms,
        slack_cap: None,
    };
    let worst = probe
        .args(&Point { b: b.clone(), s: 0.0 })
        .iter()
        .zip(&probe.terms)
        .filter(|(_, t)| t.sigma != 0.0)
        .map(|(a, _)| *a)
        .fold(f64::INFINITY, f64::min);
    let s0 = worst - 1.0;
    let cap = s0.max(0.0) + n as f64 + 2.0;
    let barrier = Barrier {
        slack_cap: Some(cap),
        ..probe
    };
    let mut x = Point { b, s: s0 };
    let nu = (2 * n + barrier.terms.len() - n + 1) as f64;
    let mut t = 1.0;
    while *steps < options.max_iters {
        let done = barrier.centre(&mut x, t, steps, options.max_iters, |x| x.s > 0.0)?;
        if x.s > 0.0 {
            return Ok(x.b);
        }
        if done && nu / t < 1e-9 {
            break;
        }
        t *= T_GROWTH;
    }
    Err(Error::Infeasible(format!("no strictly feasible point (best slack {:.3e})", x.s)))
}

/// Solves the problem to a duality-gap bound of `tolerance·(1 + |f|)`.
pub fn solve(p: &SdpProblem, options: &SolveOptions) -> Result<SdpSolution> {
    p.validate()?;
    let n = p.dim;
    let mut steps = 0;
    let b0 = starting_point(p, options, &mut steps)?;

    let mut terms: Vec<Term> = diag_terms(n).collect();
    for c in &p.constraints {
        terms.push(Term {
            op: Barrier::kop(&c.operand),
            scale: 1.0,
            offset: -c.bound,
            sigma: 0.0,
            weight: 1.0,
            objective: false,
        });
    }
    for l in &p.log_terms {
        terms.push(Term {
            op: Barrier::kop(&l.operand),
            scale: 1.0,
            offset: l.offset,
            sigma: 0.0,
            weight: l.weight,
            objective: true,
        });
    }
    let barrier = Barrier {
        p,
        terms,
        slack_cap: None,
    };
    let nu = (2 * n + p.constraints.len()) as f64;

    // Initial t balances the objective and barrier gradients.
    let mut x = Point { b: b0, s: 0.0 };
    let mut t = {
        let obj_grad = {
            let mut g = p.objective.clone();
            for (term, a) in barrier.terms.iter().zip(barrier.args(&x)) {
                if term.objective {
                    add_operand(&barrier, &mut g, term.op, term.weight * term.scale / a);
                }
            }
            g.norm()
        };
        let bar_grad = {
            let mut g = cholesky(&x.b).map(|c| c.inverse()).unwrap_or_else(|| CMatrix::zeros(n, n));
            for (term, a) in barrier.terms.iter().zip(barrier.args(&x)) {
                if !term.objective {
                    add_operand(&barrier, &mut g, term.op, term.scale / a);
                }
            }
            g.norm()
        };
        if obj_grad > 0.0 {
            (bar_grad / obj_grad).clamp(1e-8, 1e8)
        } else {
            1.0
        }
    };

    let mut path = Vec::new();
    let status = loop {
        let done = barrier.centre(&mut x, t, &mut steps, options.max_iters, |_| false)?;
        let f = p.objective_value(&x.b);
        if done {
            path.push(f);
            if nu / t <= options.tolerance * (1.0 + f.abs()) {
                break SolveStatus::Optimal;
            }
        } else {
            break SolveStatus::MaxIterations;
        }
        t *= T_GROWTH;
    };
    let gap = nu / if status == SolveStatus::Optimal { t } else { t / T_GROWTH };
    Ok(SdpSolution {
        objective: p.objective_value(&x.b),
        matrix: x.b,
        status,
        gap,
        newton_steps: steps,
        path_objectives: path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{ONE, ZERO};

    fn opts() -> SolveOptions {
        SolveOptions::default()
    }

    #[test]
    fn trace_maximised_at_identity() {
        let p = SdpProblem::new(CMatrix::identity(4, 4));
        let sol = solve(&p, &opts()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective - 4.0).abs() < 1e-5, "{}", sol.objective);
        assert!((&sol.matrix - CMatrix::identity(4, 4)).norm() < 1e-4);
    }

    #[test]
    fn off_diagonal_objective_aligns_phases() {
        let c = CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
        let sol = solve(&SdpProblem::new(c), &opts()).unwrap();
        assert!((sol.objective - 2.0).abs() < 1e-5);
        let ones = CMatrix::from_element(2, 2, ONE);
        assert!((&sol.matrix - ones).norm() < 1e-3);
    }

    #[test]
    fn vacuous_constraint_changes_nothing() {
        let c = CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
        let mut p = SdpProblem::new(c);
        p.add_constraint(Operand::Dense(CMatrix::identity(2, 2)), 0.0);
        let sol = solve(&p, &opts()).unwrap();
        assert!((sol.objective - 2.0).abs() < 1e-5);
    }

    #[test]
    fn phase_one_finds_interior() {
        // Re B_01 ≥ 0.8 excludes ½I.
        let a = CMatrix::from_row_slice(2, 2, &[ZERO, C64::new(0.5, 0.0), C64::new(0.5, 0.0), ZERO]);
        let mut p = SdpProblem::new(CMatrix::zeros(2, 2));
        p.add_constraint(Operand::Dense(a), 0.8);
        let sol = solve(&p, &opts()).unwrap();
        assert!(sol.matrix[(0, 1)].re > 0.8 - 1e-9);
        assert!(p.max_violation(&sol.matrix) <= 0.0);
    }

    #[test]
    fn infeasible_rows_rejected() {
        let mut p = SdpProblem::new(CMatrix::zeros(2, 2));
        p.add_constraint(Operand::Dense(CMatrix::identity(2, 2)), 3.0);
        assert!(matches!(solve(&p, &opts()), Err(Error::Infeasible(_))));
    }

    #[test]
    fn log_term_matches_scalar_optimum() {
        // max −2 B_00 + log(B_00 + 0.1) over B_00 ≤ 1: stationary at 0.4.
        let n = 1;
        let mut c = CMatrix::zeros(n, n);
        c[(0, 0)] = C64::new(-2.0, 0.0);
        let mut p = SdpProblem::new(c);
        let g = p.factored(vec![(1.0, CVector::from_element(1, ONE))]);
        p.add_log_term(1.0, g, 0.1);
        let sol = solve(&p, &opts()).unwrap();
        assert!((sol.matrix[(0, 0)].re - 0.4).abs() < 1e-5, "{}", sol.matrix[(0, 0)]);
    }
}

#[cfg(test)]
mod fd_check {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn newton_matches_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let n = 4;
        let rv = |rng: &mut rand_chacha::ChaCha8Rng| CVector::from_fn(n, |_, _| crate::channel::complex_gaussian(rng));
        let mut c = CMatrix::zeros(n, n);
        for _ in 0..3 {
            let v = rv(&mut rng);
            c.gerc(C64::from(0.7), &v, &v, C64::from(1.0));
        }
        let v = rv(&mut rng);
        c.gerc(C64::from(-2.0), &v, &v, C64::from(1.0));
        let mut p = SdpProblem::new(c);
        let g = p.factored(vec![(1.0, rv(&mut rng)), (0.5, rv(&mut rng))]);
        p.add_log_term(2.0, g, 0.3);
        let a = p.factored(vec![(1.0, rv(&mut rng)), (-0.2, rv(&mut rng))]);
        p.add_constraint(a, -5.0);
        let mut terms: Vec<Term> = diag_terms(n).collect();
        for cst in &p.constraints {
            terms.push(Term { op: Barrier::kop(&cst.operand), scale: 1.0, offset: -cst.bound, sigma: 0.0, weight: 1.0, objective: false });
        }
        for l in &p.log_terms {
            terms.push(Term { op: Barrier::kop(&l.operand), scale: 1.0, offset: l.offset, sigma: 0.0, weight: l.weight, objective: true });
        }
        let bar = Barrier { p: &p, terms, slack_cap: None };
        let mut b = CMatrix::identity(n, n) * C64::from(0.4);
        let w = rv(&mut rng);
        b.gerc(C64::from(0.05), &w, &w, C64::from(1.0));
        let x = Point { b, s: 0.0 };
        for t in [0.1, 1.0, 30.0] {
            let (d, dec) = bar.newton(&x, t).unwrap();
            let h = 1e-5;
            let at = |e: f64| bar.phi(&Point { b: &x.b + &d.b * C64::from(e), s: 0.0 }, t).unwrap();
            let d1 = (at(h) - at(-h)) / (2.0 * h);
            let d2 = (at(h) - 2.0 * at(0.0) + at(-h)) / (h * h);
            eprintln!("t {t} dec {dec:.6e} d1 {d1:.6e} d2 {d2:.6e}");
            assert!((d1 - dec).abs() < 1e-4 * dec.abs().max(1.0));
            assert!((d2 + dec).abs() < 1e-3 * dec.abs().max(1.0));
        }
    }
}
