//! Small dense solver for the stage 2 subproblem class:
//!
//! maximize   Re tr(C B) + Σ_q w_q log(Re tr(G_q B) + e_q)
//! subject to Re tr(A_m B) ≥ c_m,   diag(B) ≤ 1,   B ⪰ 0,
//!
//! over complex Hermitian B. Most operands in this crate are short sums of
//! outer products, so they can be stored as coefficients over a shared pool of
//! vectors; the Newton systems then reduce to a small Gram system.

mod barrier;

pub use barrier::solve;

use crate::error::{Error, Result};
use crate::linalg::{herm_inner, hermitian_defect, CMatrix, CVector};

/// A Hermitian operand.
#[derive(Debug, Clone, PartialEq)]
pub enum Operand {
    Dense(CMatrix),
    /// Σ c_r v_r v_rᴴ with v_r taken from the problem's vector pool.
    Factored(Vec<(f64, usize)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub operand: Operand,
    pub bound: f64,
}

/// w log(Re tr(G B) + e) with w > 0.
#[derive(Debug, Clone, PartialEq)]
pub struct LogTerm {
    pub weight: f64,
    pub operand: Operand,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    pub dim: usize,
    pub objective: CMatrix,
    pub log_terms: Vec<LogTerm>,
    pub constraints: Vec<LinearConstraint>,
    pub vectors: Vec<CVector>,
}

impl SdpProblem {
    /// Maximise Re tr(C B) over the diagonal-bounded PSD cone.
    pub fn new(objective: CMatrix) -> Self {
        SdpProblem {
            dim: objective.nrows(),
            objective,
            log_terms: Vec::new(),
            constraints: Vec::new(),
            vectors: Vec::new(),
        }
    }

    fn push_terms(&mut self, terms: Vec<(f64, CVector)>) -> Operand {
        let mut refs = Vec::with_capacity(terms.len());
        for (c, v) in terms {
            refs.push((c, self.vectors.len()));
            self.vectors.push(v);
        }
        Operand::Factored(refs)
    }

    /// Adds an operand made of terms c v vᴴ and returns it, for reuse in
    /// several constraints or log terms.
    pub fn factored(&mut self, terms: Vec<(f64, CVector)>) -> Operand {
        self.push_terms(terms)
    }

    pub fn add_constraint(&mut self, operand: Operand, bound: f64) {
        self.constraints.push(LinearConstraint { operand, bound });
    }

    pub fn add_log_term(&mut self, weight: f64, operand: Operand, offset: f64) {
        self.log_terms.push(LogTerm {
            weight,
            operand,
            offset,
        });
    }

    pub fn operand_value(&self, operand: &Operand, b: &CMatrix) -> f64 {
        match operand {
            Operand::Dense(a) => herm_inner(a, b),
            Operand::Factored(terms) => terms
                .iter()
                .map(|&(c, r)| c * crate::linalg::quad_form(b, &self.vectors[r]))
                .sum(),
        }
    }

    pub fn operand_dense(&self, operand: &Operand) -> CMatrix {
        match operand {
            Operand::Dense(a) => a.clone(),
            Operand::Factored(terms) => {
                let mut a = CMatrix::zeros(self.dim, self.dim);
                for &(c, r) in terms {
                    let v = &self.vectors[r];
                    a.gerc(c.into(), v, v, 1.0.into());
                }
                a
            }
        }
    }

    /// Objective value Re tr(C B) + Σ w log(·); −∞ outside the log domain.
    pub fn objective_value(&self, b: &CMatrix) -> f64 {
        let mut f = herm_inner(&self.objective, b);
        for term in &self.log_terms {
            let g = self.operand_value(&term.operand, b) + term.offset;
            if g <= 0.0 {
                return f64::NEG_INFINITY;
            }
            f += term.weight * g.ln();
        }
        f
    }

    /// Largest violation over the linear rows and the diagonal bound.
    pub fn max_violation(&self, b: &CMatrix) -> f64 {
        let rows = self
            .constraints
            .iter()
            .map(|c| c.bound - self.operand_value(&c.operand, b));
        let diag = (0..self.dim).map(|n| b[(n, n)].re - 1.0);
        rows.chain(diag).fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim;
        if n == 0 {
            return Err(Error::invalid("SDP of dimension zero"));
        }
        let check_dense = |a: &CMatrix| -> Result<()> {
            if a.shape() != (n, n) {
                return Err(Error::dims(format!("{n}x{n}"), format!("{}x{}", a.nrows(), a.ncols())));
            }
            if hermitian_defect(a) > 1e-10 {
                return Err(Error::invalid("SDP operand is not Hermitian"));
            }
            Ok(())
        };
        check_dense(&self.objective)?;
        let check = |op: &Operand| -> Result<()> {
            match op {
                Operand::Dense(a) => check_dense(a),
                Operand::Factored(terms) => {
                    for &(c, r) in terms {
                        let v = self.vectors.get(r).ok_or_else(|| Error::invalid("operand index out of range"))?;
                        if v.len() != n || !c.is_finite() {
                            return Err(Error::invalid("malformed factored operand"));
                        }
                    }
                    Ok(())
                }
            }
        };
        for c in &self.constraints {
            check(&c.operand)?;
            if !c.bound.is_finite() {
                return Err(Error::invalid("constraint bound is not finite"));
            }
        }
        for t in &self.log_terms {
            check(&t.operand)?;
            if !(t.weight > 0.0 && t.weight.is_finite() && t.offset.is_finite()) {
                return Err(Error::invalid("log term needs a positive weight and finite offset"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Target duality-gap bound relative to 1 + |objective|.
    pub tolerance: f64,
    /// Newton step budget over all barrier stages.
    pub max_iters: usize,
    /// Starting point, used when strictly feasible.
    pub initial: Option<CMatrix>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tolerance: 1e-6,
            max_iters: 400,
            initial: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    /// Step budget exhausted; the returned point is the last feasible iterate.
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub matrix: CMatrix,
    pub objective: f64,
    pub status: SolveStatus,
    /// ν / t at the last completed centring step.
    pub gap: f64,
    pub newton_steps: usize,
    /// Objective at the end of each centring stage.
    pub path_objectives: Vec<f64>,
}
