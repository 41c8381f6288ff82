mod common;

use irs_noma::conic::{solve, Operand, SdpProblem, SolveOptions, SolveStatus};
use irs_noma::linalg::{CMatrix, C64};

#[test]
fn matches_reference_optima_on_3x3_problems() {
    let problems = common::conic_oracle_problems();
    assert_eq!(problems.len(), 50);
    let mut worst = 0.0f64;
    for (idx, (p, reference)) in problems.iter().enumerate() {
        let sol = solve(p, &SolveOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal, "problem {idx}");
        let rel = (sol.objective - reference).abs() / reference.abs().max(1.0);
        worst = worst.max(rel);
        assert!(rel < 1e-3, "problem {idx}: {} vs {reference}", sol.objective);
        assert!(p.max_violation(&sol.matrix) <= 1e-9, "problem {idx} infeasible");
    }
    eprintln!("worst relative deviation {worst:.2e}");
}

/// No sampled feasible point beats the solver.
#[test]
fn dominates_sampled_feasible_points() {
    let mut rng = common::rng(11);
    for (idx, (p, _)) in common::conic_oracle_problems().iter().enumerate().take(20) {
        let sol = solve(p, &SolveOptions::default()).unwrap();
        let mut best = f64::NEG_INFINITY;
        for _ in 0..4000 {
            let rank = 1 + idx % 3;
            let b = common::random_psd(3, rank, &mut rng);
            if p.max_violation(&b) <= 0.0 {
                best = best.max(p.objective_value(&b));
            }
        }
        assert!(sol.objective >= best - 1e-7, "problem {idx}: {} < sampled {best}", sol.objective);
    }
}

#[test]
fn identity_objective_is_exact_at_n4() {
    let sol = solve(&SdpProblem::new(CMatrix::identity(4, 4)), &SolveOptions::default()).unwrap();
    assert!((sol.objective - 4.0).abs() < 1e-6);
    assert!((sol.matrix - CMatrix::identity(4, 4)).norm() < 1e-6);
}

#[test]
fn rank_one_objective_gives_rank_one_solution() {
    let v = irs_noma::linalg::CVector::from_fn(5, |n, _| C64::from_polar(1.0, 0.7 * n as f64));
    let c = irs_noma::linalg::outer(&v);
    let sol = solve(&SdpProblem::new(c), &SolveOptions::default()).unwrap();
    // max |vᴴ b|² over |b_n| ≤ 1 is (Σ|v_n|)² = 25.
    assert!((sol.objective - 25.0).abs() < 1e-4 * 25.0);
}

#[test]
fn empty_log_domain_is_rejected_by_validation() {
    let mut p = SdpProblem::new(CMatrix::identity(2, 2));
    p.add_log_term(-1.0, Operand::Dense(CMatrix::identity(2, 2)), 0.0);
    assert!(p.validate().is_err());
}
