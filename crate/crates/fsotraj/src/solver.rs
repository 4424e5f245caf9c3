//! [`ConicSolver`] backed by the Clarabel interior-point solver.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};
use fsotraj_core::scp::{Cone, ConicProgram, ConicSolution, ConicSolver, SolveError};

#[derive(Debug, Clone, Copy)]
pub struct ClarabelSolver {
    pub max_iterations: u32,
    /// Accept the solver's reduced-accuracy exit.
    pub accept_almost_solved: bool,
}

impl Default for ClarabelSolver {
    fn default() -> Self {
        ClarabelSolver { max_iterations: 200, accept_almost_solved: true }
    }
}

fn csc(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> CscMatrix<f64> {
    let (mut i, mut j, mut v) = (Vec::with_capacity(triplets.len()), Vec::with_capacity(triplets.len()), Vec::with_capacity(triplets.len()));
    for &(r, c, x) in triplets {
        i.push(r);
        j.push(c);
        v.push(x);
    }
    CscMatrix::new_from_triplets(rows, cols, i, j, v)
}

impl ConicSolver for ClarabelSolver {
    fn solve(&self, program: &ConicProgram, tolerance: f64) -> Result<ConicSolution, SolveError> {
        let n = program.n_vars();
        let m = program.n_rows();
        let p = csc(n, n, program.quadratic_triplets());
        let a = csc(m, n, program.constraint_triplets());
        let cones: Vec<SupportedConeT<f64>> = program
            .cones()
            .iter()
            .map(|c| match *c {
                Cone::Zero(k) => SupportedConeT::ZeroConeT(k),
                Cone::Nonneg(k) => SupportedConeT::NonnegativeConeT(k),
                Cone::SecondOrder(k) => SupportedConeT::SecondOrderConeT(k),
            })
            .collect();
        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .max_iter(self.max_iterations)
            .tol_feas(tolerance)
            .tol_gap_abs(tolerance)
            .tol_gap_rel(tolerance)
            .build()
            .map_err(|e| SolveError::Numerical(format!("settings: {e:?}")))?;
        let mut solver = DefaultSolver::new(&p, program.linear_cost(), &a, program.rhs(), &cones, settings)
            .map_err(|e| SolveError::Numerical(format!("{e}")))?;
        solver.solve();
        let sol = &solver.solution;
        match sol.status {
            SolverStatus::Solved => {}
            SolverStatus::AlmostSolved if self.accept_almost_solved => {}
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => return Err(SolveError::Infeasible),
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => return Err(SolveError::Unbounded),
            SolverStatus::MaxIterations => return Err(SolveError::MaxIterations),
            other => return Err(SolveError::Numerical(format!("{other:?}"))),
        }
        Ok(ConicSolution {
            objective: sol.obj_val + program.objective_constant(),
            kkt_residual: sol.r_prim.max(sol.r_dual),
            iterations: sol.iterations,
            x: sol.x.clone(),
        })
    }
}
