//! Solves compiled convex programs to ε-optimality.
//!
//! The production path is an operator-splitting (ADMM) iteration over
//! the canonical form, uniform across the fused linear programs and the
//! grouped cone programs. [`reference_solve`] is an independent
//! small-instance oracle: a two-phase dense simplex for linear programs
//! and a long-horizon projected subgradient method for cone programs.
//! It exists for testing and never runs in the fitting path.

mod admm;
mod simplex;
mod subgradient;

use crate::penalty::{BoundsMatrix, ConvexProgram};
use crate::scalar::Scalar;
use thiserror::Error;

pub use admm::SolverWorkspace;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("program has {num_vars} variables, above the reference-solver cap of {cap}")]
    TooLarge { num_vars: usize, cap: usize },
    #[error("reference solver found the program infeasible")]
    Infeasible,
    #[error("bounds matrix is singular, cannot run the subgradient oracle")]
    SingularBounds,
}

/// Termination state of one solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    MaxIterations,
    Infeasible,
}

/// Solver knobs. The tolerance is relative (scaled primal/dual residuals).
#[derive(Debug, Clone, Copy)]
pub struct SolverSettings<S: Scalar> {
    pub tolerance: S,
    pub max_iterations: usize,
    pub verbose: bool,
}

impl<S: Scalar> Default for SolverSettings<S> {
    fn default() -> Self {
        SolverSettings {
            tolerance: S::cast(1e-7),
            max_iterations: 50_000,
            verbose: false,
        }
    }
}

impl<S: Scalar> SolverSettings<S> {
    pub fn with_tolerance(tolerance: S) -> Self {
        SolverSettings {
            tolerance,
            ..Default::default()
        }
    }
}

/// Result of one solve: the full primal vector over original plus
/// splitting variables, the objective, and the scaled KKT residual
/// achieved at termination.
#[derive(Debug, Clone)]
pub struct Solution<S: Scalar> {
    pub primal: Vec<S>,
    pub objective: S,
    pub status: SolveStatus,
    pub kkt_residual: S,
    pub iterations: usize,
}

impl<S: Scalar> Solution<S> {
    /// The original-variable block of the primal.
    pub fn originals<'a>(&'a self, program: &ConvexProgram<S>) -> &'a [S] {
        &self.primal[..program.num_original]
    }
}

/// One-shot solve with a fresh workspace (cold start).
pub fn solve<S: Scalar>(program: &ConvexProgram<S>, settings: &SolverSettings<S>) -> Solution<S> {
    SolverWorkspace::new(program).solve(program, settings)
}

/// Independent ε-optimal reference for small programs: dense two-phase
/// simplex when no cone blocks are present, projected subgradient with a
/// diminishing step otherwise. Test oracle only.
pub fn reference_solve<S: Scalar>(program: &ConvexProgram<S>) -> Result<Solution<S>, SolverError> {
    const CAP: usize = 40;
    if program.num_vars > CAP {
        return Err(SolverError::TooLarge {
            num_vars: program.num_vars,
            cap: CAP,
        });
    }
    if program.certainly_infeasible {
        return Err(SolverError::Infeasible);
    }
    if matches!(program.bounds.matrix, BoundsMatrix::Empty) {
        // unconstrained: zero is optimal for a norm-like objective
        let v = ndarray::Array1::<S>::zeros(program.num_original);
        let z = program.complete(&v.view());
        return Ok(Solution {
            objective: program.objective_at(&v.view()),
            primal: z,
            status: SolveStatus::Optimal,
            kkt_residual: S::zero(),
            iterations: 0,
        });
    }
    if program.cones.is_empty() {
        simplex::solve_lp(program)
    } else {
        subgradient::solve_cone(program)
    }
}

#[cfg(test)]
mod tests;
