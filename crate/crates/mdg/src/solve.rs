//! Solver dispatch with timing and the trace constraint check.

use std::time::Instant;

use mdg_core::assembly::SaddlePointSystem;
use mdg_core::solver::{self, DiscreteSolution, MinresOptions, SolveReport, SolverMethod};
use mdg_core::{Error, Mesh, Result};

use crate::direct::{solve_direct, SchurPreconditioner};

/// Allowed `|int tr(sigma_h)|` relative to `|sigma_h|` after a solve.
pub const TRACE_TOLERANCE: f64 = 1e-9;

/// Solve the assembled system with `method` to relative residual `tolerance`.
pub fn solve(
    system: &SaddlePointSystem,
    mesh: &Mesh,
    method: SolverMethod,
    tolerance: f64,
) -> Result<(DiscreteSolution, SolveReport)> {
    let start = Instant::now();
    let (solution, mut report) = match method {
        SolverMethod::Direct => solve_direct(system, mesh, tolerance)?,
        SolverMethod::Minres => {
            let pre = SchurPreconditioner::new(system, mesh)?;
            let options = MinresOptions { tolerance, max_iterations: None };
            solver::solve_minres(system, &pre, &options)?
        }
    };
    report.wall_time_seconds = start.elapsed().as_secs_f64();
    let trace = solution.trace_integral(system);
    let scale = solution.sigma.values.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
    if !(trace.abs() <= TRACE_TOLERANCE * scale) {
        return Err(Error::SolverFailure {
            message: format!("trace constraint violated after solve: int tr(sigma_h) = {trace:e}"),
            residual_history: vec![report.relative_residual],
        });
    }
    Ok((solution, report))
}
