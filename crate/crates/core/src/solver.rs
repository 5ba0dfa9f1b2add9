//! Iterative solution of the saddle point system and the discrete solution
//! type shared with the sparse direct path.

use alloc::string::String;
use alloc::vec::Vec;

use crate::assembly::{cell_adjacency, SaddlePointSystem};
use crate::dense;
use crate::error::{Error, Result};
use crate::math;
use crate::mesh::Mesh;
use crate::space::FieldCoefficients;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMethod {
    Direct,
    Minres,
}

impl SolverMethod {
    pub fn name(self) -> &'static str {
        match self {
            SolverMethod::Direct => "direct",
            SolverMethod::Minres => "minres",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub method: SolverMethod,
    /// `|M x - rhs| / |rhs|`, recomputed from the returned solution.
    pub relative_residual: f64,
    /// Zero for direct solves.
    pub iterations: usize,
    /// Filled in by callers that have a clock.
    pub wall_time_seconds: f64,
}

/// `(sigma_h, u_h, lambda)`
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSolution {
    pub sigma: FieldCoefficients,
    pub velocity: FieldCoefficients,
    pub multiplier: f64,
}

impl DiscreteSolution {
    pub fn from_vector(system: &SaddlePointSystem, x: &[f64]) -> Result<Self> {
        if x.len() != system.size() {
            return Err(Error::DimensionMismatch(alloc::format!(
                "solution vector has {} entries, system has {}",
                x.len(),
                system.size()
            )));
        }
        let (s, u, l) = system.split(x);
        Ok(DiscreteSolution {
            sigma: FieldCoefficients::new(&system.spaces.stress, s.to_vec())?,
            velocity: FieldCoefficients::new(&system.spaces.velocity, u.to_vec())?,
            multiplier: l,
        })
    }

    pub fn to_vector(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.sigma.values.len() + self.velocity.values.len() + 1);
        x.extend_from_slice(&self.sigma.values);
        x.extend_from_slice(&self.velocity.values);
        x.push(self.multiplier);
        x
    }

    /// Map a unit-viscosity solution back to viscosity `nu`: stress (and so
    /// pressure) is multiplied by `nu`, velocity is unchanged.
    pub fn nu_unscale(mut self, nu: f64) -> Result<Self> {
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(Error::InvalidParameter(alloc::format!("viscosity must be positive, got {nu}")));
        }
        crate::problems::nu_unscale_values(&mut self.sigma.values, nu);
        self.multiplier *= nu;
        Ok(self)
    }

    /// `int tr(sigma_h)`
    pub fn trace_integral(&self, system: &SaddlePointSystem) -> f64 {
        system.c.iter().zip(&self.sigma.values).map(|(a, b)| a * b).sum()
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    math::sqrt(dot(v, v))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `|M x - rhs| / |rhs|` (absolute if `rhs = 0`).
pub fn relative_residual(system: &SaddlePointSystem, x: &[f64], rhs: &[f64]) -> f64 {
    let mut r = alloc::vec![0.0; x.len()];
    system.apply(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(rhs) {
        *ri -= bi;
    }
    let b = norm(rhs);
    if b > 0.0 {
        norm(&r) / b
    } else {
        norm(&r)
    }
}

/// True residual checks without progress before MINRES gives up.
const STAGNATION_CHECKS: usize = 10;

/// Iteration cap `10 sqrt(N) + 1000`.
pub fn iteration_cap(n: usize) -> usize {
    10 * math::sqrt(n as f64) as usize + 1000
}

/// Symmetric positive definite preconditioner for MINRES.
#[derive(Debug, Clone)]
pub enum Preconditioner {
    Identity,
    BlockDiagonal(BlockDiagonal),
}

/// Application of a symmetric positive definite operator `z = P^{-1} r`.
pub trait ApplyPreconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

impl ApplyPreconditioner for Preconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        match self {
            Preconditioner::Identity => z.copy_from_slice(r),
            Preconditioner::BlockDiagonal(b) => b.apply(r, z),
        }
    }
}

/// `diag(P_sigma, S, s_lambda)` with cell blocks
/// `P_K = A_KK + sum_T B_TK^T S_TT^{-1} B_TK`, the cell-diagonal part of
/// `A + B^T S^{-1} B`, and `s_lambda = c^T P_sigma^{-1} c`.
#[derive(Debug, Clone)]
pub struct BlockDiagonal {
    stress_block: usize,
    velocity_block: usize,
    /// Cholesky factors, one per cell.
    stress_factors: Vec<Vec<f64>>,
    velocity_factors: Vec<Vec<f64>>,
    multiplier_scale: f64,
}

impl BlockDiagonal {
    pub fn new(system: &SaddlePointSystem, mesh: &Mesh) -> Result<Self> {
        let ns = system.spaces.stress.dofs_per_cell();
        let nv = system.spaces.velocity.dofs_per_cell();
        let cells = system.spaces.stress.num_cells();
        if cells != mesh.num_cells() {
            return Err(Error::SpaceMismatch(alloc::format!(
                "system has {cells} cells, mesh has {}",
                mesh.num_cells()
            )));
        }
        let mut velocity_factors = Vec::with_capacity(cells);
        let mut s_inv = Vec::with_capacity(cells);
        for t in 0..cells {
            let s = system.s.dense_block(t * nv, t * nv, nv, nv);
            let l = dense::cholesky(&s, nv).ok_or_else(|| Error::SolverFailure {
                message: alloc::format!("velocity mass block of cell {t} is not positive definite"),
                residual_history: Vec::new(),
            })?;
            velocity_factors.push(l);
            s_inv.push(dense::spd_inverse(&s, nv).unwrap_or_default());
        }
        let adjacency = cell_adjacency(mesh);
        let mut stress_factors = Vec::with_capacity(cells);
        let mut bts = alloc::vec![0.0; ns * nv];
        for (k, adj) in adjacency.iter().enumerate() {
            let mut p = system.a.dense_block(k * ns, k * ns, ns, ns);
            for &t in adj {
                let b = system.b.dense_block(t * nv, k * ns, nv, ns);
                let si = &s_inv[t];
                // bts = B^T S^{-1}, then p += bts B
                for i in 0..ns {
                    for j in 0..nv {
                        bts[i * nv + j] = (0..nv).map(|l| b[l * ns + i] * si[l * nv + j]).sum();
                    }
                }
                for i in 0..ns {
                    for j in 0..ns {
                        p[i * ns + j] += (0..nv).map(|l| bts[i * nv + l] * b[l * ns + j]).sum::<f64>();
                    }
                }
            }
            for i in 0..ns {
                for j in i + 1..ns {
                    let v = 0.5 * (p[i * ns + j] + p[j * ns + i]);
                    p[i * ns + j] = v;
                    p[j * ns + i] = v;
                }
            }
            let scale = (0..ns).map(|i| p[i * ns + i]).fold(0.0f64, f64::max).max(f64::MIN_POSITIVE);
            let mut shift = 0.0;
            let factor = loop {
                if let Some(l) = dense::cholesky(&p, ns) {
                    break l;
                }
                shift = if shift == 0.0 { 1e-12 * scale } else { shift * 10.0 };
                for i in 0..ns {
                    p[i * ns + i] += shift;
                }
                if shift > scale {
                    return Err(Error::SolverFailure {
                        message: alloc::format!("stress preconditioner block of cell {k} is not positive definite"),
                        residual_history: Vec::new(),
                    });
                }
            };
            stress_factors.push(factor);
        }
        let mut pre = BlockDiagonal {
            stress_block: ns,
            velocity_block: nv,
            stress_factors,
            velocity_factors,
            multiplier_scale: 1.0,
        };
        let mut z = system.c.clone();
        pre.solve_stress(&mut z);
        let s = dot(&system.c, &z);
        pre.multiplier_scale = if s > 0.0 && s.is_finite() { s } else { 1.0 };
        Ok(pre)
    }

    fn solve_stress(&self, z: &mut [f64]) {
        let ns = self.stress_block;
        for (k, l) in self.stress_factors.iter().enumerate() {
            dense::cholesky_solve(l, ns, &mut z[k * ns..(k + 1) * ns]);
        }
    }

    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
        let n_sigma = self.stress_block * self.stress_factors.len();
        let nv = self.velocity_block;
        let (zs, rest) = z.split_at_mut(n_sigma);
        self.solve_stress(zs);
        for (t, l) in self.velocity_factors.iter().enumerate() {
            dense::cholesky_solve(l, nv, &mut rest[t * nv..(t + 1) * nv]);
        }
        let last = rest.len() - 1;
        rest[last] /= self.multiplier_scale;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinresOptions {
    /// Relative residual target `|M x - rhs| / |rhs|`.
    pub tolerance: f64,
    /// Defaults to [`iteration_cap`] of the system size.
    pub max_iterations: Option<usize>,
}

impl Default for MinresOptions {
    fn default() -> Self {
        MinresOptions { tolerance: 1e-10, max_iterations: None }
    }
}

/// Preconditioned MINRES for a symmetric operator. Returns the iterate, the
/// iteration count and the history of true relative residuals checked along
/// the way (the recurrence only tracks the preconditioned residual). When the
/// true residual stalls above the tolerance, the iteration restarts on the
/// current residual.
pub fn minres<F, P>(
    apply: F,
    rhs: &[f64],
    preconditioner: &P,
    options: &MinresOptions,
) -> Result<(Vec<f64>, usize, Vec<f64>)>
where
    F: Fn(&[f64], &mut [f64]),
    P: ApplyPreconditioner + ?Sized,
{
    let n = rhs.len();
    let tol = options.tolerance;
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(alloc::format!("tolerance must be positive, got {tol}")));
    }
    let cap = options.max_iterations.unwrap_or_else(|| iteration_cap(n));
    let mut x = alloc::vec![0.0; n];
    let bnorm = norm(rhs);
    let mut history = Vec::new();
    if bnorm == 0.0 {
        return Ok((x, 0, history));
    }
    let mut iterations = 0;
    let mut r = rhs.to_vec();
    let mut rel = 1.0;
    for _ in 0..=MAX_RESTARTS {
        let Cycle { x: dx, iterations: it, converged } =
            cycle(&apply, &r, preconditioner, tol / rel, cap - iterations, rel, &mut history)?;
        iterations += it;
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi += di;
        }
        apply(&x, &mut r);
        for (ri, bi) in r.iter_mut().zip(rhs) {
            *ri = bi - *ri;
        }
        let next = norm(&r) / bnorm;
        if converged || next <= tol {
            return Ok((x, iterations, history));
        }
        if !(next < 0.5 * rel) || iterations >= cap {
            rel = next;
            break;
        }
        rel = next;
    }
    history.push(rel);
    Err(Error::SolverFailure {
        message: alloc::format!(
            "minres did not reach relative residual {tol:e}: stopped after {iterations} of {cap} iterations at {rel:e}"
        ),
        residual_history: history,
    })
}

/// Restarts of [`minres`] after the true residual stalls.
const MAX_RESTARTS: usize = 4;

struct Cycle {
    x: Vec<f64>,
    iterations: usize,
    converged: bool,
}

/// One MINRES run from zero on `rhs`; `scale` maps its relative residuals to
/// those of the original system for the history.
fn cycle<F, P>(
    apply: &F,
    rhs: &[f64],
    preconditioner: &P,
    tol: f64,
    cap: usize,
    scale: f64,
    history: &mut Vec<f64>,
) -> Result<Cycle>
where
    F: Fn(&[f64], &mut [f64]),
    P: ApplyPreconditioner + ?Sized,
{
    let n = rhs.len();
    let mut x = alloc::vec![0.0; n];
    let bnorm = norm(rhs);
    if bnorm == 0.0 {
        return Ok(Cycle { x, iterations: 0, converged: true });
    }
    let true_residual = |x: &[f64]| {
        let mut r = alloc::vec![0.0; n];
        apply(x, &mut r);
        let mut s = 0.0;
        for (ri, bi) in r.iter().zip(rhs) {
            s += (ri - bi) * (ri - bi);
        }
        math::sqrt(s) / bnorm
    };

    let mut v_old = alloc::vec![0.0; n];
    let mut v = rhs.to_vec();
    let mut z = alloc::vec![0.0; n];
    preconditioner.apply(&v, &mut z);
    let mut gamma = math::sqrt(dot(&z, &v));
    let gamma1 = gamma;
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::SolverFailure {
            message: String::from("preconditioner is not positive definite on the right-hand side"),
            residual_history: core::mem::take(history),
        });
    }
    let mut gamma_old = 1.0;
    let mut eta = gamma;
    let (mut s_old, mut s) = (0.0, 0.0);
    let (mut c_old, mut c) = (1.0, 1.0);
    let mut w_old = alloc::vec![0.0; n];
    let mut w = alloc::vec![0.0; n];
    let mut az = alloc::vec![0.0; n];
    let mut z_next = alloc::vec![0.0; n];
    // Preconditioned-residual target; tightened whenever the true residual
    // lags behind it.
    let mut target = tol;
    // Checks since the true residual last dropped by a tenth; the iteration
    // stops at the rounding floor rather than running to the cap.
    let mut best = f64::INFINITY;
    let mut stale = 0;
    let mut record = |r: f64, history: &mut Vec<f64>| {
        history.push(r * scale);
        if r < 0.9 * best {
            best = r;
            stale = 0;
        } else {
            stale += 1;
        }
        stale >= STAGNATION_CHECKS
    };
    let mut iterations = 0;
    for it in 1..=cap {
        iterations = it;
        z.iter_mut().for_each(|zi| *zi /= gamma);
        apply(&z, &mut az);
        let delta = dot(&az, &z);
        let mut v_new = az.clone();
        for i in 0..n {
            v_new[i] -= (delta / gamma) * v[i] + (gamma / gamma_old) * v_old[i];
        }
        preconditioner.apply(&v_new, &mut z_next);
        let zv = dot(&z_next, &v_new);
        if zv < 0.0 || !zv.is_finite() {
            return Err(Error::SolverFailure {
                message: alloc::format!("preconditioner lost definiteness at iteration {it}"),
                residual_history: core::mem::take(history),
            });
        }
        let gamma_new = math::sqrt(zv);
        let a0 = c * delta - c_old * s * gamma;
        let a1 = math::hypot(a0, gamma_new);
        let a2 = s * delta + c_old * c * gamma;
        let a3 = s_old * gamma;
        if a1 == 0.0 {
            return Err(Error::SolverFailure {
                message: alloc::format!("breakdown at iteration {it}"),
                residual_history: core::mem::take(history),
            });
        }
        let c_new = a0 / a1;
        let s_new = gamma_new / a1;
        for i in 0..n {
            let wn = (z[i] - a3 * w_old[i] - a2 * w[i]) / a1;
            w_old[i] = w[i];
            w[i] = wn;
            x[i] += c_new * eta * wn;
        }
        eta = -s_new * eta;
        (c_old, c) = (c, c_new);
        (s_old, s) = (s, s_new);
        core::mem::swap(&mut v_old, &mut v);
        v = v_new;
        core::mem::swap(&mut z, &mut z_next);
        gamma_old = gamma;
        gamma = gamma_new;

        let estimate = eta.abs() / gamma1;
        if estimate <= target || gamma == 0.0 {
            let r = true_residual(&x);
            if r <= tol {
                history.push(r * scale);
                return Ok(Cycle { x, iterations: it, converged: true });
            }
            let stagnant = record(r, history);
            target = (target * 0.5 * tol / r).min(estimate * 0.5);
            if stagnant || gamma == 0.0 || target < 1e-3 * f64::EPSILON {
                break;
            }
        } else if it % 50 == 0 && record(true_residual(&x), history) {
            break;
        }
    }
    Ok(Cycle { x, iterations, converged: false })
}

/// Solve the assembled system with preconditioned MINRES.
pub fn solve_minres<P: ApplyPreconditioner + ?Sized>(
    system: &SaddlePointSystem,
    preconditioner: &P,
    options: &MinresOptions,
) -> Result<(DiscreteSolution, SolveReport)> {
    let rhs = system.rhs();
    let (x, iterations, _) = minres(|x, y| system.apply(x, y), &rhs, preconditioner, options)?;
    let relative_residual = relative_residual(system, &x, &rhs);
    let solution = DiscreteSolution::from_vector(system, &x)?;
    Ok((solution, SolveReport { method: SolverMethod::Minres, relative_residual, iterations, wall_time_seconds: 0.0 }))
}

/// Dense LU on the global matrix; for small systems and tests.
pub fn solve_dense(system: &SaddlePointSystem) -> Result<(DiscreteSolution, SolveReport)> {
    let m = system.global_matrix();
    let n = m.nrows;
    let a = m.dense_block(0, 0, n, n);
    let rhs = system.rhs();
    let x = dense::lu_solve(&a, n, &rhs)?;
    let relative_residual = relative_residual(system, &x, &rhs);
    let solution = DiscreteSolution::from_vector(system, &x)?;
    Ok((solution, SolveReport { method: SolverMethod::Direct, relative_residual, iterations: 0, wall_time_seconds: 0.0 }))
}
