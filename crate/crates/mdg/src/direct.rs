//! Sparse direct solution of the saddle point system.
//!
//! Writing `K = [[A, B^T], [B, -S]]`, the kernel of `K` is spanned by the
//! identity stress mode `z`. The dense multiplier row and column are never
//! factored: the multiplier is `lambda = z.h / z.c` for the reduced stress
//! load `h`, one stress dof of `z` is pinned to zero, and a multiple of `z`
//! restores `c.sigma` afterwards.
//!
//! The default path factors the pinned `K` with a symmetric indefinite
//! (Bunch-Kaufman within supernodes) sparse factorization. The fallback
//! eliminates the velocity cell by cell (`S` is block diagonal) and factors
//! the stress Schur complement `A + B^T S^{-1} B`, which is positive definite
//! once the pinned dof is removed, with a sparse Cholesky factorization.
//! Both use a nested dissection ordering of the cells.

use std::collections::BTreeSet;
use std::time::Instant;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::perm::PermRef;
use faer::sparse::linalg::cholesky::{factorize_symbolic_cholesky, IntranodeLbltRef, LltRef, SymbolicCholesky, SymmetricOrdering};
use faer::sparse::{SparseColMat, SymbolicSparseColMat, Triplet};
use faer::{Conj, Mat, Par, Side};
use mdg_core::assembly::{cell_adjacency, SaddlePointSystem};
use mdg_core::dense;
use mdg_core::Mesh;
use mdg_core::solver::{relative_residual, ApplyPreconditioner, DiscreteSolution, SolveReport, SolverMethod};
use mdg_core::{Error, Result};

/// Iterative refinement steps taken when the first solve misses the tolerance.
const MAX_REFINEMENT_STEPS: usize = 3;

fn failure(message: String, residual_history: Vec<f64>) -> Error {
    Error::SolverFailure { message, residual_history }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Stress dof with the largest identity-mode coefficient, and `z.c`.
fn pinned_dof(system: &SaddlePointSystem) -> Result<(usize, f64)> {
    let z = &system.identity_mode;
    let z_dot_c = dot(z, &system.c);
    let pinned = (0..system.num_stress())
        .max_by(|&i, &j| z[i].abs().total_cmp(&z[j].abs()))
        .filter(|&i| z[i] != 0.0 && z_dot_c != 0.0)
        .ok_or_else(|| failure("identity stress mode is not representable".into(), Vec::new()))?;
    Ok((pinned, z_dot_c))
}

enum Factor<'a> {
    Kkt(KktFactor<'a>),
    Schur(SchurFactor<'a>),
}

impl Factor<'_> {
    fn solve(&self, r: &[f64]) -> Vec<f64> {
        match self {
            Factor::Kkt(f) => f.solve(r),
            Factor::Schur(f) => f.solve(r),
        }
    }
}

/// Solve with a factorization, then refine until the relative residual meets
/// the tolerance or the step budget runs out.
fn solve_refined(system: &SaddlePointSystem, factor: &Factor, tolerance: f64) -> Result<(Vec<f64>, f64)> {
    let rhs = system.rhs();
    let mut x = factor.solve(&rhs);
    let mut history = vec![relative_residual(system, &x, &rhs)];
    let mut mx = vec![0.0; x.len()];
    while history.last().is_some_and(|&r| r > tolerance) && history.len() <= MAX_REFINEMENT_STEPS {
        system.apply(&x, &mut mx);
        let r: Vec<f64> = rhs.iter().zip(&mx).map(|(b, m)| b - m).collect();
        for (xi, di) in x.iter_mut().zip(factor.solve(&r)) {
            *xi += di;
        }
        history.push(relative_residual(system, &x, &rhs));
    }
    let residual = history.last().copied().unwrap_or(f64::NAN);
    if residual <= tolerance {
        Ok((x, residual))
    } else {
        Err(failure(format!("direct solve residual {residual:e} exceeds tolerance {tolerance:e}"), history))
    }
}

/// Direct solve through the symmetric indefinite factorization of the
/// pinned `K`, falling back to the Cholesky factorization of the stress
/// Schur complement if it breaks down or misses the tolerance.
pub fn solve_direct(
    system: &SaddlePointSystem,
    mesh: &Mesh,
    tolerance: f64,
) -> Result<(DiscreteSolution, SolveReport)> {
    if !(tolerance > 0.0) {
        return Err(Error::InvalidParameter(format!("solver tolerance must be positive, got {tolerance}")));
    }
    let start = Instant::now();
    let primary = KktFactor::new(system, mesh).and_then(|f| solve_refined(system, &Factor::Kkt(f), tolerance));
    let (x, relative_residual) = match primary {
        Ok(found) => found,
        Err(_) => solve_refined(system, &Factor::Schur(SchurFactor::new(system, mesh)?), tolerance)?,
    };
    let solution = DiscreteSolution::from_vector(system, &x)?;
    let report = SolveReport {
        method: SolverMethod::Direct,
        relative_residual,
        iterations: 0,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    };
    Ok((solution, report))
}

/// Lower triangle of a symmetric matrix with dense `bs x bs` cell blocks,
/// stored column-major with sorted row indices.
struct BlockLower {
    bs: usize,
    /// Row cells `I >= J` of each column cell `J`, sorted.
    row_cells: Vec<Vec<usize>>,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl BlockLower {
    fn new(bs: usize, row_cells: Vec<Vec<usize>>) -> Self {
        let n = bs * row_cells.len();
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        col_ptr.push(0);
        for (j_cell, rows) in row_cells.iter().enumerate() {
            debug_assert_eq!(rows.first(), Some(&j_cell));
            for a in 0..bs {
                row_idx.extend(j_cell * bs + a..(j_cell + 1) * bs);
                for &i_cell in &rows[1..] {
                    row_idx.extend(i_cell * bs..(i_cell + 1) * bs);
                }
                col_ptr.push(row_idx.len());
            }
        }
        let values = vec![0.0; row_idx.len()];
        BlockLower { bs, row_cells, col_ptr, row_idx, values }
    }

    /// Position of block `(i_cell, j_cell)` in the row list of `j_cell`.
    fn block_slot(&self, i_cell: usize, j_cell: usize) -> usize {
        self.row_cells[j_cell].binary_search(&i_cell).expect("block outside the sparsity pattern")
    }

    /// Add to entry `(r, c)` with `r >= c`, given the block slot.
    fn add(&mut self, slot: usize, r: usize, c: usize, v: f64) {
        let bs = self.bs;
        let (i_local, a) = (r % bs, c % bs);
        let offset = if slot == 0 { i_local - a } else { (bs - a) + (slot - 1) * bs + i_local };
        self.values[self.col_ptr[c] + offset] += v;
    }

    /// Replace row and column `p` by those of the identity.
    fn pin(&mut self, p: usize) {
        for c in 0..=p {
            for q in self.col_ptr[c]..self.col_ptr[c + 1] {
                let r = self.row_idx[q];
                if r == p || c == p {
                    self.values[q] = if r == c { 1.0 } else { 0.0 };
                }
            }
        }
    }
}

/// Symmetric indefinite factorization of the pinned `K`, with the dofs of
/// each cell kept together in a nested dissection order and Bunch-Kaufman
/// pivoting inside supernodes.
pub struct KktFactor<'a> {
    system: &'a SaddlePointSystem,
    symbolic: SymbolicCholesky<usize>,
    values: Vec<f64>,
    subdiag: Vec<f64>,
    pivot_fwd: Vec<usize>,
    pivot_inv: Vec<usize>,
    pinned: usize,
    z_dot_c: f64,
}

impl<'a> KktFactor<'a> {
    pub fn new(system: &'a SaddlePointSystem, mesh: &Mesh) -> Result<Self> {
        let ns = system.num_stress();
        let n = ns + system.num_velocity();
        let (bs, ms) = (system.spaces.stress.dofs_per_cell(), system.spaces.velocity.dofs_per_cell());
        let (pinned, z_dot_c) = pinned_dof(system)?;
        let mut entries = Vec::with_capacity(system.a.nnz() / 2 + system.b.nnz() + system.s.nnz() / 2 + 1);
        let mut push = |r: usize, c: usize, v: f64| {
            if r >= c && r != pinned && c != pinned {
                entries.push(Triplet::new(r, c, v));
            }
        };
        for r in 0..ns {
            for (c, v) in system.a.row(r) {
                push(r, c, v);
            }
        }
        for r in 0..system.num_velocity() {
            for (c, v) in system.b.row(r) {
                push(ns + r, c, v);
            }
            for (c, v) in system.s.row(r) {
                push(ns + r, ns + c, -v);
            }
        }
        entries.push(Triplet::new(pinned, pinned, 1.0));
        let matrix = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &entries)
            .map_err(|e| failure(format!("building sparse matrix: {e:?}"), Vec::new()))?;
        drop(entries);

        let adjacency = cell_adjacency(mesh);
        let lower: Vec<Vec<usize>> = adjacency
            .iter()
            .enumerate()
            .map(|(j, adj)| {
                let mut rows: Vec<usize> = adj.iter().copied().filter(|&i| i >= j).collect();
                rows.sort_unstable();
                rows
            })
            .collect();
        let cell_order = nested_dissection(mesh, &lower);
        let fwd: Vec<usize> = cell_order
            .iter()
            .flat_map(|&c| (c * bs..(c + 1) * bs).chain(ns + c * ms..ns + (c + 1) * ms))
            .collect();
        let mut inv = vec![0; n];
        for (new, &old) in fwd.iter().enumerate() {
            inv[old] = new;
        }
        let symbolic = factorize_symbolic_cholesky(
            matrix.symbolic(),
            Side::Lower,
            SymmetricOrdering::Custom(PermRef::new_checked(&fwd, &inv, n)),
            Default::default(),
        )
        .map_err(|e| failure(format!("symbolic factorization: {e:?}"), Vec::new()))?;
        let mut values = vec![0.0; symbolic.len_val()];
        let mut subdiag = vec![0.0; n];
        let mut pivot_fwd = vec![0usize; n];
        let mut pivot_inv = vec![0usize; n];
        let mut buffer =
            MemBuffer::new(symbolic.factorize_numeric_intranode_lblt_scratch::<f64>(Par::Seq, Default::default()));
        symbolic.factorize_numeric_intranode_lblt(
            &mut values,
            &mut subdiag,
            &mut pivot_fwd,
            &mut pivot_inv,
            matrix.as_ref(),
            Side::Lower,
            Par::Seq,
            MemStack::new(&mut buffer),
            Default::default(),
        );
        if values.iter().any(|v| !v.is_finite()) {
            return Err(failure("symmetric indefinite factorization broke down".into(), Vec::new()));
        }
        Ok(KktFactor { system, symbolic, values, subdiag, pivot_fwd, pivot_inv, pinned, z_dot_c })
    }

    /// Solve `M x = r` for a right-hand side `r = [r_sigma; r_u; r_lambda]`.
    pub fn solve(&self, r: &[f64]) -> Vec<f64> {
        let sys = self.system;
        let ns = sys.num_stress();
        let n = ns + sys.num_velocity();
        let z = &sys.identity_mode;
        let lambda = dot(z, &r[..ns]) / self.z_dot_c;
        let mut b = Mat::from_fn(n, 1, |i, _| if i < ns { r[i] - sys.c[i] * lambda } else { r[i] });
        b[(self.pinned, 0)] = 0.0;
        let n_rows = self.symbolic.nrows();
        let mut buffer = MemBuffer::new(self.symbolic.solve_in_place_scratch::<f64>(1, Par::Seq));
        IntranodeLbltRef::new(
            &self.symbolic,
            &self.values,
            &self.subdiag,
            PermRef::new_checked(&self.pivot_fwd, &self.pivot_inv, n_rows),
        )
        .solve_in_place_with_conj(Conj::No, b.as_mut(), Par::Seq, MemStack::new(&mut buffer));
        let mut x: Vec<f64> = (0..n).map(|i| b[(i, 0)]).collect();
        let shift = (dot(&sys.c, &x[..ns]) - r[n]) / self.z_dot_c;
        for (xi, zi) in x.iter_mut().zip(z) {
            *xi -= shift * zi;
        }
        x.push(lambda);
        x
    }
}

/// Cells at or below this count are not dissected further.
const DISSECTION_LEAF: usize = 8;

/// Elimination order of the cells by geometric nested dissection of the cell
/// graph given as lower adjacency lists.
fn nested_dissection(mesh: &Mesh, lower: &[Vec<usize>]) -> Vec<usize> {
    let nc = lower.len();
    let mut graph: Vec<Vec<usize>> = vec![Vec::new(); nc];
    for (j, rows) in lower.iter().enumerate() {
        for &i in rows.iter().filter(|&&i| i != j) {
            graph[i].push(j);
            graph[j].push(i);
        }
    }
    let centroids: Vec<[f64; 2]> = mesh
        .cells
        .iter()
        .map(|tri| {
            let p = tri.map(|v| mesh.vertices[v]);
            [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0]
        })
        .collect();
    enum Task {
        Split(Vec<usize>),
        Emit(Vec<usize>),
    }
    let mut order = Vec::with_capacity(nc);
    let mut stamp = vec![0usize; nc];
    let mut token = 0;
    // Each split pushes its separator first so it is emitted after both halves.
    let mut tasks = vec![Task::Split((0..nc).collect())];
    while let Some(task) = tasks.pop() {
        let cells = match task {
            Task::Emit(cells) => {
                order.extend(cells);
                continue;
            }
            Task::Split(cells) if cells.len() <= DISSECTION_LEAF => {
                order.extend(cells);
                continue;
            }
            Task::Split(cells) => cells,
        };
        let extent = |axis: usize| {
            let (lo, hi) = cells.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &c| {
                (lo.min(centroids[c][axis]), hi.max(centroids[c][axis]))
            });
            hi - lo
        };
        let axis = usize::from(extent(1) > extent(0));
        let mut sorted = cells;
        sorted.sort_by(|&a, &b| centroids[a][axis].total_cmp(&centroids[b][axis]).then(a.cmp(&b)));
        let right = sorted.split_off(sorted.len() / 2);
        token += 1;
        for &c in &right {
            stamp[c] = token;
        }
        let (separator, left): (Vec<usize>, Vec<usize>) =
            sorted.into_iter().partition(|&c| graph[c].iter().any(|&d| stamp[d] == token));
        tasks.push(Task::Emit(separator));
        tasks.push(Task::Split(right));
        tasks.push(Task::Split(left));
    }
    order
}

/// Cholesky factor of the pinned stress Schur complement.
pub struct SchurFactor<'a> {
    system: &'a SaddlePointSystem,
    symbolic: SymbolicCholesky<usize>,
    factor_values: Vec<f64>,
    /// Dense `S_K^{-1}` per cell.
    s_inv: Vec<Vec<f64>>,
    pinned: usize,
    z_dot_c: f64,
}

impl<'a> SchurFactor<'a> {
    pub fn new(system: &'a SaddlePointSystem, mesh: &Mesh) -> Result<Self> {
        let stress = &system.spaces.stress;
        let velocity = &system.spaces.velocity;
        let (bs, ms) = (stress.dofs_per_cell(), velocity.dofs_per_cell());
        let ns = system.num_stress();
        let nc = mesh.num_cells();
        let (pinned, z_dot_c) = pinned_dof(system)?;

        let adjacency = cell_adjacency(mesh);
        let mut row_sets: Vec<BTreeSet<usize>> = (0..nc).map(|j| BTreeSet::from([j])).collect();
        for adj in &adjacency {
            for &i in adj {
                for &j in adj {
                    if i > j {
                        row_sets[j].insert(i);
                    }
                }
            }
        }
        let mut lower = BlockLower::new(bs, row_sets.into_iter().map(|s| s.into_iter().collect()).collect());

        for r in 0..ns {
            for (c, v) in system.a.row(r) {
                if r >= c {
                    let slot = lower.block_slot(r / bs, c / bs);
                    lower.add(slot, r, c, v);
                }
            }
        }

        let mut s_inv = Vec::with_capacity(nc);
        for (cell, adj) in adjacency.iter().enumerate() {
            let off = velocity.dof(cell, 0, 0);
            let block = system.s.dense_block(off, off, ms, ms);
            let inv = dense::spd_inverse(&block, ms)
                .ok_or_else(|| failure(format!("velocity mass block of cell {cell} is not positive definite"), Vec::new()))?;
            // Columns of B touched by this cell, grouped by stress cell in
            // the order of `adj`.
            let width = adj.len() * bs;
            let mut cmat = vec![0.0; ms * width];
            for r in 0..ms {
                for (c, v) in system.b.row(off + r) {
                    let pos = adj.iter().position(|&j| j == c / bs).expect("coupling outside the adjacency");
                    cmat[r * width + pos * bs + c % bs] = v;
                }
            }
            let mut w = vec![0.0; ms * width];
            for r in 0..ms {
                for t in 0..ms {
                    let f = inv[r * ms + t];
                    if f != 0.0 {
                        for q in 0..width {
                            w[r * width + q] += f * cmat[t * width + q];
                        }
                    }
                }
            }
            for (pi, &i_cell) in adj.iter().enumerate() {
                for (pj, &j_cell) in adj.iter().enumerate() {
                    if i_cell < j_cell {
                        continue;
                    }
                    let slot = lower.block_slot(i_cell, j_cell);
                    for a in 0..bs {
                        let i_start = if i_cell == j_cell { a } else { 0 };
                        for i in i_start..bs {
                            let mut acc = 0.0;
                            for r in 0..ms {
                                acc += cmat[r * width + pi * bs + i] * w[r * width + pj * bs + a];
                            }
                            if acc != 0.0 {
                                lower.add(slot, i_cell * bs + i, j_cell * bs + a, acc);
                            }
                        }
                    }
                }
            }
            s_inv.push(inv);
        }
        lower.pin(pinned);

        let cell_order = nested_dissection(mesh, &lower.row_cells);
        let BlockLower { col_ptr, row_idx, values, .. } = lower;
        let matrix_symbolic = SymbolicSparseColMat::new_checked(ns, ns, col_ptr, None, row_idx);
        let matrix = SparseColMat::new(matrix_symbolic, values);

        let fwd: Vec<usize> = cell_order.iter().flat_map(|&c| c * bs..(c + 1) * bs).collect();
        let mut inv = vec![0; ns];
        for (new, &old) in fwd.iter().enumerate() {
            inv[old] = new;
        }
        let perm = PermRef::new_checked(&fwd, &inv, ns);
        let symbolic = factorize_symbolic_cholesky(
            matrix.symbolic(),
            Side::Lower,
            SymmetricOrdering::Custom(perm),
            Default::default(),
        )
        .map_err(|e| failure(format!("symbolic Cholesky analysis: {e:?}"), Vec::new()))?;
        let mut factor_values = vec![0.0; symbolic.len_val()];
        let mut buffer = MemBuffer::new(symbolic.factorize_numeric_llt_scratch::<f64>(Par::Seq, Default::default()));
        symbolic
            .factorize_numeric_llt(
                &mut factor_values,
                matrix.as_ref(),
                Side::Lower,
                Default::default(),
                Par::Seq,
                MemStack::new(&mut buffer),
                Default::default(),
            )
            .map_err(|e| failure(format!("sparse Cholesky factorization: {e:?}"), Vec::new()))?;
        Ok(SchurFactor { system, symbolic, factor_values, s_inv, pinned, z_dot_c })
    }

    /// `S^{-1} x` cell by cell.
    fn apply_s_inv(&self, x: &[f64]) -> Vec<f64> {
        let ms = self.system.spaces.velocity.dofs_per_cell();
        let mut y = vec![0.0; x.len()];
        for (cell, inv) in self.s_inv.iter().enumerate() {
            let off = cell * ms;
            for r in 0..ms {
                y[off + r] = (0..ms).map(|t| inv[r * ms + t] * x[off + t]).sum();
            }
        }
        y
    }

    /// Solve the pinned Schur complement system, with zero at the pinned dof.
    fn solve_pinned(&self, h: &[f64]) -> Vec<f64> {
        let ns = h.len();
        let mut rhs = Mat::from_fn(ns, 1, |i, _| if i == self.pinned { 0.0 } else { h[i] });
        let mut buffer = MemBuffer::new(self.symbolic.solve_in_place_scratch::<f64>(1, Par::Seq));
        LltRef::new(&self.symbolic, &self.factor_values).solve_in_place_with_conj(
            Conj::No,
            rhs.as_mut(),
            Par::Seq,
            MemStack::new(&mut buffer),
        );
        (0..ns).map(|i| rhs[(i, 0)]).collect()
    }

    /// Solve `M x = r` for a right-hand side `r = [r_sigma; r_u; r_lambda]`.
    pub fn solve(&self, r: &[f64]) -> Vec<f64> {
        let sys = self.system;
        let (ns, nu) = (sys.num_stress(), sys.num_velocity());
        let (r_sigma, rest) = r.split_at(ns);
        let (r_u, r_lambda) = rest.split_at(nu);
        let mut h = r_sigma.to_vec();
        sys.b.matvec_transpose_add(&self.apply_s_inv(r_u), &mut h);
        let z = &sys.identity_mode;
        let lambda = dot(z, &h) / self.z_dot_c;
        for (hi, ci) in h.iter_mut().zip(&sys.c) {
            *hi -= ci * lambda;
        }
        let mut sigma = self.solve_pinned(&h);
        let shift = (dot(&sys.c, &sigma) - r_lambda[0]) / self.z_dot_c;
        for (si, zi) in sigma.iter_mut().zip(z) {
            *si -= shift * zi;
        }
        let mut bs = sys.b.mul_vec(&sigma);
        for (v, ru) in bs.iter_mut().zip(r_u) {
            *v -= ru;
        }
        let u = self.apply_s_inv(&bs);
        let mut x = sigma;
        x.extend(u);
        x.push(lambda);
        x
    }
}

/// MINRES preconditioner `diag(P_sigma, S, s_lambda)` built on the exact
/// stress Schur complement `A + B^T S^{-1} B`. Its kernel is the identity
/// mode `z`, so `P_sigma^{-1}` is the pinned inverse plus `alpha z z^T`.
pub struct SchurPreconditioner<'a> {
    factor: SchurFactor<'a>,
    alpha: f64,
    multiplier_scale: f64,
}

impl<'a> SchurPreconditioner<'a> {
    pub fn new(system: &'a SaddlePointSystem, mesh: &Mesh) -> Result<Self> {
        let factor = SchurFactor::new(system, mesh)?;
        let s0 = dot(&system.c, &factor.solve_pinned(&system.c));
        let scale = if s0 > 0.0 && s0.is_finite() { s0 } else { 1.0 };
        // equal weight on the pinned part and the kernel in c^T P_sigma^{-1} c
        let alpha = scale / (factor.z_dot_c * factor.z_dot_c);
        Ok(SchurPreconditioner { factor, alpha, multiplier_scale: 2.0 * scale })
    }
}

impl ApplyPreconditioner for SchurPreconditioner<'_> {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let sys = self.factor.system;
        let ns = sys.num_stress();
        let (r_sigma, rest) = r.split_at(ns);
        let (r_u, r_lambda) = rest.split_at(sys.num_velocity());
        let sigma = self.factor.solve_pinned(r_sigma);
        let along = self.alpha * dot(&sys.identity_mode, r_sigma);
        for ((zi, si), mi) in z[..ns].iter_mut().zip(&sigma).zip(&sys.identity_mode) {
            *zi = si + along * mi;
        }
        let u = self.factor.apply_s_inv(r_u);
        z[ns..ns + u.len()].copy_from_slice(&u);
        z[ns + u.len()] = r_lambda[0] / self.multiplier_scale;
    }
}
