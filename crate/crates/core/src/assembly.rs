//! Assembly of the discrete saddle point system.
//!
//! With `sigma` in the broken symmetric tensor space of degree `k + 1` and
//! `u` in the broken vector space of degree `k`, the scheme reads
//!
//! ```text
//! a(sigma, tau) + b(tau, u)          = <tau n, g>_boundary
//! b(sigma, v)   - (kappa^{-1} u, v)  = -(f, v)
//! ```
//!
//! with
//!
//! ```text
//! a(sigma, tau) = 1/2 (sigma^d, tau^d) + sum_e eta/h_e <[sigma], [tau]>_e
//! b(tau, v)     = (div_h tau, v) - sum_e <[tau], {v}>_e
//! ```
//!
//! where the sums run over interior edges, `[tau] = tau^+ n^+ + tau^- n^-` is
//! the full normal jump and `{v}` the average. The identity is in the kernel
//! of both `a` and `b`; it is removed by requiring `int tr(sigma) = 0`
//! through a Lagrange multiplier. Unknowns are ordered `[sigma; u; lambda]`:
//!
//! ```text
//! [ A   B^T  c ] [sigma ]   [ G ]
//! [ B   -S   0 ] [ u    ] = [-F ]
//! [ c^T  0   0 ] [lambda]   [ 0 ]
//! ```

use alloc::string::String;
use alloc::vec::Vec;

use crate::basis::BasisTable;
use crate::error::{Error, Result};
use crate::math;
use crate::mesh::Mesh;
use crate::problems::{BrinkmanProblem, KappaInvField};
use crate::quadrature::{interval_rule, triangle_rule, IntervalRule};
use crate::space::DgSpace;
use crate::sparse::{BlockCsrBuilder, CsrMatrix};
use crate::tensor::COMPONENT_UNITS;

const REFERENCE_VERTICES: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

/// `W[c][d] = E_c^d : E_d^d` for the stored tensor components.
const DEVIATORIC_GRAM: [[f64; 3]; 3] = [[0.5, 0.0, -0.5], [0.0, 2.0, 0.0], [-0.5, 0.0, 0.5]];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssemblyOptions {
    /// Jump penalty `eta > 0`.
    pub penalty: f64,
    /// Quadrature degree added on top of the polynomial degree when
    /// integrating data (`f`, `g`, non-constant `kappa^{-1}`).
    pub extra_quadrature: usize,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions { penalty: 1.0, extra_quadrature: 8 }
    }
}

/// Stress and velocity spaces for a given `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedSpaces {
    pub k: usize,
    pub stress: DgSpace,
    pub velocity: DgSpace,
}

impl MixedSpaces {
    pub fn new(mesh: &Mesh, k: usize) -> Result<Self> {
        Ok(MixedSpaces { k, stress: DgSpace::stress(mesh, k)?, velocity: DgSpace::velocity(mesh, k)? })
    }

    fn check(&self, mesh: &Mesh) -> Result<()> {
        if self.stress.num_cells() != mesh.num_cells() || self.velocity.num_cells() != mesh.num_cells() {
            return Err(Error::SpaceMismatch(alloc::format!(
                "spaces built for {} cells, mesh has {}",
                self.stress.num_cells(),
                mesh.num_cells()
            )));
        }
        Ok(())
    }
}

/// Basis tables on each local edge of the reference cell, for both traversal
/// directions, at the points of an interval rule.
struct FaceTables {
    /// `tables[local][reversed]`
    tables: [[BasisTable; 2]; 3],
}

impl FaceTables {
    fn new(space: &DgSpace, rule: &IntervalRule) -> Self {
        let build = |e: usize, reversed: bool| {
            let a = REFERENCE_VERTICES[e];
            let b = REFERENCE_VERTICES[(e + 1) % 3];
            let pts: Vec<[f64; 2]> = rule
                .points
                .iter()
                .map(|t| {
                    let s = if reversed { 1.0 - t[0] } else { t[0] };
                    [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]
                })
                .collect();
            space.basis().tabulate(&pts)
        };
        FaceTables {
            tables: [
                [build(0, false), build(0, true)],
                [build(1, false), build(1, true)],
                [build(2, false), build(2, true)],
            ],
        }
    }

    /// Table seen from a cell with the given orientation sign on the edge.
    fn get(&self, local: usize, sign: i8) -> &BasisTable {
        &self.tables[local][usize::from(sign < 0)]
    }
}

/// Cells coupled to each cell through a shared edge, including itself.
pub fn cell_adjacency(mesh: &Mesh) -> Vec<Vec<usize>> {
    (0..mesh.num_cells())
        .map(|c| {
            let mut adj = alloc::vec![c];
            for ce in &mesh.cell_to_edges[c] {
                let (a, b) = mesh.edges[ce.edge].cells;
                if let Some(b) = b {
                    adj.push(if a == c { b } else { a });
                }
            }
            adj
        })
        .collect()
}

/// `M[i][j] = sum_q w_q phi_i(q) psi_j(q)`
fn edge_mass(w: &[f64], phi: &BasisTable, psi: &BasisTable) -> Vec<f64> {
    let (n, m) = (phi.dim, psi.dim);
    let mut out = alloc::vec![0.0; n * m];
    for (q, &wq) in w.iter().enumerate() {
        for i in 0..n {
            let a = wq * phi.value(q, i);
            for j in 0..m {
                out[i * m + j] += a * psi.value(q, j);
            }
        }
    }
    out
}

/// Same as [`edge_mass`] with `phi = psi`, exactly symmetric.
fn edge_mass_sym(w: &[f64], phi: &BasisTable) -> Vec<f64> {
    let n = phi.dim;
    let mut out = alloc::vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let mut acc = 0.0;
            for (q, &wq) in w.iter().enumerate() {
                acc += wq * phi.value(q, i) * phi.value(q, j);
            }
            out[i * n + j] = acc;
            out[j * n + i] = acc;
        }
    }
    out
}

/// `(E_c n)` for the three stored tensor components.
fn component_tractions(n: [f64; 2]) -> [[f64; 2]; 3] {
    [COMPONENT_UNITS[0].normal_action(n), COMPONENT_UNITS[1].normal_action(n), COMPONENT_UNITS[2].normal_action(n)]
}

/// Stress block `A`.
pub fn assemble_stress_matrix(mesh: &Mesh, spaces: &MixedSpaces, penalty: f64) -> Result<CsrMatrix> {
    spaces.check(mesh)?;
    if !(penalty > 0.0) || !penalty.is_finite() {
        return Err(Error::InvalidParameter(alloc::format!("penalty must be positive, got {penalty}")));
    }
    let space = &spaces.stress;
    let dpc = space.dofs_per_cell();
    let ns = space.scalar_dim();
    let mut builder = BlockCsrBuilder::new(dpc, dpc, mesh.num_cells(), cell_adjacency(mesh));

    // Orthonormal basis: the deviatoric mass block is det/2 * W (x) I.
    for (cell, map) in mesh.affine_maps().iter().enumerate() {
        for c in 0..3 {
            for d in 0..3 {
                let w = DEVIATORIC_GRAM[c][d];
                if w == 0.0 {
                    continue;
                }
                for i in 0..ns {
                    builder.add(space.dof(cell, c, i), space.dof(cell, d, i), 0.5 * map.det * w);
                }
            }
        }
    }

    let rule = interval_rule(2 * space.degree())?;
    let faces = FaceTables::new(space, &rule);
    for edge in mesh.edges.iter().filter(|e| !e.is_boundary()) {
        let (p, m) = (edge.cells.0, edge.cells.1.unwrap_or_default());
        let (lp, lm) = (edge.local.0, edge.local.1.unwrap_or_default());
        let tp = faces.get(lp, 1);
        let tm = faces.get(lm, -1);
        // eta / h_e * |e| with h_e = |e|
        let scale = penalty;
        let tr = component_tractions(edge.normal);
        let mut dots = [[0.0; 3]; 3];
        for c in 0..3 {
            for d in 0..3 {
                dots[c][d] = tr[c][0] * tr[d][0] + tr[c][1] * tr[d][1];
            }
        }
        let mpp = edge_mass_sym(&rule.weights, tp);
        let mmm = edge_mass_sym(&rule.weights, tm);
        let mpm = edge_mass(&rule.weights, tp, tm);
        for c in 0..3 {
            for d in 0..3 {
                let nd = dots[c][d];
                if nd == 0.0 {
                    continue;
                }
                for i in 0..ns {
                    for j in 0..ns {
                        builder.add(space.dof(p, c, i), space.dof(p, d, j), scale * nd * mpp[i * ns + j]);
                        builder.add(space.dof(m, c, i), space.dof(m, d, j), scale * nd * mmm[i * ns + j]);
                        // the jump carries opposite signs from the two sides
                        let v = -(scale * nd * mpm[i * ns + j]);
                        builder.add(space.dof(p, c, i), space.dof(m, d, j), v);
                        builder.add(space.dof(m, d, j), space.dof(p, c, i), v);
                    }
                }
            }
        }
    }
    Ok(builder.finish())
}

/// Coupling block `B`, rows indexed by velocity dofs, columns by stress dofs.
pub fn assemble_coupling_matrix(mesh: &Mesh, spaces: &MixedSpaces) -> Result<CsrMatrix> {
    spaces.check(mesh)?;
    let (ss, vs) = (&spaces.stress, &spaces.velocity);
    let (ns, nv) = (ss.scalar_dim(), vs.scalar_dim());
    let mut builder = BlockCsrBuilder::new(vs.dofs_per_cell(), ss.dofs_per_cell(), mesh.num_cells(), cell_adjacency(mesh));

    // (div tau, v)_K
    let rule = triangle_rule(ss.degree() + vs.degree())?;
    let st = ss.basis().tabulate(&rule.points);
    let vt = vs.basis().tabulate(&rule.points);
    let mut grads = alloc::vec![[0.0; 2]; ns];
    for (cell, map) in mesh.affine_maps().iter().enumerate() {
        let mut local = alloc::vec![[[0.0; 2]; 3]; ns * nv];
        for (q, &w) in rule.weights.iter().enumerate() {
            for (i, g) in grads.iter_mut().enumerate() {
                *g = map.push_gradient(st.gradient(q, i));
            }
            let wd = w * map.det;
            for j in 0..nv {
                let psi = wd * vt.value(q, j);
                for (i, g) in grads.iter().enumerate() {
                    let e = &mut local[i * nv + j];
                    // div(phi E11) = (d1 phi, 0), div(phi E12) = (d2 phi, d1 phi),
                    // div(phi E22) = (0, d2 phi)
                    e[0][0] += g[0] * psi;
                    e[1][0] += g[1] * psi;
                    e[1][1] += g[0] * psi;
                    e[2][1] += g[1] * psi;
                }
            }
        }
        for i in 0..ns {
            for j in 0..nv {
                let e = &local[i * nv + j];
                for c in 0..3 {
                    for d in 0..2 {
                        if e[c][d] != 0.0 {
                            builder.add(vs.dof(cell, d, j), ss.dof(cell, c, i), e[c][d]);
                        }
                    }
                }
            }
        }
    }

    // -<[tau], {v}>_e
    let rule = interval_rule(ss.degree() + vs.degree())?;
    let sf = FaceTables::new(ss, &rule);
    let vf = FaceTables::new(vs, &rule);
    for edge in mesh.edges.iter().filter(|e| !e.is_boundary()) {
        let (p, m) = (edge.cells.0, edge.cells.1.unwrap_or_default());
        let (lp, lm) = (edge.local.0, edge.local.1.unwrap_or_default());
        let tr = component_tractions(edge.normal);
        let sides = [(p, lp, 1i8), (m, lm, -1i8)];
        for &(s_cell, s_local, s_sign) in &sides {
            let phi = sf.get(s_local, s_sign);
            for &(t_cell, t_local, t_sign) in &sides {
                let psi = vf.get(t_local, t_sign);
                let mass = edge_mass(&rule.weights, phi, psi);
                let factor = -0.5 * f64::from(s_sign) * edge.length;
                for c in 0..3 {
                    for d in 0..2 {
                        let nd = tr[c][d];
                        if nd == 0.0 {
                            continue;
                        }
                        for i in 0..ns {
                            for j in 0..nv {
                                builder.add(
                                    vs.dof(t_cell, d, j),
                                    ss.dof(s_cell, c, i),
                                    factor * nd * mass[i * nv + j],
                                );
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(builder.finish())
}

/// Velocity mass block `S` weighted by `kappa^{-1}`.
pub fn assemble_mass_matrix(
    mesh: &Mesh,
    spaces: &MixedSpaces,
    kappa_inv: &KappaInvField,
    extra_quadrature: usize,
) -> Result<CsrMatrix> {
    spaces.check(mesh)?;
    let vs = &spaces.velocity;
    let nv = vs.scalar_dim();
    let adjacency = (0..mesh.num_cells()).map(|c| alloc::vec![c]).collect();
    let mut builder = BlockCsrBuilder::new(vs.dofs_per_cell(), vs.dofs_per_cell(), mesh.num_cells(), adjacency);
    let maps = mesh.affine_maps();
    if let KappaInvField::Constant(v) = *kappa_inv {
        kappa_inv.try_value([0.0, 0.0])?;
        for (cell, map) in maps.iter().enumerate() {
            for d in 0..2 {
                for i in 0..nv {
                    let dof = vs.dof(cell, d, i);
                    builder.add(dof, dof, v * map.det);
                }
            }
        }
        return Ok(builder.finish());
    }
    let rule = triangle_rule(2 * vs.degree() + extra_quadrature)?;
    let table = vs.basis().tabulate(&rule.points);
    let mut local = alloc::vec![0.0; nv * nv];
    for (cell, map) in maps.iter().enumerate() {
        local.iter_mut().for_each(|v| *v = 0.0);
        for (q, (xi, w)) in rule.iter().enumerate() {
            let kv = kappa_inv.try_value(map.map(*xi))?;
            let wk = w * map.det * kv;
            for i in 0..nv {
                let a = wk * table.value(q, i);
                for j in i..nv {
                    local[i * nv + j] += a * table.value(q, j);
                }
            }
        }
        for d in 0..2 {
            for i in 0..nv {
                builder.add(vs.dof(cell, d, i), vs.dof(cell, d, i), local[i * nv + i]);
                for j in i + 1..nv {
                    let v = local[i * nv + j];
                    builder.add(vs.dof(cell, d, i), vs.dof(cell, d, j), v);
                    builder.add(vs.dof(cell, d, j), vs.dof(cell, d, i), v);
                }
            }
        }
    }
    Ok(builder.finish())
}

/// `c_i = int tr(phi_i)`, nonzero only on the constant modes of `t11`, `t22`.
pub fn assemble_trace_constraint(mesh: &Mesh, spaces: &MixedSpaces) -> Result<Vec<f64>> {
    spaces.check(mesh)?;
    let ss = &spaces.stress;
    let mut c = alloc::vec![0.0; ss.total_dofs()];
    // int over the reference cell of the constant basis function sqrt(2)
    let mean = 1.0 / math::sqrt(2.0);
    for (cell, map) in mesh.affine_maps().iter().enumerate() {
        c[ss.dof(cell, 0, 0)] = map.det * mean;
        c[ss.dof(cell, 2, 0)] = map.det * mean;
    }
    Ok(c)
}

/// Load vectors `(G, F)`: `G_i = <phi_i n, g>_boundary`, `F_j = (f, psi_j)`.
/// Also returns `int_boundary g . n` computed with the same rule.
pub fn assemble_rhs(
    mesh: &Mesh,
    spaces: &MixedSpaces,
    problem: &BrinkmanProblem,
    extra_quadrature: usize,
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    spaces.check(mesh)?;
    let (ss, vs) = (&spaces.stress, &spaces.velocity);
    let (ns, nv) = (ss.scalar_dim(), vs.scalar_dim());
    let mut g_vec = alloc::vec![0.0; ss.total_dofs()];
    let mut f_vec = alloc::vec![0.0; vs.total_dofs()];

    let rule = interval_rule(ss.degree() + extra_quadrature)?;
    let faces = FaceTables::new(ss, &rule);
    let mut flux = 0.0;
    for (e, edge) in mesh.edges.iter().enumerate().filter(|(_, e)| e.is_boundary()) {
        let geo = mesh.edge_geometry(e)?;
        let table = faces.get(edge.local.0, 1);
        let tr = component_tractions(edge.normal);
        for (q, (t, w)) in rule.iter().enumerate() {
            let g = (problem.boundary)(geo.point(t[0]));
            let wl = w * edge.length;
            flux += wl * (g[0] * edge.normal[0] + g[1] * edge.normal[1]);
            for (c, trc) in tr.iter().enumerate() {
                let gn = trc[0] * g[0] + trc[1] * g[1];
                for i in 0..ns {
                    g_vec[ss.dof(edge.cells.0, c, i)] += wl * gn * table.value(q, i);
                }
            }
        }
    }

    let rule = triangle_rule(vs.degree() + extra_quadrature)?;
    let table = vs.basis().tabulate(&rule.points);
    for (cell, map) in mesh.affine_maps().iter().enumerate() {
        for (q, (xi, w)) in rule.iter().enumerate() {
            let f = (problem.source)(map.map(*xi));
            let wd = w * map.det;
            for d in 0..2 {
                for j in 0..nv {
                    f_vec[vs.dof(cell, d, j)] += wd * f[d] * table.value(q, j);
                }
            }
        }
    }
    Ok((g_vec, f_vec, flux))
}

/// Assembled blocks and load vectors of the saddle point system.
#[derive(Debug, Clone)]
pub struct SaddlePointSystem {
    pub spaces: MixedSpaces,
    pub a: CsrMatrix,
    pub b: CsrMatrix,
    pub s: CsrMatrix,
    pub c: Vec<f64>,
    /// Coefficients of `sigma = I`, which spans the common kernel of `A` and `B`.
    pub identity_mode: Vec<f64>,
    pub g: Vec<f64>,
    pub f: Vec<f64>,
    /// `int_boundary g . n` as integrated by the load assembly.
    pub boundary_flux: f64,
    pub warnings: Vec<String>,
}

impl SaddlePointSystem {
    pub fn num_stress(&self) -> usize {
        self.a.nrows
    }

    pub fn num_velocity(&self) -> usize {
        self.s.nrows
    }

    /// Total unknowns including the multiplier.
    pub fn size(&self) -> usize {
        self.num_stress() + self.num_velocity() + 1
    }

    /// `[G; -F; 0]`
    pub fn rhs(&self) -> Vec<f64> {
        let mut r = Vec::with_capacity(self.size());
        r.extend_from_slice(&self.g);
        r.extend(self.f.iter().map(|v| -v));
        r.push(0.0);
        r
    }

    /// `y = M x` without forming `M`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let (ns, nu) = (self.num_stress(), self.num_velocity());
        assert_eq!(x.len(), self.size());
        assert_eq!(y.len(), self.size());
        let (xs, rest) = x.split_at(ns);
        let (xu, xl) = rest.split_at(nu);
        let lambda = xl[0];
        let (ys, rest) = y.split_at_mut(ns);
        let (yu, yl) = rest.split_at_mut(nu);
        self.a.matvec(xs, ys);
        self.b.matvec_transpose_add(xu, ys);
        for (yi, ci) in ys.iter_mut().zip(&self.c) {
            *yi += ci * lambda;
        }
        self.b.matvec(xs, yu);
        let su = self.s.mul_vec(xu);
        for (a, b) in yu.iter_mut().zip(&su) {
            *a -= b;
        }
        yl[0] = self.c.iter().zip(xs).map(|(a, b)| a * b).sum();
    }

    /// The global matrix in CSR form. Exactly symmetric.
    pub fn global_matrix(&self) -> CsrMatrix {
        let (ns, nu) = (self.num_stress(), self.num_velocity());
        let n = self.size();
        let bt = self.b.transpose();
        let lam = ns + nu;
        let nnz = self.a.nnz() + 2 * self.b.nnz() + self.s.nnz() + 2 * ns;
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for r in 0..ns {
            for (c, v) in self.a.row(r) {
                col_idx.push(c);
                values.push(v);
            }
            for (c, v) in bt.row(r) {
                col_idx.push(ns + c);
                values.push(v);
            }
            if self.c[r] != 0.0 {
                col_idx.push(lam);
                values.push(self.c[r]);
            }
            row_ptr.push(col_idx.len());
        }
        for r in 0..nu {
            for (c, v) in self.b.row(r) {
                col_idx.push(c);
                values.push(v);
            }
            for (c, v) in self.s.row(r) {
                col_idx.push(ns + c);
                values.push(-v);
            }
            row_ptr.push(col_idx.len());
        }
        for (c, &v) in self.c.iter().enumerate() {
            if v != 0.0 {
                col_idx.push(c);
                values.push(v);
            }
        }
        row_ptr.push(col_idx.len());
        CsrMatrix { nrows: n, ncols: n, row_ptr, col_idx, values }
    }

    /// Split a global vector into `(sigma, u, lambda)`.
    pub fn split<'a>(&self, x: &'a [f64]) -> (&'a [f64], &'a [f64], f64) {
        let ns = self.num_stress();
        let nu = self.num_velocity();
        (&x[..ns], &x[ns..ns + nu], x[ns + nu])
    }
}

/// Assemble everything for a problem already scaled to unit viscosity.
pub fn assemble_system(
    mesh: &Mesh,
    k: usize,
    problem: &BrinkmanProblem,
    options: &AssemblyOptions,
) -> Result<SaddlePointSystem> {
    if problem.nu != 1.0 {
        return Err(Error::InvalidProblem(alloc::format!(
            "assembly expects a unit-viscosity problem, got nu = {}; call nu_scale first",
            problem.nu
        )));
    }
    let spaces = MixedSpaces::new(mesh, k)?;
    let a = assemble_stress_matrix(mesh, &spaces, options.penalty)?;
    let b = assemble_coupling_matrix(mesh, &spaces)?;
    let s = assemble_mass_matrix(mesh, &spaces, &problem.kappa_inv, options.extra_quadrature)?;
    let c = assemble_trace_constraint(mesh, &spaces)?;
    let identity_mode = spaces
        .stress
        .project(mesh, 0, |_, out| {
            out[0] = 1.0;
            out[1] = 0.0;
            out[2] = 1.0;
        })?
        .values;
    let (g, f, boundary_flux) = assemble_rhs(mesh, &spaces, problem, options.extra_quadrature)?;
    let mut warnings = Vec::new();
    let total_length: f64 = mesh.edges.iter().filter(|e| e.is_boundary()).map(|e| e.length).sum();
    if boundary_flux.abs() > 1e-8 * (1.0 + total_length) {
        warnings.push(alloc::format!(
            "boundary data is not compatible with incompressibility: int g.n = {boundary_flux:e}"
        ));
    }
    Ok(SaddlePointSystem { spaces, a, b, s, c, identity_mode, g, f, boundary_flux, warnings })
}
