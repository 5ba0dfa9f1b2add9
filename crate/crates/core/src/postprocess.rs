//! Pressure recovery, error norms, local conservation and convergence rates.

use alloc::vec::Vec;

use crate::assembly::MixedSpaces;
use crate::error::{Error, Result};
use crate::math;
use crate::mesh::Mesh;
use crate::problems::{BrinkmanProblem, KappaInvField};
use crate::quadrature::{interval_rule, triangle_rule};
use crate::solver::DiscreteSolution;
use crate::space::{ComponentKind, DgSpace, FieldCoefficients};
use crate::tensor::SymTensorValue;

/// `p_h = -tr(sigma_h) / 2`, a scalar field of the stress degree.
pub fn pressure_from_stress(sigma: &FieldCoefficients) -> Result<FieldCoefficients> {
    let space = &sigma.space;
    if space.kind() != ComponentKind::SymTensor {
        return Err(Error::SpaceMismatch(alloc::format!("expected a tensor field, got {:?}", space.kind())));
    }
    let scalar = DgSpace::new(ComponentKind::Scalar, space.degree(), space.num_cells())?;
    let dim = space.scalar_dim();
    let mut values = alloc::vec![0.0; scalar.total_dofs()];
    for cell in 0..space.num_cells() {
        for i in 0..dim {
            let t11 = sigma.values[space.dof(cell, 0, i)];
            let t22 = sigma.values[space.dof(cell, 2, i)];
            values[scalar.dof(cell, 0, i)] = -0.5 * (t11 + t22);
        }
    }
    FieldCoefficients::new(&scalar, values)
}

/// Pointwise `p = -tr(sigma) / 2`.
pub fn pressure_of(t: SymTensorValue) -> f64 {
    -0.5 * t.trace()
}

/// `kappa~ = min(inf kappa, 1)`, with the infimum taken over the samples of
/// an elevated quadrature rule on every cell.
pub fn kappa_tilde(mesh: &Mesh, kappa_inv: &KappaInvField, quad_degree: usize) -> Result<f64> {
    if let KappaInvField::Constant(v) = *kappa_inv {
        return Ok((1.0 / kappa_inv.try_value([0.0, 0.0]).map(|_| v)?).min(1.0));
    }
    let rule = triangle_rule(quad_degree)?;
    let mut max_inv: f64 = 0.0;
    for map in mesh.affine_maps() {
        for xi in &rule.points {
            max_inv = max_inv.max(kappa_inv.try_value(map.map(*xi))?);
        }
    }
    Ok((1.0 / max_inv).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorBundle {
    pub u_l2: f64,
    /// `(|(e)^d|^2 + kappa~ |div_h e|^2 + |sigma_h|_*^2)^(1/2)` with
    /// `e = sigma - sigma_h`.
    pub sigma_broken: f64,
    pub sigma_l2: f64,
    pub p_l2: f64,
    /// `(sum_e h_e^{-1} |[sigma_h]|_e^2)^(1/2)` over interior edges.
    pub jump_seminorm: f64,
    pub sigma_dev_l2: f64,
    pub sigma_div_l2: f64,
    /// `|tr(sigma - sigma_h)| / 2`, which equals `p_l2` by construction.
    pub p_l2_via_trace: f64,
    pub kappa_tilde: f64,
}

/// Default elevated quadrature degree for error norms.
pub fn error_quadrature_degree(k: usize) -> usize {
    2 * (k + 2) + 4
}

/// `sum_e h_e^{-1} |[sigma_h]|^2_e` over interior edges, with the full jump.
pub fn jump_seminorm_squared(mesh: &Mesh, sigma: &FieldCoefficients) -> Result<f64> {
    let space = &sigma.space;
    let rule = interval_rule(2 * space.degree())?;
    let maps = mesh.affine_maps();
    let mut total = 0.0;
    for (e, edge) in mesh.edges.iter().enumerate() {
        let Some(m) = edge.cells.1 else { continue };
        let p = edge.cells.0;
        let geo = mesh.edge_geometry(e)?;
        let pts: Vec<[f64; 2]> = rule.points.iter().map(|t| geo.point(t[0])).collect();
        let tp = space.basis().tabulate(&pts.iter().map(|x| maps[p].pullback(*x)).collect::<Vec<_>>());
        let tm = space.basis().tabulate(&pts.iter().map(|x| maps[m].pullback(*x)).collect::<Vec<_>>());
        let sp = sigma.tensor_samples(p, &maps[p], &tp);
        let sm = sigma.tensor_samples(m, &maps[m], &tm);
        let mut acc = 0.0;
        for (q, &w) in rule.weights.iter().enumerate() {
            let j = (sp[q].value - sm[q].value).normal_action(edge.normal);
            acc += w * (j[0] * j[0] + j[1] * j[1]);
        }
        // |e| * acc / h_e with h_e = |e|
        total += acc;
    }
    Ok(total)
}

/// Error norms of a solution in physical variables against the exact fields
/// of `problem` (also in physical variables).
pub fn compute_errors(
    mesh: &Mesh,
    solution: &DiscreteSolution,
    problem: &BrinkmanProblem,
    quad_degree: usize,
) -> Result<ErrorBundle> {
    let exact = problem
        .exact
        .as_deref()
        .ok_or_else(|| Error::InvalidProblem(alloc::format!("problem {} has no exact solution", problem.name)))?;
    let kt = kappa_tilde(mesh, &problem.kappa_inv, quad_degree)?;
    let rule = triangle_rule(quad_degree)?;
    let st = solution.sigma.space.basis().tabulate(&rule.points);
    let vt = solution.velocity.space.basis().tabulate(&rule.points);
    let (mut eu, mut es, mut ed, mut ediv, mut etr) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (cell, map) in mesh.affine_maps().iter().enumerate() {
        let us = solution.velocity.vector_samples(cell, map, &vt);
        let ss = solution.sigma.tensor_samples(cell, map, &st);
        for (q, (xi, w)) in rule.iter().enumerate() {
            let x = map.map(*xi);
            let wd = w * map.det;
            let u = exact.velocity(x);
            let du = [u[0] - us[q].value[0], u[1] - us[q].value[1]];
            eu += wd * (du[0] * du[0] + du[1] * du[1]);
            let sigma = crate::problems::stress_of(exact, problem.nu, x);
            let e = sigma - ss[q].value;
            es += wd * e.contract(&e);
            let d = e.deviatoric();
            ed += wd * d.contract(&d);
            etr += wd * e.trace() * e.trace();
            let div = crate::problems::stress_divergence_of(exact, problem.nu, x);
            let dd = [div[0] - ss[q].divergence[0], div[1] - ss[q].divergence[1]];
            ediv += wd * (dd[0] * dd[0] + dd[1] * dd[1]);
        }
    }
    // p - p_h evaluated directly, independent of the trace path above
    let ph = pressure_from_stress(&solution.sigma)?;
    let mut ep = 0.0;
    for (cell, map) in mesh.affine_maps().iter().enumerate() {
        let ps = ph.scalar_samples(cell, map, &st);
        for (q, (xi, w)) in rule.iter().enumerate() {
            let d = exact.pressure(map.map(*xi)) - ps[q].value;
            ep += w * map.det * d * d;
        }
    }
    let jump2 = jump_seminorm_squared(mesh, &solution.sigma)?;
    Ok(ErrorBundle {
        u_l2: math::sqrt(eu),
        sigma_broken: math::sqrt(ed + kt * ediv + jump2),
        sigma_l2: math::sqrt(es),
        p_l2: math::sqrt(ep),
        jump_seminorm: math::sqrt(jump2),
        sigma_dev_l2: math::sqrt(ed),
        sigma_div_l2: math::sqrt(ediv),
        p_l2_via_trace: 0.5 * math::sqrt(etr),
        kappa_tilde: kt,
    })
}

/// `(|sigma_h|^2, |sigma_h^d|^2, |tr sigma_h|^2)` by quadrature.
pub fn stress_norm_parts(mesh: &Mesh, sigma: &FieldCoefficients, quad_degree: usize) -> Result<(f64, f64, f64)> {
    let rule = triangle_rule(quad_degree.max(2 * sigma.space.degree()))?;
    let table = sigma.space.basis().tabulate(&rule.points);
    let (mut full, mut dev, mut tr) = (0.0, 0.0, 0.0);
    for (cell, map) in mesh.affine_maps().iter().enumerate() {
        let s = sigma.tensor_samples(cell, map, &table);
        for (q, &w) in rule.weights.iter().enumerate() {
            let t = s[q].value;
            let wd = w * map.det;
            full += wd * t.contract(&t);
            let d = t.deviatoric();
            dev += wd * d.contract(&d);
            tr += wd * t.trace() * t.trace();
        }
    }
    Ok((full, dev, tr))
}

/// Per-cell balance `int_K nu kappa^{-1} u_h - oint sigma^ n_K - int_K f`
/// with `sigma^ = {sigma_h}` on interior edges and `sigma_h` on the
/// boundary. `solution` and `problem` must use the same viscosity scaling.
/// Data integrals use the rules of the assembly so the discrete identity is
/// reproduced to round-off.
pub fn local_conservation_residual(
    mesh: &Mesh,
    solution: &DiscreteSolution,
    problem: &BrinkmanProblem,
    extra_quadrature: usize,
) -> Result<Vec<[f64; 2]>> {
    let vs = &solution.velocity.space;
    let ss = &solution.sigma.space;
    let maps = mesh.affine_maps();
    let mut res = alloc::vec![[0.0; 2]; mesh.num_cells()];

    let rule = triangle_rule(2 * vs.degree() + extra_quadrature)?;
    let vt = vs.basis().tabulate(&rule.points);
    let frule = triangle_rule(vs.degree() + extra_quadrature)?;
    for (cell, map) in maps.iter().enumerate() {
        let r = &mut res[cell];
        let us = solution.velocity.vector_samples(cell, map, &vt);
        for (q, (xi, w)) in rule.iter().enumerate() {
            let k = problem.nu * problem.kappa_inv.try_value(map.map(*xi))?;
            r[0] += w * map.det * k * us[q].value[0];
            r[1] += w * map.det * k * us[q].value[1];
        }
        for (xi, w) in frule.iter() {
            let f = (problem.source)(map.map(*xi));
            r[0] -= w * map.det * f[0];
            r[1] -= w * map.det * f[1];
        }
    }

    let erule = interval_rule(ss.degree())?;
    for (e, edge) in mesh.edges.iter().enumerate() {
        let geo = mesh.edge_geometry(e)?;
        let pts: Vec<[f64; 2]> = erule.points.iter().map(|t| geo.point(t[0])).collect();
        let p = edge.cells.0;
        let tp = ss.basis().tabulate(&pts.iter().map(|x| maps[p].pullback(*x)).collect::<Vec<_>>());
        let sp = solution.sigma.tensor_samples(p, &maps[p], &tp);
        let sm = match edge.cells.1 {
            Some(m) => {
                let tm = ss.basis().tabulate(&pts.iter().map(|x| maps[m].pullback(*x)).collect::<Vec<_>>());
                Some(solution.sigma.tensor_samples(m, &maps[m], &tm))
            }
            None => None,
        };
        let mut flux = [0.0; 2];
        for (q, &w) in erule.weights.iter().enumerate() {
            let hat = match &sm {
                Some(sm) => 0.5 * (sp[q].value + sm[q].value),
                None => sp[q].value,
            };
            let t = hat.normal_action(edge.normal);
            flux[0] += w * edge.length * t[0];
            flux[1] += w * edge.length * t[1];
        }
        res[p][0] -= flux[0];
        res[p][1] -= flux[1];
        if let Some(m) = edge.cells.1 {
            // the second cell sees the opposite normal
            res[m][0] += flux[0];
            res[m][1] += flux[1];
        }
    }
    Ok(res)
}

/// Mean of `|u_h|` over the quadrature points selected by `select`, weighted
/// by the rule, or `None` if no point is selected.
pub fn mean_speed<F>(mesh: &Mesh, velocity: &FieldCoefficients, quad_degree: usize, select: F) -> Result<Option<f64>>
where
    F: Fn([f64; 2]) -> bool,
{
    let rule = triangle_rule(quad_degree)?;
    let table = velocity.space.basis().tabulate(&rule.points);
    let (mut integral, mut measure) = (0.0, 0.0);
    for (cell, map) in mesh.affine_maps().iter().enumerate() {
        let us = velocity.vector_samples(cell, map, &table);
        for (q, (xi, w)) in rule.iter().enumerate() {
            if select(map.map(*xi)) {
                let u = us[q].value;
                integral += w * map.det * math::sqrt(u[0] * u[0] + u[1] * u[1]);
                measure += w * map.det;
            }
        }
    }
    Ok((measure > 0.0).then(|| integral / measure))
}

/// `|f|_0` by quadrature.
pub fn source_l2_norm(mesh: &Mesh, problem: &BrinkmanProblem, quad_degree: usize) -> Result<f64> {
    let rule = triangle_rule(quad_degree)?;
    let mut acc = 0.0;
    for map in mesh.affine_maps() {
        for (xi, w) in rule.iter() {
            let f = (problem.source)(map.map(*xi));
            acc += w * map.det * (f[0] * f[0] + f[1] * f[1]);
        }
    }
    Ok(math::sqrt(acc))
}

/// Interpolate the exact solution of `problem` into the discrete spaces by
/// `L^2` projection (useful for consistency checks).
pub fn project_exact(mesh: &Mesh, spaces: &MixedSpaces, problem: &BrinkmanProblem, quad_degree: usize) -> Result<DiscreteSolution> {
    let exact = problem
        .exact
        .as_deref()
        .ok_or_else(|| Error::InvalidProblem(alloc::format!("problem {} has no exact solution", problem.name)))?;
    let nu = problem.nu;
    let sigma = spaces.stress.project(mesh, quad_degree, |x, out| {
        out.copy_from_slice(&crate::problems::stress_of(exact, nu, x).as_array())
    })?;
    let velocity = spaces.velocity.project(mesh, quad_degree, |x, out| out.copy_from_slice(&exact.velocity(x)))?;
    Ok(DiscreteSolution { sigma, velocity, multiplier: 0.0 })
}

/// `log2(coarse / fine)`; zero when the errors are equal.
pub fn rate(coarse: f64, fine: f64) -> f64 {
    if coarse == fine {
        0.0
    } else {
        math::log2(coarse / fine)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    /// Squares per side, `1/h`.
    pub n: usize,
    pub errors: ErrorBundle,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Rates {
    pub u_l2: f64,
    pub sigma_broken: f64,
    pub sigma_l2: f64,
    pub p_l2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// `rates[i]` compares rows `i` and `i + 1`.
    pub rates: Vec<Rates>,
}

impl ConvergenceTable {
    pub fn new(rows: Vec<ConvergenceRow>) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::TooFewRows);
        }
        let mut rates = Vec::with_capacity(rows.len() - 1);
        for pair in rows.windows(2) {
            let (c, f) = (&pair[0], &pair[1]);
            if f.n != 2 * c.n {
                return Err(Error::NonHalvingSequence { coarse: c.n, fine: f.n });
            }
            rates.push(Rates {
                u_l2: rate(c.errors.u_l2, f.errors.u_l2),
                sigma_broken: rate(c.errors.sigma_broken, f.errors.sigma_broken),
                sigma_l2: rate(c.errors.sigma_l2, f.errors.sigma_l2),
                p_l2: rate(c.errors.p_l2, f.errors.p_l2),
            });
        }
        Ok(ConvergenceTable { rows, rates })
    }

    /// Rates between the two finest meshes.
    pub fn final_rates(&self) -> Rates {
        *self.rates.last().expect("at least one rate")
    }
}
