//! Entry-by-entry comparison of the assembled blocks against a brute-force
//! evaluation of the bilinear forms on a two-cell mesh.
//!
//! The oracle finds interior edges and normals from the vertex lists, maps
//! points to reference coordinates itself, and integrates with collapsed
//! Gauss-Legendre rules. Only the scalar basis is shared with the library.

use std::sync::Arc;

use mdg_core::assembly::{assemble_system, AssemblyOptions};
use mdg_core::basis::ScalarBasis;
use mdg_core::problems::{BrinkmanProblem, KappaInvField};
use mdg_core::{Diagonal, Mesh};

const GAUSS_X: [f64; 4] = [
    0.069_431_844_202_973_71,
    0.330_009_478_207_571_9,
    0.669_990_521_792_428_1,
    0.930_568_155_797_026_3,
];
const GAUSS_W: [f64; 4] = [
    0.173_927_422_568_726_93,
    0.326_072_577_431_273_07,
    0.326_072_577_431_273_07,
    0.173_927_422_568_726_93,
];

type Tensor = [[f64; 2]; 2];

const UNITS: [Tensor; 3] = [[[1.0, 0.0], [0.0, 0.0]], [[0.0, 1.0], [1.0, 0.0]], [[0.0, 0.0], [0.0, 1.0]]];

struct Cell {
    v: [[f64; 2]; 3],
}

impl Cell {
    fn area(&self) -> f64 {
        let [a, b, c] = self.v;
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
    }

    /// Reference coordinates by Cramer's rule.
    fn reference(&self, x: [f64; 2]) -> [f64; 2] {
        let [a, b, c] = self.v;
        let (m00, m01, m10, m11) = (b[0] - a[0], c[0] - a[0], b[1] - a[1], c[1] - a[1]);
        let det = m00 * m11 - m01 * m10;
        let (dx, dy) = (x[0] - a[0], x[1] - a[1]);
        [(dx * m11 - m01 * dy) / det, (m00 * dy - m10 * dx) / det]
    }

    fn contains(&self, x: [f64; 2]) -> bool {
        let r = self.reference(x);
        r[0] >= -1e-12 && r[1] >= -1e-12 && r[0] + r[1] <= 1.0 + 1e-12
    }

    /// Value and physical gradient of basis function `i`. Reference
    /// gradients are pushed forward with the inverse transpose Jacobian.
    fn basis(&self, basis: &ScalarBasis, i: usize, x: [f64; 2]) -> (f64, [f64; 2]) {
        let n = basis.dim();
        let (mut vals, mut grads) = (vec![0.0; n], vec![[0.0; 2]; n]);
        basis.eval(self.reference(x), &mut vals, &mut grads);
        let [a, b, c] = self.v;
        let (m00, m01, m10, m11) = (b[0] - a[0], c[0] - a[0], b[1] - a[1], c[1] - a[1]);
        let det = m00 * m11 - m01 * m10;
        let g = grads[i];
        // grad_x = B^{-T} grad_xi with B^{-1} = [[m11, -m01], [-m10, m00]] / det
        (vals[i], [(m11 * g[0] - m10 * g[1]) / det, (-m01 * g[0] + m00 * g[1]) / det])
    }

    /// Quadrature points and weights of the collapsed rule on this cell.
    fn rule(&self) -> Vec<([f64; 2], f64)> {
        let [a, b, c] = self.v;
        let mut out = Vec::new();
        for (i, &s) in GAUSS_X.iter().enumerate() {
            for (j, &t) in GAUSS_X.iter().enumerate() {
                let (r0, r1) = (s, t * (1.0 - s));
                let w = GAUSS_W[i] * GAUSS_W[j] * (1.0 - s) * 2.0 * self.area();
                let x = [
                    a[0] + r0 * (b[0] - a[0]) + r1 * (c[0] - a[0]),
                    a[1] + r0 * (b[1] - a[1]) + r1 * (c[1] - a[1]),
                ];
                out.push((x, w));
            }
        }
        out
    }
}

#[derive(Clone, Copy)]
enum Dof {
    Stress { cell: usize, comp: usize, i: usize },
    Velocity { cell: usize, comp: usize, i: usize },
}

struct Oracle {
    cells: Vec<Cell>,
    stress: ScalarBasis,
    velocity: ScalarBasis,
    /// `(a, b, cell on the left, cell on the right or None, unit normal out of the left cell)`
    edges: Vec<([f64; 2], [f64; 2], usize, Option<usize>, [f64; 2])>,
}

impl Oracle {
    fn new(mesh: &Mesh, k: usize) -> Self {
        let cells: Vec<Cell> = (0..mesh.num_cells()).map(|c| Cell { v: mesh.cell_vertices(c) }).collect();
        let mut edges = Vec::new();
        for (ci, cell) in cells.iter().enumerate() {
            for l in 0..3 {
                let (a, b) = (cell.v[l], cell.v[(l + 1) % 3]);
                let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
                let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
                // counterclockwise cells: the outward normal is the tangent turned clockwise
                let n = [(b[1] - a[1]) / len, -(b[0] - a[0]) / len];
                let probe = [mid[0] + 1e-6 * n[0], mid[1] + 1e-6 * n[1]];
                let other = cells.iter().position(|c| c.contains(probe));
                match other {
                    Some(o) if o < ci => continue,
                    _ => edges.push((a, b, ci, other, n)),
                }
            }
        }
        Oracle { cells, stress: ScalarBasis::new(k + 1).unwrap(), velocity: ScalarBasis::new(k).unwrap(), edges }
    }

    /// Value and divergence of a stress basis function on `cell`.
    fn stress_eval(&self, dof: Dof, cell: usize, x: [f64; 2]) -> (Tensor, [f64; 2]) {
        let Dof::Stress { cell: c, comp, i } = dof else { unreachable!() };
        if c != cell {
            return ([[0.0; 2]; 2], [0.0; 2]);
        }
        let (v, g) = self.cells[cell].basis(&self.stress, i, x);
        let e = UNITS[comp];
        let t = [[v * e[0][0], v * e[0][1]], [v * e[1][0], v * e[1][1]]];
        let div = [e[0][0] * g[0] + e[0][1] * g[1], e[1][0] * g[0] + e[1][1] * g[1]];
        (t, div)
    }

    fn velocity_eval(&self, dof: Dof, cell: usize, x: [f64; 2]) -> [f64; 2] {
        let Dof::Velocity { cell: c, comp, i } = dof else { unreachable!() };
        if c != cell {
            return [0.0; 2];
        }
        let (v, _) = self.cells[cell].basis(&self.velocity, i, x);
        let mut out = [0.0; 2];
        out[comp] = v;
        out
    }

    fn edge_points(a: [f64; 2], b: [f64; 2]) -> Vec<([f64; 2], f64)> {
        let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        GAUSS_X
            .iter()
            .zip(GAUSS_W)
            .map(|(&t, w)| ([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])], w * len))
            .collect()
    }

    fn jump(&self, dof: Dof, left: usize, right: usize, n: [f64; 2], x: [f64; 2]) -> [f64; 2] {
        let (tl, _) = self.stress_eval(dof, left, x);
        let (tr, _) = self.stress_eval(dof, right, x);
        let act = |t: Tensor, s: f64| [s * (t[0][0] * n[0] + t[0][1] * n[1]), s * (t[1][0] * n[0] + t[1][1] * n[1])];
        let (l, r) = (act(tl, 1.0), act(tr, -1.0));
        [l[0] + r[0], l[1] + r[1]]
    }

    fn a(&self, s: Dof, t: Dof, eta: f64) -> f64 {
        let dev = |m: Tensor| {
            let h = 0.5 * (m[0][0] + m[1][1]);
            [[m[0][0] - h, m[0][1]], [m[1][0], m[1][1] - h]]
        };
        let mut total = 0.0;
        for (ci, cell) in self.cells.iter().enumerate() {
            for (x, w) in cell.rule() {
                let (ds, dt) = (dev(self.stress_eval(s, ci, x).0), dev(self.stress_eval(t, ci, x).0));
                let mut contr = 0.0;
                for r in 0..2 {
                    for c in 0..2 {
                        contr += ds[r][c] * dt[r][c];
                    }
                }
                total += 0.5 * w * contr;
            }
        }
        for &(a, b, l, r, n) in &self.edges {
            let Some(r) = r else { continue };
            let h = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
            for (x, w) in Self::edge_points(a, b) {
                let (js, jt) = (self.jump(s, l, r, n, x), self.jump(t, l, r, n, x));
                total += eta / h * w * (js[0] * jt[0] + js[1] * jt[1]);
            }
        }
        total
    }

    fn b(&self, t: Dof, v: Dof) -> f64 {
        let mut total = 0.0;
        for (ci, cell) in self.cells.iter().enumerate() {
            for (x, w) in cell.rule() {
                let (_, div) = self.stress_eval(t, ci, x);
                let vv = self.velocity_eval(v, ci, x);
                total += w * (div[0] * vv[0] + div[1] * vv[1]);
            }
        }
        for &(a, b, l, r, n) in &self.edges {
            let Some(r) = r else { continue };
            for (x, w) in Self::edge_points(a, b) {
                let j = self.jump(t, l, r, n, x);
                let (vl, vr) = (self.velocity_eval(v, l, x), self.velocity_eval(v, r, x));
                let avg = [0.5 * (vl[0] + vr[0]), 0.5 * (vl[1] + vr[1])];
                total -= w * (j[0] * avg[0] + j[1] * avg[1]);
            }
        }
        total
    }

    fn s(&self, u: Dof, v: Dof, inv_kappa: &dyn Fn([f64; 2]) -> f64) -> f64 {
        let mut total = 0.0;
        for (ci, cell) in self.cells.iter().enumerate() {
            for (x, w) in cell.rule() {
                let (a, b) = (self.velocity_eval(u, ci, x), self.velocity_eval(v, ci, x));
                total += w * inv_kappa(x) * (a[0] * b[0] + a[1] * b[1]);
            }
        }
        total
    }

    fn c(&self, t: Dof) -> f64 {
        let mut total = 0.0;
        for (ci, cell) in self.cells.iter().enumerate() {
            for (x, w) in cell.rule() {
                let (m, _) = self.stress_eval(t, ci, x);
                total += w * (m[0][0] + m[1][1]);
            }
        }
        total
    }

    /// `<tau n, g>` over the boundary.
    fn g(&self, t: Dof, g: &dyn Fn([f64; 2]) -> [f64; 2]) -> f64 {
        let mut total = 0.0;
        for &(a, b, l, r, n) in &self.edges {
            if r.is_some() {
                continue;
            }
            for (x, w) in Self::edge_points(a, b) {
                let (m, _) = self.stress_eval(t, l, x);
                let gv = g(x);
                let tn = [m[0][0] * n[0] + m[0][1] * n[1], m[1][0] * n[0] + m[1][1] * n[1]];
                total += w * (tn[0] * gv[0] + tn[1] * gv[1]);
            }
        }
        total
    }

    fn f(&self, v: Dof, f: &dyn Fn([f64; 2]) -> [f64; 2]) -> f64 {
        let mut total = 0.0;
        for (ci, cell) in self.cells.iter().enumerate() {
            for (x, w) in cell.rule() {
                let (a, fv) = (self.velocity_eval(v, ci, x), f(x));
                total += w * (a[0] * fv[0] + a[1] * fv[1]);
            }
        }
        total
    }
}

fn close(got: f64, want: f64, what: &str) {
    assert!((got - want).abs() <= 1e-13 * want.abs().max(1.0), "{what}: assembled {got:e}, oracle {want:e}");
}

pub fn check(diagonal: Diagonal, inv_kappa: KappaInvField, eta: f64) {
    let k = 0;
    let mesh = Mesh::uniform_unit_square(1, diagonal).unwrap();
    assert_eq!(mesh.num_cells(), 2);
    let g = |x: [f64; 2]| [1.0 + x[0] - 2.0 * x[1], 0.5 * x[0] * x[1] - 0.25];
    let f = |x: [f64; 2]| [x[0] + 3.0, 2.0 - x[1]];
    let problem = BrinkmanProblem {
        name: "oracle".into(),
        kappa_inv: inv_kappa.clone(),
        nu: 1.0,
        source: Arc::new(f),
        boundary: Arc::new(g),
        exact: None,
    };
    let opts = AssemblyOptions { penalty: eta, extra_quadrature: 8 };
    let sys = assemble_system(&mesh, k, &problem, &opts).unwrap();
    let oracle = Oracle::new(&mesh, k);
    let ik = |x: [f64; 2]| inv_kappa.value(x).unwrap();
    let (ss, vs) = (&sys.spaces.stress, &sys.spaces.velocity);
    let mut sdofs = vec![None; ss.total_dofs()];
    let mut vdofs = vec![None; vs.total_dofs()];
    for cell in 0..2 {
        for comp in 0..3 {
            for i in 0..ss.scalar_dim() {
                sdofs[ss.dof(cell, comp, i)] = Some(Dof::Stress { cell, comp, i });
            }
        }
        for comp in 0..2 {
            for i in 0..vs.scalar_dim() {
                vdofs[vs.dof(cell, comp, i)] = Some(Dof::Velocity { cell, comp, i });
            }
        }
    }
    let sdofs: Vec<Dof> = sdofs.into_iter().map(Option::unwrap).collect();
    let vdofs: Vec<Dof> = vdofs.into_iter().map(Option::unwrap).collect();
    for (r, &s) in sdofs.iter().enumerate() {
        for (c, &t) in sdofs.iter().enumerate() {
            close(sys.a.get(r, c), oracle.a(s, t, eta), &format!("A[{r}][{c}]"));
        }
        close(sys.c[r], oracle.c(s), &format!("c[{r}]"));
        close(sys.g[r], oracle.g(s, &g), &format!("G[{r}]"));
    }
    for (r, &v) in vdofs.iter().enumerate() {
        for (c, &t) in sdofs.iter().enumerate() {
            close(sys.b.get(r, c), oracle.b(t, v), &format!("B[{r}][{c}]"));
        }
        for (c, &u) in vdofs.iter().enumerate() {
            close(sys.s.get(r, c), oracle.s(v, u, &ik), &format!("S[{r}][{c}]"));
        }
        close(sys.f[r], oracle.f(v, &f), &format!("F[{r}]"));
    }
}
