//! Problem catalog: manufactured solutions, high-contrast permeability
//! layouts, and the viscosity rescaling.
//!
//! Problems are stated in physical variables with viscosity `nu`:
//! `sigma = 2 nu eps(u) - p I`, `nu kappa^{-1} u - div sigma = f`,
//! `div u = 0`, `u = g` on the boundary. The discrete scheme is written for
//! `nu = 1`; [`BrinkmanProblem::nu_scale`] maps a problem onto that form by
//! `sigma~ = sigma / nu`, `p~ = p / nu`, `f~ = f / nu`.

use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::math::{self, PI};
use crate::tensor::SymTensorValue;

pub type ScalarFn = Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// Closed axis-aligned rectangle `[x0, x1] x [y0, y1]`.
    Rect { x: [f64; 2], y: [f64; 2] },
    Disc { center: [f64; 2], radius: f64 },
}

impl Shape {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        match *self {
            Shape::Rect { x, y } => p[0] >= x[0] && p[0] <= x[1] && p[1] >= y[0] && p[1] <= y[1],
            Shape::Disc { center, radius } => {
                let (dx, dy) = (p[0] - center[0], p[1] - center[1]);
                dx * dx + dy * dy <= radius * radius
            }
        }
    }
}

/// Inverse permeability `kappa^{-1}(x)`.
#[derive(Clone)]
pub enum KappaInvField {
    Constant(f64),
    ClosedForm { label: String, eval: ScalarFn },
    /// Later regions take precedence over earlier ones. Without a background,
    /// points outside every region are undefined.
    Regions { background: Option<f64>, regions: Vec<(Shape, f64)> },
}

impl fmt::Debug for KappaInvField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KappaInvField::Constant(v) => write!(f, "Constant({v})"),
            KappaInvField::ClosedForm { label, .. } => write!(f, "ClosedForm({label})"),
            KappaInvField::Regions { background, regions } => {
                f.debug_struct("Regions").field("background", background).field("regions", regions).finish()
            }
        }
    }
}

impl KappaInvField {
    /// `1000 (sin(pi x) + 1.1)`
    pub fn example2() -> Self {
        KappaInvField::ClosedForm {
            label: "1000*(sin(pi*x)+1.1)".to_string(),
            eval: Arc::new(|x: [f64; 2]| 1000.0 * (math::sin(PI * x[0]) + 1.1)),
        }
    }

    pub fn value(&self, x: [f64; 2]) -> Option<f64> {
        match self {
            KappaInvField::Constant(v) => Some(*v),
            KappaInvField::ClosedForm { eval, .. } => Some(eval(x)),
            KappaInvField::Regions { background, regions } => regions
                .iter()
                .rev()
                .find(|(s, _)| s.contains(x))
                .map(|(_, v)| *v)
                .or(*background),
        }
    }

    /// Value at `x`, rejecting undefined and non-positive samples.
    pub fn try_value(&self, x: [f64; 2]) -> Result<f64> {
        match self.value(x) {
            None => Err(Error::InvalidProblem(alloc::format!(
                "inverse permeability undefined at ({}, {})",
                x[0],
                x[1]
            ))),
            Some(v) if !(v > 0.0) || !v.is_finite() => Err(Error::InvalidProblem(alloc::format!(
                "inverse permeability must be positive, got {v} at ({}, {})",
                x[0],
                x[1]
            ))),
            Some(v) => Ok(v),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, KappaInvField::Constant(_))
    }

    /// Short description for tables and logs.
    pub fn label(&self) -> String {
        match self {
            KappaInvField::Constant(v) => alloc::format!("{v}"),
            KappaInvField::ClosedForm { label, .. } => label.clone(),
            KappaInvField::Regions { .. } => "regions".to_string(),
        }
    }

    /// Check positivity on a `samples x samples` grid of the unit square.
    pub fn validate(&self, samples: usize) -> Result<()> {
        let s = samples.max(2);
        for j in 0..s {
            for i in 0..s {
                let x = [i as f64 / (s - 1) as f64, j as f64 / (s - 1) as f64];
                self.try_value(x)?;
            }
        }
        Ok(())
    }
}

/// Closed-form solution of a manufactured problem. Second derivatives are
/// hand-coded; `hessian[i][j][l] = d^2 u_i / dx_j dx_l`.
pub trait ExactSolution: Send + Sync {
    fn velocity(&self, x: [f64; 2]) -> [f64; 2];
    fn velocity_gradient(&self, x: [f64; 2]) -> [[f64; 2]; 2];
    fn velocity_hessian(&self, x: [f64; 2]) -> [[[f64; 2]; 2]; 2];
    fn pressure(&self, x: [f64; 2]) -> f64;
    fn pressure_gradient(&self, x: [f64; 2]) -> [f64; 2];
}

/// `sigma = 2 nu eps(u) - p I`
pub fn stress_of(exact: &dyn ExactSolution, nu: f64, x: [f64; 2]) -> SymTensorValue {
    let e = SymTensorValue::strain(exact.velocity_gradient(x));
    let p = exact.pressure(x);
    (2.0 * nu) * e - p * SymTensorValue::identity()
}

/// Row-wise `div sigma = nu (lap u + grad div u) - grad p`.
pub fn stress_divergence_of(exact: &dyn ExactSolution, nu: f64, x: [f64; 2]) -> [f64; 2] {
    let h = exact.velocity_hessian(x);
    let gp = exact.pressure_gradient(x);
    let mut out = [0.0; 2];
    for (i, o) in out.iter_mut().enumerate() {
        let lap = h[i][0][0] + h[i][1][1];
        let grad_div = h[0][i][0] + h[1][i][1];
        *o = nu * (lap + grad_div) - gp[i];
    }
    out
}

/// Example 1: polynomial velocity vanishing on the boundary.
#[derive(Debug, Clone, Copy, Default)]
pub struct Example1Exact;

impl ExactSolution for Example1Exact {
    fn velocity(&self, x: [f64; 2]) -> [f64; 2] {
        let (a, b) = (quartic(x[0]), cubic(x[1]));
        [a.0 * b.0, -cubic(x[0]).0 * quartic(x[1]).0]
    }

    fn velocity_gradient(&self, x: [f64; 2]) -> [[f64; 2]; 2] {
        let (ax, bx, ay, by) = (quartic(x[0]), cubic(x[0]), quartic(x[1]), cubic(x[1]));
        [[ax.1 * by.0, ax.0 * by.1], [-bx.1 * ay.0, -bx.0 * ay.1]]
    }

    fn velocity_hessian(&self, x: [f64; 2]) -> [[[f64; 2]; 2]; 2] {
        let (ax, bx, ay, by) = (quartic(x[0]), cubic(x[0]), quartic(x[1]), cubic(x[1]));
        [
            [[ax.2 * by.0, ax.1 * by.1], [ax.1 * by.1, ax.0 * by.2]],
            [[-bx.2 * ay.0, -bx.1 * ay.1], [-bx.1 * ay.1, -bx.0 * ay.2]],
        ]
    }

    fn pressure(&self, x: [f64; 2]) -> f64 {
        (2.0 * x[0] - 1.0) * (2.0 * x[1] - 1.0)
    }

    fn pressure_gradient(&self, x: [f64; 2]) -> [f64; 2] {
        [2.0 * (2.0 * x[1] - 1.0), 2.0 * (2.0 * x[0] - 1.0)]
    }
}

/// `t^2 (t-1)^2` and its first two derivatives.
fn quartic(t: f64) -> (f64, f64, f64) {
    let v = t * t * (t - 1.0) * (t - 1.0);
    let d1 = 4.0 * t * t * t - 6.0 * t * t + 2.0 * t;
    let d2 = 12.0 * t * t - 12.0 * t + 2.0;
    (v, d1, d2)
}

/// `t (t-1) (2t-1)` and its first two derivatives.
fn cubic(t: f64) -> (f64, f64, f64) {
    let v = 2.0 * t * t * t - 3.0 * t * t + t;
    let d1 = 6.0 * t * t - 6.0 * t + 1.0;
    let d2 = 12.0 * t - 6.0;
    (v, d1, d2)
}

/// Example 2: trigonometric velocity, `p = cos(pi x) cos(pi y)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Example2Exact;

/// `sin^2(pi t)` and derivatives.
fn sin_sq(t: f64) -> (f64, f64, f64) {
    let s = math::sin(PI * t);
    (s * s, PI * math::sin(2.0 * PI * t), 2.0 * PI * PI * math::cos(2.0 * PI * t))
}

/// `sin(2 pi t)` and derivatives.
fn sin_2pi(t: f64) -> (f64, f64, f64) {
    let s = math::sin(2.0 * PI * t);
    (s, 2.0 * PI * math::cos(2.0 * PI * t), -4.0 * PI * PI * s)
}

impl ExactSolution for Example2Exact {
    // u1 = 2 sin^2(pi x) sin(pi y) cos(pi y) = sin^2(pi x) sin(2 pi y)
    fn velocity(&self, x: [f64; 2]) -> [f64; 2] {
        [sin_sq(x[0]).0 * sin_2pi(x[1]).0, -sin_2pi(x[0]).0 * sin_sq(x[1]).0]
    }

    fn velocity_gradient(&self, x: [f64; 2]) -> [[f64; 2]; 2] {
        let (sx, tx, sy, ty) = (sin_sq(x[0]), sin_2pi(x[0]), sin_sq(x[1]), sin_2pi(x[1]));
        [[sx.1 * ty.0, sx.0 * ty.1], [-tx.1 * sy.0, -tx.0 * sy.1]]
    }

    fn velocity_hessian(&self, x: [f64; 2]) -> [[[f64; 2]; 2]; 2] {
        let (sx, tx, sy, ty) = (sin_sq(x[0]), sin_2pi(x[0]), sin_sq(x[1]), sin_2pi(x[1]));
        [
            [[sx.2 * ty.0, sx.1 * ty.1], [sx.1 * ty.1, sx.0 * ty.2]],
            [[-tx.2 * sy.0, -tx.1 * sy.1], [-tx.1 * sy.1, -tx.0 * sy.2]],
        ]
    }

    fn pressure(&self, x: [f64; 2]) -> f64 {
        math::cos(PI * x[0]) * math::cos(PI * x[1])
    }

    fn pressure_gradient(&self, x: [f64; 2]) -> [f64; 2] {
        [
            -PI * math::sin(PI * x[0]) * math::cos(PI * x[1]),
            -PI * math::cos(PI * x[0]) * math::sin(PI * x[1]),
        ]
    }
}

/// Constant velocity `u = (a, b)` with `p = 0`.
#[derive(Debug, Clone, Copy)]
pub struct ConstantFlowExact(pub [f64; 2]);

impl ExactSolution for ConstantFlowExact {
    fn velocity(&self, _: [f64; 2]) -> [f64; 2] {
        self.0
    }
    fn velocity_gradient(&self, _: [f64; 2]) -> [[f64; 2]; 2] {
        [[0.0; 2]; 2]
    }
    fn velocity_hessian(&self, _: [f64; 2]) -> [[[f64; 2]; 2]; 2] {
        [[[0.0; 2]; 2]; 2]
    }
    fn pressure(&self, _: [f64; 2]) -> f64 {
        0.0
    }
    fn pressure_gradient(&self, _: [f64; 2]) -> [f64; 2] {
        [0.0; 2]
    }
}

/// Pressure divided by `nu`, everything else unchanged.
struct ScaledPressure {
    inner: Arc<dyn ExactSolution>,
    inv_nu: f64,
}

impl ExactSolution for ScaledPressure {
    fn velocity(&self, x: [f64; 2]) -> [f64; 2] {
        self.inner.velocity(x)
    }
    fn velocity_gradient(&self, x: [f64; 2]) -> [[f64; 2]; 2] {
        self.inner.velocity_gradient(x)
    }
    fn velocity_hessian(&self, x: [f64; 2]) -> [[[f64; 2]; 2]; 2] {
        self.inner.velocity_hessian(x)
    }
    fn pressure(&self, x: [f64; 2]) -> f64 {
        self.inv_nu * self.inner.pressure(x)
    }
    fn pressure_gradient(&self, x: [f64; 2]) -> [f64; 2] {
        let g = self.inner.pressure_gradient(x);
        [self.inv_nu * g[0], self.inv_nu * g[1]]
    }
}

#[derive(Clone)]
pub struct BrinkmanProblem {
    pub name: String,
    pub kappa_inv: KappaInvField,
    pub nu: f64,
    pub source: VectorFn,
    pub boundary: VectorFn,
    pub exact: Option<Arc<dyn ExactSolution>>,
}

impl fmt::Debug for BrinkmanProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BrinkmanProblem")
            .field("name", &self.name)
            .field("kappa_inv", &self.kappa_inv)
            .field("nu", &self.nu)
            .field("has_exact", &self.exact.is_some())
            .finish()
    }
}

impl BrinkmanProblem {
    /// Manufactured problem: `f = nu kappa^{-1} u - div sigma`, `g = u`.
    pub fn manufactured(name: &str, exact: Arc<dyn ExactSolution>, kappa_inv: KappaInvField, nu: f64) -> Self {
        let (e1, e2) = (exact.clone(), exact.clone());
        let k = kappa_inv.clone();
        let source: VectorFn = Arc::new(move |x| {
            let u = e1.velocity(x);
            let d = stress_divergence_of(&*e1, nu, x);
            let ki = k.value(x).unwrap_or(f64::NAN);
            [nu * ki * u[0] - d[0], nu * ki * u[1] - d[1]]
        });
        let boundary: VectorFn = Arc::new(move |x| e2.velocity(x));
        BrinkmanProblem { name: name.to_string(), kappa_inv, nu, source, boundary, exact: Some(exact) }
    }

    pub fn exact_stress(&self, x: [f64; 2]) -> Option<SymTensorValue> {
        self.exact.as_deref().map(|e| stress_of(e, self.nu, x))
    }

    pub fn exact_stress_divergence(&self, x: [f64; 2]) -> Option<[f64; 2]> {
        self.exact.as_deref().map(|e| stress_divergence_of(e, self.nu, x))
    }

    /// Equivalent problem with unit viscosity: `f / nu`, same `g` and
    /// `kappa^{-1}`, exact pressure and stress divided by `nu`.
    pub fn nu_scale(&self) -> Result<BrinkmanProblem> {
        let nu = self.nu;
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(Error::InvalidParameter(alloc::format!("viscosity must be positive, got {nu}")));
        }
        if nu == 1.0 {
            return Ok(self.clone());
        }
        let f = self.source.clone();
        let source: VectorFn = Arc::new(move |x| {
            let v = f(x);
            [v[0] / nu, v[1] / nu]
        });
        let exact = self
            .exact
            .clone()
            .map(|inner| Arc::new(ScaledPressure { inner, inv_nu: 1.0 / nu }) as Arc<dyn ExactSolution>);
        Ok(BrinkmanProblem {
            name: self.name.clone(),
            kappa_inv: self.kappa_inv.clone(),
            nu: 1.0,
            source,
            boundary: self.boundary.clone(),
            exact,
        })
    }

    /// `int_Gamma g . n` on the unit square, by Gauss quadrature per side.
    pub fn boundary_flux(&self) -> f64 {
        let Ok(rule) = crate::quadrature::interval_rule(21) else { return f64::NAN };
        let sides: [([f64; 2], [f64; 2], [f64; 2]); 4] = [
            ([0.0, 0.0], [1.0, 0.0], [0.0, -1.0]),
            ([1.0, 0.0], [1.0, 1.0], [1.0, 0.0]),
            ([1.0, 1.0], [0.0, 1.0], [0.0, 1.0]),
            ([0.0, 1.0], [0.0, 0.0], [-1.0, 0.0]),
        ];
        let mut total = 0.0;
        for (a, b, n) in sides {
            // subdivide each side so oscillatory data is integrated accurately
            let pieces = 16;
            for s in 0..pieces {
                for (t, w) in rule.iter() {
                    let tt = (s as f64 + t[0]) / pieces as f64;
                    let x = [a[0] + tt * (b[0] - a[0]), a[1] + tt * (b[1] - a[1])];
                    let g = (self.boundary)(x);
                    total += w / pieces as f64 * (g[0] * n[0] + g[1] * n[1]);
                }
            }
        }
        total
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0) || !self.nu.is_finite() {
            return Err(Error::InvalidParameter(alloc::format!("viscosity must be positive, got {}", self.nu)));
        }
        self.kappa_inv.validate(101)
    }
}

/// Example 1 with constant `kappa^{-1}` and unit viscosity.
pub fn example1(inv_kappa: f64) -> BrinkmanProblem {
    BrinkmanProblem::manufactured("example1", Arc::new(Example1Exact), KappaInvField::Constant(inv_kappa), 1.0)
}

/// Example 2 with `kappa^{-1} = 1000 (sin(pi x) + 1.1)`.
pub fn example2(nu: f64) -> BrinkmanProblem {
    BrinkmanProblem::manufactured("example2", Arc::new(Example2Exact), KappaInvField::example2(), nu)
}

fn unit_flow_problem(name: &str, kappa_inv: KappaInvField) -> BrinkmanProblem {
    BrinkmanProblem {
        name: name.to_string(),
        kappa_inv,
        nu: 1e-2,
        source: Arc::new(|_| [0.0, 0.0]),
        boundary: Arc::new(|_| [1.0, 0.0]),
        exact: None,
    }
}

/// Example 3: `kappa^{-1} = inv_kappa_high` inside `obstacles`, 1 elsewhere.
/// `f = 0`, `nu = 1e-2`, `g = (1, 0)`.
pub fn example3(inv_kappa_high: f64, obstacles: &[Shape]) -> BrinkmanProblem {
    let regions = obstacles.iter().map(|s| (*s, inv_kappa_high)).collect();
    unit_flow_problem("example3", KappaInvField::Regions { background: Some(1.0), regions })
}

/// Example 4: `kappa^{-1} = 1` inside `vugs`, `inv_kappa_high` elsewhere.
pub fn example4(inv_kappa_high: f64, vugs: &[Shape]) -> BrinkmanProblem {
    let regions = vugs.iter().map(|s| (*s, 1.0)).collect();
    unit_flow_problem("example4", KappaInvField::Regions { background: Some(inv_kappa_high), regions })
}

/// Constant data problem: `f`, `g` constant. With `f = kappa^{-1} g` the exact
/// solution is `u = g`, `p = 0`, `sigma = 0`.
pub fn constant_data(name: &str, inv_kappa: KappaInvField, nu: f64, f: [f64; 2], g: [f64; 2]) -> BrinkmanProblem {
    BrinkmanProblem {
        name: name.to_string(),
        kappa_inv: inv_kappa,
        nu,
        source: Arc::new(move |_| f),
        boundary: Arc::new(move |_| g),
        exact: None,
    }
}

/// Patch test: `kappa = 1`, `u = (1, 0)`, `p = 0`, `f = (1, 0)`.
pub fn patch_test() -> BrinkmanProblem {
    BrinkmanProblem::manufactured("patch", Arc::new(ConstantFlowExact([1.0, 0.0])), KappaInvField::Constant(1.0), 1.0)
}

/// Multiply stress coefficients by `nu`, mapping a solution of the scaled
/// problem back to physical variables. Pressure follows from the stress.
pub fn nu_unscale_values(sigma: &mut [f64], nu: f64) {
    if nu != 1.0 {
        for s in sigma {
            *s *= nu;
        }
    }
}
