//! Orthonormal (Dubiner) polynomial basis on the reference triangle.
//!
//! With collapsed coordinates `a = 2x/(1-y) - 1`, `b = 2y - 1`, the basis
//! function with index `(p, q)` is
//!
//! ```text
//! psi_pq = c_pq * P_p(a) * ((1 - b)/2)^p * P_q^(2p+1, 0)(b),
//! c_pq   = sqrt(2 (2p + 1) (p + q + 1)),
//! ```
//!
//! which is orthonormal in `L^2` of the reference triangle (area 1/2). The
//! product `P_p(a) ((1-b)/2)^p` is evaluated through a recurrence in `(x, y)`
//! so nothing is singular at the top vertex.
//!
//! Functions are ordered by total degree, so the first `dim(P_m)` entries
//! span `P_m` for every `m <= k`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

pub const MAX_BASIS_DEGREE: usize = 5;

/// Number of polynomials of total degree `<= k` in two variables.
pub const fn scalar_dim(k: usize) -> usize {
    (k + 1) * (k + 2) / 2
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarBasis {
    degree: usize,
    /// `(p, q)` for each basis index.
    indices: Vec<(usize, usize)>,
}

/// Basis values and reference gradients tabulated at a point set.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisTable {
    pub dim: usize,
    pub num_points: usize,
    /// `values[pt * dim + i]`
    pub values: Vec<f64>,
    /// `gradients[pt * dim + i]`, with respect to reference coordinates.
    pub gradients: Vec<[f64; 2]>,
}

impl BasisTable {
    #[inline]
    pub fn value(&self, point: usize, i: usize) -> f64 {
        self.values[point * self.dim + i]
    }

    #[inline]
    pub fn gradient(&self, point: usize, i: usize) -> [f64; 2] {
        self.gradients[point * self.dim + i]
    }

    pub fn values_at(&self, point: usize) -> &[f64] {
        &self.values[point * self.dim..(point + 1) * self.dim]
    }

    pub fn gradients_at(&self, point: usize) -> &[[f64; 2]] {
        &self.gradients[point * self.dim..(point + 1) * self.dim]
    }
}

impl ScalarBasis {
    pub fn new(degree: usize) -> Result<Self> {
        if degree > MAX_BASIS_DEGREE {
            return Err(Error::UnsupportedDegree { requested: degree, max: MAX_BASIS_DEGREE });
        }
        let mut indices = Vec::with_capacity(scalar_dim(degree));
        for total in 0..=degree {
            for p in (0..=total).rev() {
                indices.push((p, total - p));
            }
        }
        Ok(ScalarBasis { degree, indices })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    /// Values and reference gradients of every basis function at `xi`.
    pub fn eval(&self, xi: [f64; 2], values: &mut [f64], gradients: &mut [[f64; 2]]) {
        let k = self.degree;
        let (x, y) = (xi[0], xi[1]);
        // Q_p = P_p(a) (1-y)^p and its gradient, via
        // (p+1) Q_{p+1} = (2p+1) (2x + y - 1) Q_p - p (1-y)^2 Q_{p-1}.
        let mut q = [0.0; MAX_BASIS_DEGREE + 1];
        let mut dq = [[0.0; 2]; MAX_BASIS_DEGREE + 1];
        q[0] = 1.0;
        if k >= 1 {
            q[1] = 2.0 * x + y - 1.0;
            dq[1] = [2.0, 1.0];
        }
        let s2 = (1.0 - y) * (1.0 - y);
        let ds2 = -2.0 * (1.0 - y);
        let lin = 2.0 * x + y - 1.0;
        for p in 1..k {
            let pf = p as f64;
            let c1 = (2.0 * pf + 1.0) / (pf + 1.0);
            let c2 = pf / (pf + 1.0);
            q[p + 1] = c1 * lin * q[p] - c2 * s2 * q[p - 1];
            dq[p + 1] = [
                c1 * (2.0 * q[p] + lin * dq[p][0]) - c2 * s2 * dq[p - 1][0],
                c1 * (q[p] + lin * dq[p][1]) - c2 * (ds2 * q[p - 1] + s2 * dq[p - 1][1]),
            ];
        }
        let b = 2.0 * y - 1.0;
        let mut jac = [0.0; MAX_BASIS_DEGREE + 1];
        let mut djac = [0.0; MAX_BASIS_DEGREE + 1];
        for (idx, &(p, qd)) in self.indices.iter().enumerate() {
            jacobi_with_derivative(qd, (2 * p + 1) as f64, b, &mut jac, &mut djac);
            let c = math::sqrt(2.0 * (2 * p + 1) as f64 * (p + qd + 1) as f64);
            let jv = jac[qd];
            // d/dy of P(2y - 1) = 2 P'(b)
            let jy = 2.0 * djac[qd];
            values[idx] = c * q[p] * jv;
            gradients[idx] = [c * dq[p][0] * jv, c * (dq[p][1] * jv + q[p] * jy)];
        }
    }

    /// Tabulate at a set of reference points.
    pub fn tabulate(&self, points: &[[f64; 2]]) -> BasisTable {
        let dim = self.dim();
        let mut values = alloc::vec![0.0; dim * points.len()];
        let mut gradients = alloc::vec![[0.0; 2]; dim * points.len()];
        for (i, &pt) in points.iter().enumerate() {
            self.eval(pt, &mut values[i * dim..(i + 1) * dim], &mut gradients[i * dim..(i + 1) * dim]);
        }
        BasisTable { dim, num_points: points.len(), values, gradients }
    }
}

/// `P_n^(alpha, 0)(x)` and derivatives for `n = 0..=order`.
fn jacobi_with_derivative(order: usize, alpha: f64, x: f64, p: &mut [f64], dp: &mut [f64]) {
    p[0] = 1.0;
    dp[0] = 0.0;
    if order == 0 {
        return;
    }
    p[1] = 0.5 * ((alpha + 2.0) * x + alpha);
    dp[1] = 0.5 * (alpha + 2.0);
    for n in 2..=order {
        let nf = n as f64;
        let a1 = 2.0 * nf * (nf + alpha) * (2.0 * nf + alpha - 2.0);
        let a2 = (2.0 * nf + alpha - 1.0) * alpha * alpha;
        let a3 = (2.0 * nf + alpha - 1.0) * (2.0 * nf + alpha) * (2.0 * nf + alpha - 2.0);
        let a4 = 2.0 * (nf + alpha - 1.0) * (nf - 1.0) * (2.0 * nf + alpha);
        p[n] = ((a2 + a3 * x) * p[n - 1] - a4 * p[n - 2]) / a1;
        dp[n] = ((a2 + a3 * x) * dp[n - 1] + a3 * p[n - 1] - a4 * dp[n - 2]) / a1;
    }
}

/// Evaluate the basis at a single point, allocating the output.
pub fn eval_scalar_basis(k: usize, points: &[[f64; 2]]) -> Result<BasisTable> {
    Ok(ScalarBasis::new(k)?.tabulate(points))
}
