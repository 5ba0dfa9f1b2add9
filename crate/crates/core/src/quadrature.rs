//! Quadrature on the unit interval and on the reference triangle.
//!
//! Interval rules are Gauss-Legendre mapped to `[0, 1]`. Triangle rules are
//! collapsed (Duffy) products of two Gauss-Legendre rules, which keeps every
//! weight positive and every point strictly inside the triangle.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Highest exactness degree a rule can be requested for.
pub const MAX_DEGREE: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule<const D: usize> {
    pub points: Vec<[f64; D]>,
    pub weights: Vec<f64>,
    pub exactness_degree: usize,
}

pub type TriangleRule = QuadratureRule<2>;
pub type IntervalRule = QuadratureRule<1>;

impl<const D: usize> QuadratureRule<D> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64; D], f64)> {
        self.points.iter().zip(self.weights.iter().copied())
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = alloc::vec![0.0; m];
    let mut w = alloc::vec![0.0; m];
    let mf = m as f64;
    for i in 0..(m + 1) / 2 {
        // Tricomi initial guess, then Newton on P_m.
        let mut z = math::cos(math::PI * (i as f64 + 0.75) / (mf + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(m, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_and_derivative(m, z);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[m - 1 - i] = z;
        w[i] = wi;
        w[m - 1 - i] = wi;
    }
    if m % 2 == 1 {
        x[m / 2] = 0.0;
    }
    (x, w)
}

fn legendre_and_derivative(m: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if m == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=m {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * z * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

fn check_degree(degree: usize) -> Result<()> {
    if degree > MAX_DEGREE {
        return Err(Error::UnsupportedQuadrature { requested: degree, max: MAX_DEGREE });
    }
    Ok(())
}

/// Gauss rule on `[0, 1]` exact for polynomials of degree `<= degree`.
pub fn interval_rule(degree: usize) -> Result<IntervalRule> {
    check_degree(degree)?;
    let m = degree / 2 + 1;
    let (x, w) = gauss_legendre(m);
    Ok(QuadratureRule {
        points: x.iter().map(|&xi| [0.5 * (xi + 1.0)]).collect(),
        weights: w.iter().map(|&wi| 0.5 * wi).collect(),
        exactness_degree: 2 * m - 1,
    })
}

/// Rule on the reference triangle `{(0,0), (1,0), (0,1)}` exact for all
/// monomials of total degree `<= degree`. Weights sum to `1/2`.
pub fn triangle_rule(degree: usize) -> Result<TriangleRule> {
    check_degree(degree)?;
    if degree <= 1 {
        return Ok(QuadratureRule {
            points: alloc::vec![[1.0 / 3.0, 1.0 / 3.0]],
            weights: alloc::vec![0.5],
            exactness_degree: 1,
        });
    }
    // x = s, y = t (1 - s), dx dy = (1 - s) ds dt. The integrand has degree
    // `degree + 1` in s and `degree` in t.
    let ms = (degree + 1) / 2 + 1;
    let mt = degree / 2 + 1;
    let (xs, ws) = gauss_legendre(ms);
    let (xt, wt) = gauss_legendre(mt);
    let mut points = Vec::with_capacity(ms * mt);
    let mut weights = Vec::with_capacity(ms * mt);
    for (si, wsi) in xs.iter().zip(&ws) {
        let s = 0.5 * (si + 1.0);
        for (ti, wti) in xt.iter().zip(&wt) {
            let t = 0.5 * (ti + 1.0);
            points.push([s, t * (1.0 - s)]);
            weights.push(0.25 * wsi * wti * (1.0 - s));
        }
    }
    Ok(QuadratureRule { points, weights, exactness_degree: (2 * ms - 2).min(2 * mt - 1) })
}
