//! Symmetric 2x2 tensors stored as `(t11, t12, t22)`.

use core::ops::{Add, Mul, Sub};

use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SymTensorValue {
    pub t11: f64,
    pub t12: f64,
    pub t22: f64,
}

/// Unit tensors of the three stored components; the off-diagonal one has a
/// `1` in both the `(1,2)` and `(2,1)` slots.
pub const COMPONENT_UNITS: [SymTensorValue; 3] = [
    SymTensorValue { t11: 1.0, t12: 0.0, t22: 0.0 },
    SymTensorValue { t11: 0.0, t12: 1.0, t22: 0.0 },
    SymTensorValue { t11: 0.0, t12: 0.0, t22: 1.0 },
];

impl SymTensorValue {
    pub const fn new(t11: f64, t12: f64, t22: f64) -> Self {
        SymTensorValue { t11, t12, t22 }
    }

    pub const fn identity() -> Self {
        Self::new(1.0, 0.0, 1.0)
    }

    pub fn trace(&self) -> f64 {
        self.t11 + self.t22
    }

    /// `t - tr(t)/2 I`
    pub fn deviatoric(&self) -> Self {
        let m = 0.5 * self.trace();
        Self::new(self.t11 - m, self.t12, self.t22 - m)
    }

    /// Full contraction `t : s`, counting the off-diagonal entry twice.
    pub fn contract(&self, other: &Self) -> f64 {
        self.t11 * other.t11 + 2.0 * self.t12 * other.t12 + self.t22 * other.t22
    }

    /// `t n`, the row-wise action on a vector.
    pub fn normal_action(&self, n: [f64; 2]) -> [f64; 2] {
        [self.t11 * n[0] + self.t12 * n[1], self.t12 * n[0] + self.t22 * n[1]]
    }

    pub fn frobenius(&self) -> f64 {
        math::sqrt(self.contract(self))
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.t11, self.t12, self.t22]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    /// Symmetric gradient of a vector field from its gradient
    /// `g[i][j] = d u_i / d x_j`.
    pub fn strain(g: [[f64; 2]; 2]) -> Self {
        Self::new(g[0][0], 0.5 * (g[0][1] + g[1][0]), g[1][1])
    }
}

impl Add for SymTensorValue {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.t11 + o.t11, self.t12 + o.t12, self.t22 + o.t22)
    }
}

impl Sub for SymTensorValue {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.t11 - o.t11, self.t12 - o.t12, self.t22 - o.t22)
    }
}

impl Mul<SymTensorValue> for f64 {
    type Output = SymTensorValue;
    fn mul(self, t: SymTensorValue) -> SymTensorValue {
        SymTensorValue::new(self * t.t11, self * t.t12, self * t.t22)
    }
}

pub fn deviatoric(t: SymTensorValue) -> SymTensorValue {
    t.deviatoric()
}

pub fn trace(t: SymTensorValue) -> f64 {
    t.trace()
}

pub fn normal_action(t: SymTensorValue, n: [f64; 2]) -> [f64; 2] {
    t.normal_action(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn deviatoric_examples() {
        assert_eq!(SymTensorValue::identity().deviatoric(), SymTensorValue::new(0.0, 0.0, 0.0));
        assert_eq!(SymTensorValue::new(1.0, 0.0, -1.0).deviatoric(), SymTensorValue::new(1.0, 0.0, -1.0));
        assert_eq!(SymTensorValue::new(2.0, 1.0, 0.0).deviatoric(), SymTensorValue::new(1.0, 1.0, -1.0));
    }

    #[test]
    fn trace_and_normal_action() {
        assert_eq!(trace(SymTensorValue::identity()), 2.0);
        assert_eq!(normal_action(SymTensorValue::identity(), [1.0, 0.0]), [1.0, 0.0]);
        assert_eq!(normal_action(SymTensorValue::new(0.0, 1.0, 0.0), [0.0, 1.0]), [1.0, 0.0]);
    }

    #[test]
    fn strain_of_swap_field() {
        // u = (y, x): grad u = [[0, 1], [1, 0]]
        assert_eq!(SymTensorValue::strain([[0.0, 1.0], [1.0, 0.0]]), SymTensorValue::new(0.0, 1.0, 0.0));
    }

    proptest! {
        #[test]
        fn deviatoric_is_trace_free_projection(a in -1e3..1e3f64, b in -1e3..1e3f64, c in -1e3..1e3f64) {
            let t = SymTensorValue::new(a, b, c);
            let d = t.deviatoric();
            prop_assert!(d.trace().abs() <= 1e-12 * (1.0 + t.trace().abs()));
            let dd = d.deviatoric();
            prop_assert!((dd - d).frobenius() <= 1e-12 * (1.0 + t.frobenius()));
            // |t|^2 = |t^d|^2 + tr(t)^2 / 2
            let lhs = t.contract(&t);
            let rhs = d.contract(&d) + 0.5 * t.trace() * t.trace();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs));
        }

        #[test]
        fn normal_action_is_linear(a in -10.0..10.0f64, b in -10.0..10.0f64, c in -10.0..10.0f64,
                                   s in -5.0..5.0f64, theta in 0.0..6.3f64) {
            let t = SymTensorValue::new(a, b, c);
            let n = [theta.cos(), theta.sin()];
            let lhs = (s * t).normal_action(n);
            let rhs = t.normal_action(n);
            prop_assert!((lhs[0] - s * rhs[0]).abs() < 1e-10 && (lhs[1] - s * rhs[1]).abs() < 1e-10);
        }
    }
}
