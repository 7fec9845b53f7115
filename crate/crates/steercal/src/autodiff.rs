//! Forward-mode dual numbers with a fixed number of tangent channels.
//!
//! Every loss in the calibration path is ultimately differentiated with
//! respect to the three Rodrigues parameters of the relative rotation, so a
//! dual number carrying three tangents ([`Dual3`]) evaluates a value and its
//! full gradient in one pass. [`DualN`] is generic over the channel count so
//! the same scalar also serves Jacobian assembly elsewhere (e.g. bundle
//! adjustment blocks).

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

/// Scalar with `N` tangent channels propagated by the chain rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualN<const N: usize> {
    pub value: f64,
    pub tangent: [f64; N],
}

/// The workhorse: value plus gradient with respect to three parameters.
pub type Dual3 = DualN<3>;

impl<const N: usize> DualN<N> {
    /// A constant: value with zero tangent.
    pub fn constant(value: f64) -> Self {
        Self {
            value,
            tangent: [0.0; N],
        }
    }

    /// The `i`-th independent variable: unit tangent in channel `i`.
    pub fn variable(value: f64, i: usize) -> Self {
        let mut tangent = [0.0; N];
        tangent[i] = 1.0;
        Self { value, tangent }
    }

    pub fn new(value: f64, tangent: [f64; N]) -> Self {
        Self { value, tangent }
    }

    /// Applies `f` with derivative `df` evaluated at the value.
    fn lift(self, f: f64, df: f64) -> Self {
        let mut tangent = [0.0; N];
        for i in 0..N {
            tangent[i] = df * self.tangent[i];
        }
        Self { value: f, tangent }
    }

    pub fn exp(self) -> Self {
        let e = self.value.exp();
        self.lift(e, e)
    }

    pub fn ln(self) -> Self {
        self.lift(self.value.ln(), 1.0 / self.value)
    }

    pub fn sqrt(self) -> Self {
        let s = self.value.sqrt();
        // Subgradient 0 at the origin keeps visibility-masked zero distances inert.
        let d = if s > 0.0 { 0.5 / s } else { 0.0 };
        self.lift(s, d)
    }

    pub fn sin(self) -> Self {
        self.lift(self.value.sin(), self.value.cos())
    }

    pub fn cos(self) -> Self {
        self.lift(self.value.cos(), -self.value.sin())
    }

    pub fn tanh(self) -> Self {
        let t = self.value.tanh();
        self.lift(t, 1.0 - t * t)
    }

    pub fn abs(self) -> Self {
        if self.value < 0.0 {
            -self
        } else {
            self
        }
    }

    pub fn powi(self, n: i32) -> Self {
        self.lift(
            self.value.powi(n),
            f64::from(n) * self.value.powi(n - 1),
        )
    }

    pub fn recip(self) -> Self {
        let r = 1.0 / self.value;
        self.lift(r, -r * r)
    }

    pub fn max(self, other: Self) -> Self {
        if self.value >= other.value {
            self
        } else {
            other
        }
    }

    pub fn is_finite(self) -> bool {
        self.value.is_finite() && self.tangent.iter().all(|t| t.is_finite())
    }
}

impl<const N: usize> Add for DualN<N> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let mut tangent = self.tangent;
        for i in 0..N {
            tangent[i] += rhs.tangent[i];
        }
        Self {
            value: self.value + rhs.value,
            tangent,
        }
    }
}

impl<const N: usize> Sub for DualN<N> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let mut tangent = self.tangent;
        for i in 0..N {
            tangent[i] -= rhs.tangent[i];
        }
        Self {
            value: self.value - rhs.value,
            tangent,
        }
    }
}

impl<const N: usize> Mul for DualN<N> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut tangent = [0.0; N];
        for i in 0..N {
            tangent[i] = self.tangent[i] * rhs.value + self.value * rhs.tangent[i];
        }
        Self {
            value: self.value * rhs.value,
            tangent,
        }
    }
}

impl<const N: usize> Div for DualN<N> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let inv = 1.0 / rhs.value;
        let v = self.value * inv;
        let mut tangent = [0.0; N];
        for i in 0..N {
            tangent[i] = (self.tangent[i] - v * rhs.tangent[i]) * inv;
        }
        Self { value: v, tangent }
    }
}

impl<const N: usize> Neg for DualN<N> {
    type Output = Self;
    fn neg(self) -> Self {
        let mut tangent = self.tangent;
        for t in tangent.iter_mut() {
            *t = -*t;
        }
        Self {
            value: -self.value,
            tangent,
        }
    }
}

impl<const N: usize> AddAssign for DualN<N> {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl<const N: usize> SubAssign for DualN<N> {
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl<const N: usize> Mul<f64> for DualN<N> {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        self.lift(self.value * rhs, rhs)
    }
}

impl<const N: usize> Add<f64> for DualN<N> {
    type Output = Self;
    fn add(self, rhs: f64) -> Self {
        Self {
            value: self.value + rhs,
            tangent: self.tangent,
        }
    }
}

impl<const N: usize> Sub<f64> for DualN<N> {
    type Output = Self;
    fn sub(self, rhs: f64) -> Self {
        Self {
            value: self.value - rhs,
            tangent: self.tangent,
        }
    }
}

impl<const N: usize> Div<f64> for DualN<N> {
    type Output = Self;
    fn div(self, rhs: f64) -> Self {
        self.lift(self.value / rhs, 1.0 / rhs)
    }
}

/// Numerically stable `ln(sum_i exp(x_i))` over dual numbers.
pub fn logsumexp<const N: usize>(xs: &[DualN<N>]) -> DualN<N> {
    let m = xs
        .iter()
        .map(|x| x.value)
        .fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return DualN::constant(m);
    }
    let mut sum = DualN::constant(0.0);
    for &x in xs {
        sum += (x - m).exp();
    }
    sum.ln() + m
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fd_grad(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn elementary_ops_match_finite_differences() {
        let f = |x: f64| ((x * x + 3.0 * x).sin().exp() / (x + 2.0)).sqrt();
        let fd = |x: Dual3| {
            ((x * x + x * 3.0).sin().exp() / (x + 2.0)).sqrt()
        };
        for &x0 in &[0.3, 1.1, 2.7] {
            let d = fd(Dual3::variable(x0, 0));
            assert_relative_eq!(d.value, f(x0), max_relative = 1e-12);
            assert_relative_eq!(d.tangent[0], fd_grad(f, x0, 1e-6), max_relative = 1e-6);
        }
    }

    #[test]
    fn tangent_channels_are_independent() {
        let x = Dual3::variable(2.0, 0);
        let y = Dual3::variable(5.0, 1);
        let z = x * y + y.ln();
        assert_relative_eq!(z.value, 10.0 + 5.0f64.ln());
        assert_relative_eq!(z.tangent[0], 5.0);
        assert_relative_eq!(z.tangent[1], 2.0 + 0.2);
        assert_relative_eq!(z.tangent[2], 0.0);
    }

    #[test]
    fn logsumexp_is_stable_and_correct() {
        let xs = vec![
            Dual3::variable(1000.0, 0),
            Dual3::constant(1000.0),
            Dual3::constant(999.0),
        ];
        let l = logsumexp(&xs);
        let expected = 1000.0 + (1.0 + 1.0 + (-1.0f64).exp()).ln();
        assert_relative_eq!(l.value, expected, max_relative = 1e-12);
        // d/dx0 = exp(x0)/sum = softmax weight of x0
        let w = 1.0 / (1.0 + 1.0 + (-1.0f64).exp());
        assert_relative_eq!(l.tangent[0], w, max_relative = 1e-12);
    }
}
