//! Forward-mode dual numbers for small per-row Jacobians.
//!
//! Geometry code is written once against [`Real`] and evaluated either on
//! plain `f64` or on `Dual<N>` to obtain exact derivatives with respect to
//! `N` seeded inputs.

use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Real:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn constant(x: f64) -> Self;
    fn value(self) -> f64;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn sqrt(self) -> Self;
}

impl Real for f64 {
    #[inline]
    fn constant(x: f64) -> Self {
        x
    }
    #[inline]
    fn value(self) -> f64 {
        self
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<const N: usize> {
    pub re: f64,
    pub eps: [f64; N],
}

impl<const N: usize> Dual<N> {
    /// The `i`-th independent variable with value `re`.
    pub fn seed(re: f64, i: usize) -> Self {
        let mut eps = [0.0; N];
        eps[i] = 1.0;
        Dual { re, eps }
    }

    #[inline]
    fn chain(self, re: f64, d: f64) -> Self {
        let mut eps = self.eps;
        for e in &mut eps {
            *e *= d;
        }
        Dual { re, eps }
    }
}

impl<const N: usize> Add for Dual<N> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        let mut eps = self.eps;
        for (e, oe) in eps.iter_mut().zip(o.eps) {
            *e += oe;
        }
        Dual {
            re: self.re + o.re,
            eps,
        }
    }
}

impl<const N: usize> Sub for Dual<N> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        let mut eps = self.eps;
        for (e, oe) in eps.iter_mut().zip(o.eps) {
            *e -= oe;
        }
        Dual {
            re: self.re - o.re,
            eps,
        }
    }
}

impl<const N: usize> Mul for Dual<N> {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        let mut eps = [0.0; N];
        for i in 0..N {
            eps[i] = self.eps[i] * o.re + self.re * o.eps[i];
        }
        Dual {
            re: self.re * o.re,
            eps,
        }
    }
}

impl<const N: usize> Div for Dual<N> {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        let inv = 1.0 / o.re;
        let re = self.re / o.re;
        let mut eps = [0.0; N];
        for i in 0..N {
            eps[i] = (self.eps[i] - re * o.eps[i]) * inv;
        }
        Dual { re, eps }
    }
}

impl<const N: usize> Neg for Dual<N> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        self.chain(-self.re, -1.0)
    }
}

impl<const N: usize> Real for Dual<N> {
    #[inline]
    fn constant(x: f64) -> Self {
        Dual {
            re: x,
            eps: [0.0; N],
        }
    }
    #[inline]
    fn value(self) -> f64 {
        self.re
    }
    #[inline]
    fn sin(self) -> Self {
        self.chain(self.re.sin(), self.re.cos())
    }
    #[inline]
    fn cos(self) -> Self {
        self.chain(self.re.cos(), -self.re.sin())
    }
    #[inline]
    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        self.chain(s, 0.5 / s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule_and_quotient() {
        let x = Dual::<2>::seed(3.0, 0);
        let y = Dual::<2>::seed(2.0, 1);
        let f = x * y / (x + y);
        // f = xy/(x+y); df/dx = y^2/(x+y)^2, df/dy = x^2/(x+y)^2
        assert!((f.re - 1.2).abs() < 1e-15);
        assert!((f.eps[0] - 4.0 / 25.0).abs() < 1e-15);
        assert!((f.eps[1] - 9.0 / 25.0).abs() < 1e-15);
    }

    #[test]
    fn values_match_plain_arithmetic_bitwise() {
        let (a, b) = (0.1f64, 0.7f64);
        let (x, y) = (Dual::<2>::seed(a, 0), Dual::<2>::seed(b, 1));
        assert_eq!((x / y).re, a / b);
        assert_eq!((x * y - x + y).re, a * b - a + b);
        assert_eq!(x.sqrt().sin().re, a.sqrt().sin());
    }

    #[test]
    fn transcendental_derivatives() {
        let x = Dual::<1>::seed(0.7, 0);
        assert!((x.sin().eps[0] - 0.7f64.cos()).abs() < 1e-15);
        assert!((x.cos().eps[0] + 0.7f64.sin()).abs() < 1e-15);
        assert!((x.sqrt().eps[0] - 0.5 / 0.7f64.sqrt()).abs() < 1e-15);
    }
}
