//! Forward-mode automatic differentiation.
//!
//! A [`Jet`] carries a value together with its partial derivatives with
//! respect to up to [`MAX_VARS`] independent variables. Every residual in the
//! crate is written once, generically over [`Scalar`], and evaluated either on
//! plain `f64` (cost only) or on `Jet` (cost plus exact Jacobian row).

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

/// Upper bound on the number of differentiated variables (joint count).
pub const MAX_VARS: usize = 8;

/// Numeric type the kinematics and residual code is generic over.
pub trait Scalar:
    Copy
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
{
    fn cst(value: f64) -> Self;
    fn value(&self) -> f64;
    fn sqrt(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn ln_1p(self) -> Self;
    fn atan2(self, x: Self) -> Self;

    fn zero() -> Self {
        Self::cst(0.0)
    }

    fn abs(self) -> Self {
        if self.value() < 0.0 {
            -self
        } else {
            self
        }
    }

    fn scale(self, k: f64) -> Self {
        self * Self::cst(k)
    }
}

impl Scalar for f64 {
    #[inline]
    fn cst(value: f64) -> Self {
        value
    }
    #[inline]
    fn value(&self) -> f64 {
        *self
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
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
    fn ln_1p(self) -> Self {
        f64::ln_1p(self)
    }
    #[inline]
    fn atan2(self, x: Self) -> Self {
        f64::atan2(self, x)
    }
    #[inline]
    fn abs(self) -> Self {
        f64::abs(self)
    }
    #[inline]
    fn scale(self, k: f64) -> Self {
        self * k
    }
}

/// Value plus gradient with respect to a fixed set of variables.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub d: [f64; MAX_VARS],
}

impl Jet {
    #[inline]
    pub const fn constant(v: f64) -> Self {
        Self { v, d: [0.0; MAX_VARS] }
    }

    /// Independent variable number `index`.
    #[inline]
    pub fn variable(v: f64, index: usize) -> Self {
        let mut d = [0.0; MAX_VARS];
        d[index] = 1.0;
        Self { v, d }
    }

    /// Seeds one jet per entry of `values`.
    pub fn variables(values: &[f64]) -> Vec<Jet> {
        assert!(values.len() <= MAX_VARS, "too many differentiated variables");
        values.iter().enumerate().map(|(i, &v)| Jet::variable(v, i)).collect()
    }

    /// Chain rule for a unary function with value `v` and derivative `dv`.
    #[inline]
    fn chain(self, v: f64, dv: f64) -> Self {
        let mut d = self.d;
        for x in &mut d {
            *x *= dv;
        }
        Self { v, d }
    }
}

impl Add for Jet {
    type Output = Jet;
    #[inline]
    fn add(mut self, rhs: Jet) -> Jet {
        self.v += rhs.v;
        for (a, b) in self.d.iter_mut().zip(rhs.d) {
            *a += b;
        }
        self
    }
}

impl AddAssign for Jet {
    #[inline]
    fn add_assign(&mut self, rhs: Jet) {
        *self = *self + rhs;
    }
}

impl Sub for Jet {
    type Output = Jet;
    #[inline]
    fn sub(mut self, rhs: Jet) -> Jet {
        self.v -= rhs.v;
        for (a, b) in self.d.iter_mut().zip(rhs.d) {
            *a -= b;
        }
        self
    }
}

impl Mul for Jet {
    type Output = Jet;
    // product rule
    #[inline]
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn mul(self, rhs: Jet) -> Jet {
        let d = std::array::from_fn(|i| self.d[i] * rhs.v + self.v * rhs.d[i]);
        Jet { v: self.v * rhs.v, d }
    }
}

impl Div for Jet {
    type Output = Jet;
    #[inline]
    fn div(self, rhs: Jet) -> Jet {
        let inv = 1.0 / rhs.v;
        let v = self.v * inv;
        let d = std::array::from_fn(|i| (self.d[i] - v * rhs.d[i]) * inv);
        Jet { v, d }
    }
}

impl Neg for Jet {
    type Output = Jet;
    #[inline]
    fn neg(self) -> Jet {
        self.chain(-self.v, -1.0)
    }
}

impl Scalar for Jet {
    #[inline]
    fn cst(value: f64) -> Self {
        Jet::constant(value)
    }
    #[inline]
    fn value(&self) -> f64 {
        self.v
    }
    #[inline]
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s)
    }
    #[inline]
    fn sin(self) -> Self {
        self.chain(self.v.sin(), self.v.cos())
    }
    #[inline]
    fn cos(self) -> Self {
        self.chain(self.v.cos(), -self.v.sin())
    }
    #[inline]
    fn ln_1p(self) -> Self {
        self.chain(self.v.ln_1p(), 1.0 / (1.0 + self.v))
    }
    #[inline]
    fn atan2(self, x: Self) -> Self {
        // d atan2(y, x) = (x dy - y dx) / (x^2 + y^2)
        let r2 = self.v * self.v + x.v * x.v;
        let d = std::array::from_fn(|i| (x.v * self.d[i] - self.v * x.d[i]) / r2);
        Jet { v: self.v.atan2(x.v), d }
    }
    #[inline]
    fn scale(self, k: f64) -> Self {
        self.chain(self.v * k, k)
    }
}
