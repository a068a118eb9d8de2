//! Forward-mode dual numbers for exact first derivatives of smooth formulas.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// `v + d·ε` with `ε² = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual {
    pub v: f64,
    pub d: f64,
}

impl Dual {
    pub const fn new(v: f64, d: f64) -> Self {
        Dual { v, d }
    }
    pub const fn cst(v: f64) -> Self {
        Dual { v, d: 0.0 }
    }
    pub fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        Dual::new(s, 0.5 * self.d / s)
    }
    pub fn powf(self, e: f64) -> Self {
        let p = self.v.powf(e);
        Dual::new(p, e * self.v.powf(e - 1.0) * self.d)
    }
    pub fn ln(self) -> Self {
        Dual::new(self.v.ln(), self.d / self.v)
    }
}

macro_rules! binop {
    ($tr:ident, $f:ident, $body:expr) => {
        impl $tr for Dual {
            type Output = Dual;
            fn $f(self, o: Dual) -> Dual {
                let g: fn(Dual, Dual) -> Dual = $body;
                g(self, o)
            }
        }
        impl $tr<f64> for Dual {
            type Output = Dual;
            fn $f(self, o: f64) -> Dual {
                let g: fn(Dual, Dual) -> Dual = $body;
                g(self, Dual::cst(o))
            }
        }
        impl $tr<Dual> for f64 {
            type Output = Dual;
            fn $f(self, o: Dual) -> Dual {
                let g: fn(Dual, Dual) -> Dual = $body;
                g(Dual::cst(self), o)
            }
        }
    };
}

binop!(Add, add, |a, b| Dual::new(a.v + b.v, a.d + b.d));
binop!(Sub, sub, |a, b| Dual::new(a.v - b.v, a.d - b.d));
binop!(Mul, mul, |a, b| Dual::new(a.v * b.v, a.d * b.v + a.v * b.d));
binop!(Div, div, |a, b| Dual::new(a.v / b.v, (a.d * b.v - a.v * b.d) / (b.v * b.v)));

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual::new(-self.v, -self.d)
    }
}
