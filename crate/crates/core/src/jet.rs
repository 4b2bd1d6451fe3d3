//! Truncated Taylor series of order four.
//!
//! A [`Jet`] stores `f(x0 + h) = c0 + c1 h + c2 h^2 + c3 h^3 + c4 h^4 + O(h^5)`.
//! Radial Kähler potentials need derivatives up to order four in `s = |z|^2`
//! to evaluate scalar curvature, and composing jets keeps those derivatives
//! exact up to rounding.

use std::ops::{Add, Mul, Neg, Sub};

pub const ORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet(pub [f64; ORDER + 1]);

const FACT: [f64; ORDER + 1] = [1.0, 1.0, 2.0, 6.0, 24.0];

impl Jet {
    pub fn constant(c: f64) -> Self {
        Jet([c, 0.0, 0.0, 0.0, 0.0])
    }

    /// The identity jet `x` expanded at `x0`.
    pub fn variable(x0: f64) -> Self {
        Jet([x0, 1.0, 0.0, 0.0, 0.0])
    }

    /// Builds a jet from derivative values `[f, f', f'', f''', f'''']`.
    pub fn from_derivatives(d: [f64; ORDER + 1]) -> Self {
        let mut c = [0.0; ORDER + 1];
        for k in 0..=ORDER {
            c[k] = d[k] / FACT[k];
        }
        Jet(c)
    }

    pub fn value(&self) -> f64 {
        self.0[0]
    }

    /// k-th derivative.
    pub fn derivative(&self, k: usize) -> f64 {
        self.0[k] * FACT[k]
    }

    pub fn derivatives(&self) -> [f64; ORDER + 1] {
        let mut d = [0.0; ORDER + 1];
        for k in 0..=ORDER {
            d[k] = self.derivative(k);
        }
        d
    }

    pub fn scale(&self, a: f64) -> Self {
        let mut c = self.0;
        c.iter_mut().for_each(|x| *x *= a);
        Jet(c)
    }

    /// Composes an outer series (given as Taylor coefficients about
    /// `self.value()`) with `self`.
    pub fn compose(&self, outer: &Jet) -> Jet {
        let mut delta = *self;
        delta.0[0] = 0.0;
        let mut result = Jet::constant(outer.0[0]);
        let mut power = Jet::constant(1.0);
        for k in 1..=ORDER {
            power = power * delta;
            result = result + power.scale(outer.0[k]);
        }
        result
    }

    /// Applies a scalar function given its derivatives at `self.value()`.
    pub fn apply(&self, derivs: [f64; ORDER + 1]) -> Jet {
        self.compose(&Jet::from_derivatives(derivs))
    }

    pub fn exp(&self) -> Jet {
        let e = self.0[0].exp();
        self.apply([e; ORDER + 1])
    }

    pub fn ln(&self) -> Jet {
        let x = self.0[0];
        self.apply([x.ln(), 1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x), -6.0 / (x * x * x * x)])
    }

    /// `ln(1 + self)`, accurate for small values.
    pub fn ln_1p(&self) -> Jet {
        let x = self.0[0];
        let y = 1.0 + x;
        self.apply([x.ln_1p(), 1.0 / y, -1.0 / (y * y), 2.0 / (y * y * y), -6.0 / (y * y * y * y)])
    }

    pub fn powf(&self, p: f64) -> Jet {
        let x = self.0[0];
        let mut d = [0.0; ORDER + 1];
        let mut coef = 1.0;
        for (k, dk) in d.iter_mut().enumerate() {
            *dk = coef * x.powf(p - k as f64);
            coef *= p - k as f64;
        }
        self.apply(d)
    }

    pub fn sqrt(&self) -> Jet {
        self.powf(0.5)
    }

    pub fn recip(&self) -> Jet {
        self.powf(-1.0)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        let mut c = self.0;
        for k in 0..=ORDER {
            c[k] += rhs.0[k];
        }
        Jet(c)
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        self + (-rhs)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let mut c = [0.0; ORDER + 1];
        for i in 0..=ORDER {
            for j in 0..=(ORDER - i) {
                c[i + j] += self.0[i] * rhs.0[j];
            }
        }
        Jet(c)
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(self, rhs: f64) -> Jet {
        let mut c = self.0;
        c[0] += rhs;
        Jet(c)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}
