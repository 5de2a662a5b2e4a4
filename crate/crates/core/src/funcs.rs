//! Scalar ingredient functions: coefficient functions of the maturity
//! variable and the maturation speed field `g(y, z)` with its analytic
//! partial derivative in `y`.

use std::fmt;
use std::sync::Arc;

/// A coefficient function of maturity `y` with analytic derivative.
#[derive(Clone, Debug, PartialEq)]
pub enum CoefFn {
    Constant(f64),
    /// `intercept + slope * y`
    Affine { intercept: f64, slope: f64 },
}

impl CoefFn {
    pub fn eval(&self, y: f64) -> f64 {
        match *self {
            CoefFn::Constant(c) => c,
            CoefFn::Affine { intercept, slope } => intercept + slope * y,
        }
    }

    pub fn deriv(&self, _y: f64) -> f64 {
        match *self {
            CoefFn::Constant(_) => 0.0,
            CoefFn::Affine { slope, .. } => slope,
        }
    }

    /// Lipschitz constant (global).
    pub fn lip(&self) -> f64 {
        match *self {
            CoefFn::Constant(_) => 0.0,
            CoefFn::Affine { slope, .. } => slope.abs(),
        }
    }

    /// Minimum on `[lo, hi]`; attained at an endpoint for affine functions.
    pub fn min_on(&self, lo: f64, hi: f64) -> f64 {
        self.eval(lo).min(self.eval(hi))
    }

    pub fn max_on(&self, lo: f64, hi: f64) -> f64 {
        self.eval(lo).max(self.eval(hi))
    }
}

type DynField = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// The maturation speed field `g(y, z)` (`y` maturity, `z` inhibitor level)
/// together with its analytic partial derivative `D1 g = dg/dy`.
#[derive(Clone)]
pub enum SpeedField {
    /// `g(y, z) = 2 [1 - a(y) / (1 + k z)] p(y)`: progenitor division rate
    /// `p` with self-renewal fraction `a` inhibited by the mature population.
    Division { a: CoefFn, p: CoefFn, k: f64 },
    /// `g(y, z) = floor + e^{-z} gamma(y)`: positive floor with an
    /// exponentially suppressed maturity profile.
    Exponential { floor: f64, gamma: CoefFn },
    /// Constant speed; the maturity variable then reads as an age.
    Constant(f64),
    /// Caller-supplied field with its partial derivative in `y`.
    Custom { g: DynField, d1g: DynField },
}

impl SpeedField {
    pub fn g(&self, y: f64, z: f64) -> f64 {
        match self {
            SpeedField::Division { a, p, k } => {
                2.0 * (1.0 - a.eval(y) / (1.0 + k * z)) * p.eval(y)
            }
            SpeedField::Exponential { floor, gamma } => floor + (-z).exp() * gamma.eval(y),
            SpeedField::Constant(c) => *c,
            SpeedField::Custom { g, .. } => g(y, z),
        }
    }

    pub fn d1g(&self, y: f64, z: f64) -> f64 {
        match self {
            SpeedField::Division { a, p, k } => {
                let inhib = 1.0 + k * z;
                2.0 * (-a.deriv(y) / inhib) * p.eval(y)
                    + 2.0 * (1.0 - a.eval(y) / inhib) * p.deriv(y)
            }
            SpeedField::Exponential { gamma, .. } => (-z).exp() * gamma.deriv(y),
            SpeedField::Constant(_) => 0.0,
            SpeedField::Custom { d1g, .. } => d1g(y, z),
        }
    }
}

impl fmt::Debug for SpeedField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpeedField::Division { a, p, k } => f
                .debug_struct("Division")
                .field("a", a)
                .field("p", p)
                .field("k", k)
                .finish(),
            SpeedField::Exponential { floor, gamma } => f
                .debug_struct("Exponential")
                .field("floor", floor)
                .field("gamma", gamma)
                .finish(),
            SpeedField::Constant(c) => f.debug_tuple("Constant").field(c).finish(),
            SpeedField::Custom { .. } => f.write_str("Custom"),
        }
    }
}
