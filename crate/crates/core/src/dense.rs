//! Cubic Hermite segments: the dense-output primitive shared by the inner
//! maturation ODE and the outer method-of-steps integrator.

/// One cubic Hermite segment on `[t0, t1]`, matching values and derivatives
/// at both ends.
#[derive(Clone, Copy, Debug)]
pub(crate) struct CubicSeg {
    pub t0: f64,
    pub t1: f64,
    pub y0: f64,
    pub y1: f64,
    pub d0: f64,
    pub d1: f64,
}

impl CubicSeg {
    pub fn eval(&self, t: f64) -> f64 {
        let dt = self.t1 - self.t0;
        let x = (t - self.t0) / dt;
        let x2 = x * x;
        let x3 = x2 * x;
        (2.0 * x3 - 3.0 * x2 + 1.0) * self.y0
            + (x3 - 2.0 * x2 + x) * dt * self.d0
            + (-2.0 * x3 + 3.0 * x2) * self.y1
            + (x3 - x2) * dt * self.d1
    }

    pub fn deriv(&self, t: f64) -> f64 {
        let (a, b, c) = self.deriv_coeffs();
        let x = (t - self.t0) / (self.t1 - self.t0);
        (a * x + b) * x + c
    }

    /// Derivative in the normalized variable is the quadratic
    /// `a x^2 + b x + c`.
    fn deriv_coeffs(&self) -> (f64, f64, f64) {
        let dt = self.t1 - self.t0;
        let slope = 6.0 * (self.y0 - self.y1) / dt;
        let a = slope + 3.0 * (self.d0 + self.d1);
        let b = -slope - 4.0 * self.d0 - 2.0 * self.d1;
        let c = self.d0;
        (a, b, c)
    }

    /// Exact maximum of `|derivative|` over `[lo, hi]` (clipped to the
    /// segment): a quadratic attains extrema at the ends or its vertex.
    pub fn max_abs_deriv(&self, lo: f64, hi: f64) -> f64 {
        let lo = lo.max(self.t0);
        let hi = hi.min(self.t1);
        if lo > hi {
            return 0.0;
        }
        let dt = self.t1 - self.t0;
        let (a, b, c) = self.deriv_coeffs();
        let xl = (lo - self.t0) / dt;
        let xh = (hi - self.t0) / dt;
        let q = |x: f64| ((a * x + b) * x + c).abs();
        let mut worst = q(xl).max(q(xh));
        if a != 0.0 {
            let xv = -b / (2.0 * a);
            if xv > xl && xv < xh {
                worst = worst.max(q(xv));
            }
        }
        worst
    }
}

impl CubicSeg {
    /// Exact value range over `[lo, hi]` (clipped to the segment): cubic
    /// extrema sit at the ends or at roots of the derivative quadratic.
    pub fn value_range(&self, lo: f64, hi: f64) -> (f64, f64) {
        let lo = lo.max(self.t0);
        let hi = hi.min(self.t1);
        if lo > hi {
            return (f64::INFINITY, f64::NEG_INFINITY);
        }
        let dt = self.t1 - self.t0;
        let (a, b, c) = self.deriv_coeffs();
        let xl = (lo - self.t0) / dt;
        let xh = (hi - self.t0) / dt;
        let mut min = self.eval(lo).min(self.eval(hi));
        let mut max = self.eval(lo).max(self.eval(hi));
        let mut consider = |x: f64| {
            if x > xl && x < xh {
                let v = self.eval(self.t0 + x * dt);
                min = min.min(v);
                max = max.max(v);
            }
        };
        if a.abs() > 0.0 {
            let disc = b * b - 4.0 * a * c;
            if disc >= 0.0 {
                let root = disc.sqrt();
                consider((-b - root) / (2.0 * a));
                consider((-b + root) / (2.0 * a));
            }
        } else if b.abs() > 0.0 {
            consider(-c / b);
        }
        (min, max)
    }
}

/// Binary search for the segment containing `t` in a contiguous list.
pub(crate) fn locate(segs: &[CubicSeg], t: f64) -> usize {
    debug_assert!(!segs.is_empty());
    let idx = segs.partition_point(|s| s.t1 < t);
    idx.min(segs.len() - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_cubic_exactly() {
        // y = t^3 - 2 t on [1, 3]
        let f = |t: f64| t * t * t - 2.0 * t;
        let d = |t: f64| 3.0 * t * t - 2.0;
        let seg = CubicSeg {
            t0: 1.0,
            t1: 3.0,
            y0: f(1.0),
            y1: f(3.0),
            d0: d(1.0),
            d1: d(3.0),
        };
        for i in 0..=20 {
            let t = 1.0 + 2.0 * i as f64 / 20.0;
            assert!((seg.eval(t) - f(t)).abs() < 1e-12);
            assert!((seg.deriv(t) - d(t)).abs() < 1e-11);
        }
        // max |y'| on [1, 3] is at t = 3.
        assert!((seg.max_abs_deriv(1.0, 3.0) - d(3.0)).abs() < 1e-10);
        // interior vertex: |y'| min at t = 0 is outside; check sub-range max.
        assert!((seg.max_abs_deriv(1.0, 2.0) - d(2.0)).abs() < 1e-10);
    }
}
