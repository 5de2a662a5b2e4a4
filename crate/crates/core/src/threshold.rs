//! The inner maturation ODE and the implicitly defined delay.
//!
//! Maturity starts at the upper threshold `x_high` and is driven down to the
//! lower threshold `x_low` by a strictly positive speed field; the delay is
//! the travel time. Because the speed is positive the integrated ODE is
//!
//! ```text
//! y'(s) = -g(y(s), psi(-s)),    y(0) = x_high,
//! ```
//!
//! and `tau(psi)` is the first `s` with `y(s) = x_low`. With the speed pinned
//! to `[speed_min, speed_max]`, the delay is bracketed by
//! `[(x_high - x_low)/speed_max, (x_high - x_low)/speed_min]`, a subset of
//! `(0, h)` for `h = radius / speed_max`.

use crate::dense::{locate, CubicSeg};
use crate::error::{Error, Result};
use crate::funcs::SpeedField;
use crate::history::History;
use serde::{Serialize, Serializer};

/// Default tolerance for locating the threshold crossing time.
pub const DEFAULT_ROOT_TOL: f64 = 1e-12;

/// The maturation speed field together with its validity constants.
#[derive(Clone, Debug)]
pub struct MaturationField {
    x_low: f64,
    x_high: f64,
    radius: f64,
    speed_max: f64,
    speed_min: f64,
    speed: SpeedField,
}

impl MaturationField {
    /// Basic sanity is enforced here (`x_low < x_high`, `0 < speed_min <
    /// speed_max`, `radius > 0`); the grid conditions, including the
    /// threshold-gap bound, are diagnosed by [`MaturationField::validate`].
    pub fn new(
        x_low: f64,
        x_high: f64,
        radius: f64,
        speed_max: f64,
        speed_min: f64,
        speed: SpeedField,
    ) -> Result<Self> {
        if !(x_low.is_finite() && x_high.is_finite() && x_low < x_high) {
            return Err(Error::InvalidParameter(format!(
                "thresholds must satisfy x_low < x_high, got {x_low}, {x_high}"
            )));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        if !(speed_min.is_finite() && speed_max.is_finite() && 0.0 < speed_min && speed_min < speed_max)
        {
            return Err(Error::InvalidParameter(format!(
                "speed bounds must satisfy 0 < speed_min < speed_max, got {speed_min}, {speed_max}"
            )));
        }
        Ok(MaturationField {
            x_low,
            x_high,
            radius,
            speed_max,
            speed_min,
            speed,
        })
    }

    pub fn x_low(&self) -> f64 {
        self.x_low
    }

    pub fn x_high(&self) -> f64 {
        self.x_high
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn speed_max(&self) -> f64 {
        self.speed_max
    }

    pub fn speed_min(&self) -> f64 {
        self.speed_min
    }

    pub fn speed(&self) -> &SpeedField {
        &self.speed
    }

    /// History length `h = radius / speed_max`.
    pub fn history_length(&self) -> f64 {
        self.radius / self.speed_max
    }

    /// The delay bracket `((x_high-x_low)/speed_max, (x_high-x_low)/speed_min)`.
    pub fn tau_bounds(&self) -> (f64, f64) {
        let gap = self.x_high - self.x_low;
        (gap / self.speed_max, gap / self.speed_min)
    }

    pub fn g(&self, y: f64, z: f64) -> f64 {
        self.speed.g(y, z)
    }

    pub fn d1g(&self, y: f64, z: f64) -> f64 {
        self.speed.d1g(y, z)
    }

    /// Grid diagnostics for the speed-field conditions; nothing is enforced,
    /// every condition reports a margin and worst witness.
    pub fn validate(&self, grid: &GridSpec) -> FieldDiagnostics {
        let ys: Vec<f64> = (0..grid.y_points)
            .map(|i| {
                self.x_high - self.radius
                    + 2.0 * self.radius * i as f64 / (grid.y_points - 1) as f64
            })
            .collect();
        let zs: Vec<f64> = (0..grid.z_points)
            .map(|i| {
                let frac = i as f64 / (grid.z_points - 1) as f64;
                frac * frac * grid.z_max
            })
            .collect();

        // Worst finite-difference quotient in z (local Lipschitz estimate).
        let mut z_quot = 0.0_f64;
        let mut z_witness = (ys[0], zs[0]);
        // Range margin: min(g - speed_min, speed_max - g).
        let mut range_margin = f64::INFINITY;
        let mut range_witness = (ys[0], zs[0]);
        // Derivative bound margin: speed_max/radius - |d1g|.
        let deriv_cap = self.speed_max / self.radius;
        let mut deriv_worst = 0.0_f64;
        let mut deriv_witness = (ys[0], zs[0]);
        // Analytic-derivative consistency: relative deviation from centered
        // finite differences.
        let fd_step = 1e-4 * self.radius;
        let mut fd_worst = 0.0_f64;
        let mut fd_witness = (ys[0], zs[0]);

        for &y in &ys {
            let mut prev: Option<(f64, f64)> = None;
            for &z in &zs {
                let g = self.g(y, z);
                if let Some((pz, pg)) = prev {
                    if z > pz {
                        let q = ((g - pg) / (z - pz)).abs();
                        if !(q <= z_quot) {
                            z_quot = q;
                            z_witness = (y, z);
                        }
                    }
                }
                prev = Some((z, g));

                let margin = (g - self.speed_min).min(self.speed_max - g);
                if margin < range_margin {
                    range_margin = margin;
                    range_witness = (y, z);
                }

                let d1 = self.d1g(y, z).abs();
                if d1 > deriv_worst {
                    deriv_worst = d1;
                    deriv_witness = (y, z);
                }

                let fd = (self.g(y + fd_step, z) - self.g(y - fd_step, z)) / (2.0 * fd_step);
                let dev = (self.d1g(y, z) - fd).abs() / (1.0 + self.d1g(y, z).abs());
                if dev > fd_worst {
                    fd_worst = dev;
                    fd_witness = (y, z);
                }
            }
        }

        let gap = self.x_high - self.x_low;
        let gap_cap = self.radius / self.speed_max * self.speed_min;
        let grid_points = grid.y_points * grid.z_points;

        FieldDiagnostics {
            z_lipschitz: FieldCheck {
                name: "finite z-difference quotients bounded",
                pass: z_quot.is_finite(),
                observed: z_quot,
                bound: f64::INFINITY,
                witness: z_witness,
            },
            deriv_bound: FieldCheck {
                name: "|d g/d y| < speed_max / radius",
                pass: deriv_worst < deriv_cap,
                observed: deriv_worst,
                bound: deriv_cap,
                witness: deriv_witness,
            },
            range: FieldCheck {
                name: "speed_min <= g <= speed_max",
                pass: range_margin >= -1e-12,
                observed: range_margin,
                bound: 0.0,
                witness: range_witness,
            },
            gap: FieldCheck {
                name: "0 < x_high - x_low < radius * speed_min / speed_max",
                pass: gap > 0.0 && gap < gap_cap,
                observed: gap,
                bound: gap_cap,
                witness: (self.x_low, self.x_high),
            },
            deriv_consistency: FieldCheck {
                name: "analytic d g/d y matches centered differences",
                pass: fd_worst <= 1e-6,
                observed: fd_worst,
                bound: 1e-6,
                witness: fd_witness,
            },
            grid_points,
            z_max: grid.z_max,
        }
    }
}

/// Validation grid: `y` linear over the ball, `z` quadratically clustered
/// near zero up to `z_max`. The field conditions hold on all of `z >= 0` but
/// can only be sampled on a finite window; the window is recorded.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GridSpec {
    pub y_points: usize,
    pub z_points: usize,
    pub z_max: f64,
}

impl GridSpec {
    pub fn with_z_max(z_max: f64) -> Self {
        GridSpec {
            y_points: 65,
            z_points: 129,
            z_max,
        }
    }

    /// Window that generously covers the inhibitor values of a history.
    pub fn covering(psi: &History) -> Self {
        GridSpec::with_z_max(10.0 * psi.max_value().max(0.0) + 10.0)
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::with_z_max(100.0)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FieldCheck {
    pub name: &'static str,
    pub pass: bool,
    pub observed: f64,
    pub bound: f64,
    pub witness: (f64, f64),
}

#[derive(Clone, Debug, Serialize)]
pub struct FieldDiagnostics {
    pub z_lipschitz: FieldCheck,
    pub deriv_bound: FieldCheck,
    pub range: FieldCheck,
    pub gap: FieldCheck,
    pub deriv_consistency: FieldCheck,
    pub grid_points: usize,
    pub z_max: f64,
}

impl FieldDiagnostics {
    pub fn all_pass(&self) -> bool {
        self.z_lipschitz.pass
            && self.deriv_bound.pass
            && self.range.pass
            && self.gap.pass
            && self.deriv_consistency.pass
    }

    pub fn checks(&self) -> [&FieldCheck; 5] {
        [
            &self.z_lipschitz,
            &self.deriv_bound,
            &self.range,
            &self.gap,
            &self.deriv_consistency,
        ]
    }
}

/// Read access to the inhibitor history `psi` on `[-h, 0]`; implemented by
/// [`History`] and by the integrator's running solution segments.
pub trait PsiSource {
    fn psi(&self, s: f64) -> f64;

    /// Radii `r` in `(0, horizon)` at which `s -> psi(-s)` loses smoothness
    /// (interpolation nodes, representation junctions), in increasing order.
    /// The maturation solver aligns its steps with these points; integrating
    /// across a kink would cost the one-step method two orders locally.
    fn kink_radii(&self, horizon: f64) -> Vec<f64> {
        let _ = horizon;
        Vec::new()
    }
}

impl PsiSource for History {
    fn psi(&self, s: f64) -> f64 {
        self.value_at(s.clamp(-self.h(), 0.0), 0)
            .expect("clamped point is inside the domain")
    }

    fn kink_radii(&self, horizon: f64) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .kink_times()
            .into_iter()
            .map(|t| -t)
            .filter(|&r| r > 0.0 && r < horizon)
            .collect();
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out
    }
}

/// Dense maturation path on `[0, tau]`.
#[derive(Clone, Debug)]
pub struct YPath {
    segs: Vec<CubicSeg>,
    tau: f64,
}

impl YPath {
    pub fn eval(&self, s: f64) -> f64 {
        let s = s.clamp(0.0, self.tau);
        self.segs[locate(&self.segs, s)].eval(s)
    }

    /// `(s, y)` nodes of the dense representation, ending at `tau`.
    pub fn nodes(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = self
            .segs
            .iter()
            .take_while(|seg| seg.t0 < self.tau)
            .map(|seg| (seg.t0, seg.y0))
            .collect();
        out.push((self.tau, self.eval(self.tau)));
        out
    }

    pub fn min_value(&self) -> f64 {
        self.nodes().iter().fold(f64::INFINITY, |m, &(_, y)| m.min(y))
    }

    pub fn max_value(&self) -> f64 {
        self.nodes()
            .iter()
            .fold(f64::NEG_INFINITY, |m, &(_, y)| m.max(y))
    }
}

fn serialize_y_nodes<S: Serializer>(path: &YPath, ser: S) -> std::result::Result<S::Ok, S::Error> {
    serde::Serialize::serialize(&path.nodes(), ser)
}

/// Result of one delay computation.
#[derive(Clone, Debug, Serialize)]
pub struct ThresholdResult {
    /// The delay: first time the maturation path hits `x_low`.
    pub tau: f64,
    /// `|y(tau) - x_low|` on the dense path.
    pub residual: f64,
    /// Value at `tau` of the co-integrated accumulator (zero when no
    /// integrand was supplied).
    pub exponent_integral: f64,
    #[serde(rename = "y_nodes", serialize_with = "serialize_y_nodes")]
    pub y_path: YPath,
}

/// Default inner step `min(h, tau_lower) / 64`.
pub fn default_inner_step(field: &MaturationField) -> f64 {
    field.history_length().min(field.tau_bounds().0) / 64.0
}

/// Solves the maturation ODE for a piecewise-linear history with the default
/// inner step. `integrand(y, z)` is co-integrated as an augmented state and
/// evaluated at `tau` (used for the exponent of the delayed functional).
pub fn solve_maturation(
    field: &MaturationField,
    psi: &History,
    integrand: Option<&dyn Fn(f64, f64) -> f64>,
) -> Result<ThresholdResult> {
    solve_maturation_src(field, psi, integrand, default_inner_step(field), DEFAULT_ROOT_TOL)
}

/// As [`solve_maturation`] with an explicit inner step (step-halved reference
/// runs for convergence oracles).
pub fn solve_maturation_with_step(
    field: &MaturationField,
    psi: &History,
    integrand: Option<&dyn Fn(f64, f64) -> f64>,
    inner_step: f64,
) -> Result<ThresholdResult> {
    solve_maturation_src(field, psi, integrand, inner_step, DEFAULT_ROOT_TOL)
}

/// Fixed-step fourth-order integration of `(y, accumulator)` with cubic
/// dense output; the crossing is located by bisection on the dense cubic.
pub fn solve_maturation_src(
    field: &MaturationField,
    psi: &dyn PsiSource,
    integrand: Option<&dyn Fn(f64, f64) -> f64>,
    inner_step: f64,
    root_tol: f64,
) -> Result<ThresholdResult> {
    let horizon = field.history_length();
    if !(inner_step > 0.0 && inner_step.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "inner step must be positive, got {inner_step}"
        )));
    }
    // Uniform base grid landing on the horizon exactly (psi is never queried
    // beyond [-h, 0]), refined by the kink radii of the history so every
    // step integrates a smooth right-hand side.
    let n_steps = (horizon / inner_step).ceil().max(1.0) as usize;
    let base_step = horizon / n_steps as f64;
    let grid = {
        let uniform = (0..=n_steps).map(|k| {
            if k == n_steps {
                horizon
            } else {
                k as f64 * base_step
            }
        });
        let kinks = psi.kink_radii(horizon);
        let tol = 1e-9 * base_step;
        let mut merged = Vec::with_capacity(n_steps + 1 + kinks.len());
        let mut kink_iter = kinks.into_iter().peekable();
        for s in uniform {
            while let Some(&r) = kink_iter.peek() {
                if r < s {
                    merged.push(r);
                    kink_iter.next();
                } else {
                    break;
                }
            }
            merged.push(s);
        }
        merged.dedup_by(|a, b| (*a - *b).abs() <= tol);
        let n = merged.len() - 1;
        merged[0] = 0.0;
        merged[n] = horizon;
        merged
    };

    let acc = |y: f64, z: f64| integrand.map_or(0.0, |f| f(y, z));
    let fy = |s: f64, y: f64| -field.g(y, psi.psi(-s));

    let mut y_segs: Vec<CubicSeg> = Vec::new();
    let mut e_segs: Vec<CubicSeg> = Vec::new();

    let mut y0 = field.x_high();
    let mut e0 = 0.0;
    let mut s0 = 0.0;
    let mut dy0 = fy(0.0, y0);
    let mut de0 = acc(y0, psi.psi(0.0));

    let mut crossing: Option<usize> = None;
    for &s1 in &grid[1..] {
        let dt = s1 - s0;
        let sm = s0 + 0.5 * dt;

        let k1 = dy0;
        let e1 = de0;
        let ya = y0 + 0.5 * dt * k1;
        let k2 = fy(sm, ya);
        let e2 = acc(ya, psi.psi(-sm));
        let yb = y0 + 0.5 * dt * k2;
        let k3 = fy(sm, yb);
        let e3 = acc(yb, psi.psi(-sm));
        let yc = y0 + dt * k3;
        let k4 = fy(s1, yc);
        let e4 = acc(yc, psi.psi(-s1));

        let y1 = y0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        let eint1 = e0 + dt / 6.0 * (e1 + 2.0 * e2 + 2.0 * e3 + e4);
        if !y1.is_finite() {
            return Err(Error::NonFinite { t: s1 });
        }
        let dy1 = fy(s1, y1);
        let de1 = acc(y1, psi.psi(-s1));

        y_segs.push(CubicSeg {
            t0: s0,
            t1: s1,
            y0,
            y1,
            d0: dy0,
            d1: dy1,
        });
        e_segs.push(CubicSeg {
            t0: s0,
            t1: s1,
            y0: e0,
            y1: eint1,
            d0: de0,
            d1: de1,
        });

        if y1 <= field.x_low() {
            crossing = Some(y_segs.len() - 1);
            break;
        }
        y0 = y1;
        e0 = eint1;
        s0 = s1;
        dy0 = dy1;
        de0 = de1;
    }

    let Some(idx) = crossing else {
        return Err(Error::ThresholdNotReached { horizon });
    };

    // Bisection on the dense cubic: value >= x_low at t0, <= at t1.
    let seg = y_segs[idx];
    let target = field.x_low();
    let tau = if seg.y1 == target {
        seg.t1
    } else {
        let (mut lo, mut hi) = (seg.t0, seg.t1);
        for _ in 0..200 {
            if hi - lo <= root_tol {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if seg.eval(mid) >= target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };

    let y_path = YPath {
        segs: y_segs,
        tau,
    };
    let residual = (y_path.eval(tau) - target).abs();
    let exponent_integral = e_segs[locate(&e_segs, tau)].eval(tau);

    // The path must stay inside the validated ball; leaving it signals a
    // violated speed-field condition.
    let (lo_ball, hi_ball) = (field.x_high() - field.radius(), field.x_high() + field.radius());
    let (y_min, y_max) = (y_path.min_value(), y_path.max_value());
    if y_min < lo_ball - 1e-9 || y_max > hi_ball + 1e-9 {
        return Err(Error::Precondition(format!(
            "maturation path left the validated ball: [{y_min}, {y_max}] vs [{lo_ball}, {hi_ball}]"
        )));
    }

    Ok(ThresholdResult {
        tau,
        residual,
        exponent_integral,
        y_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcs::CoefFn;
    use std::sync::Arc;

    fn unit_speed_field() -> MaturationField {
        // g = 1 with thresholds 0.5 apart; bracket demands eps <= 1 <= K.
        MaturationField::new(0.5, 1.0, 1.0, 1.1, 0.9, SpeedField::Constant(1.0)).unwrap()
    }

    #[test]
    fn constant_speed_gives_exact_delay() {
        let field = unit_speed_field();
        let psi = History::constant(field.history_length(), 3.0).unwrap();
        let res = solve_maturation(&field, &psi, None).unwrap();
        assert!((res.tau - 0.5).abs() < 1e-12);
        assert!(res.residual <= 1e-12);
    }

    #[test]
    fn inhibited_speed_with_constant_history() {
        // g = 1/(1+z), psi = 1 -> effective speed 1/2.
        let field = MaturationField::new(
            0.7,
            1.0,
            1.0,
            1.0,
            0.4,
            SpeedField::Custom {
                g: Arc::new(|_, z| 1.0 / (1.0 + z)),
                d1g: Arc::new(|_, _| 0.0),
            },
        )
        .unwrap();
        let psi = History::constant(field.history_length(), 1.0).unwrap();
        let res = solve_maturation(&field, &psi, None).unwrap();
        assert!((res.tau - 2.0 * 0.3).abs() < 1e-10);
    }

    #[test]
    fn tau_bounds_and_constructor_guards() {
        let field = MaturationField::new(0.5, 1.0, 1.0, 2.0, 0.5, SpeedField::Constant(1.0)).unwrap();
        let (lo, hi) = field.tau_bounds();
        assert!((lo - 0.25).abs() < 1e-15);
        assert!((hi - 1.0).abs() < 1e-15);

        // speed_min == speed_max is rejected.
        assert!(
            MaturationField::new(0.5, 1.0, 1.0, 1.0, 1.0, SpeedField::Constant(1.0)).is_err()
        );
    }

    #[test]
    fn exponent_accumulator_integrates_supplied_integrand() {
        // With g = 1 the path is y(s) = 1 - s, so integrating z -> 1 gives
        // tau and integrating y gives tau - tau^2/2.
        let field = unit_speed_field();
        let psi = History::constant(field.history_length(), 0.0).unwrap();
        let ones = solve_maturation(&field, &psi, Some(&|_, _| 1.0)).unwrap();
        assert!((ones.exponent_integral - ones.tau).abs() < 1e-12);
        let ys = solve_maturation(&field, &psi, Some(&|y, _| y)).unwrap();
        let expect = ys.tau - ys.tau * ys.tau / 2.0;
        assert!((ys.exponent_integral - expect).abs() < 1e-12);
    }

    #[test]
    fn validate_reports_gap_violation() {
        // Gap 0.5 with cap speed_min * radius / speed_max = 0.4 must fail.
        let field = MaturationField::new(0.5, 1.0, 1.0, 1.0, 0.4, SpeedField::Constant(0.7)).unwrap();
        let diag = field.validate(&GridSpec::default());
        assert!(!diag.gap.pass);
        // With eps = 0.9 the same gap passes.
        let field = MaturationField::new(0.5, 1.0, 1.0, 1.0, 0.9, SpeedField::Constant(0.95)).unwrap();
        let diag = field.validate(&GridSpec::default());
        assert!(diag.gap.pass, "gap 0.5 < 0.9: {:?}", diag.gap);
    }

    #[test]
    fn validate_flags_derivative_violation() {
        // d1g = 2 K / radius somewhere.
        let field = MaturationField::new(
            0.8,
            1.0,
            0.5,
            1.0,
            0.5,
            SpeedField::Custom {
                g: Arc::new(|y, _| 0.75 + 0.0 * y),
                d1g: Arc::new(|_, _| 4.0),
            },
        )
        .unwrap();
        let diag = field.validate(&GridSpec::default());
        assert!(!diag.deriv_bound.pass);
        assert_eq!(diag.deriv_bound.observed, 4.0);
        // The fake derivative also fails the consistency check.
        assert!(!diag.deriv_consistency.pass);
    }

    #[test]
    fn validate_passes_for_exponential_family() {
        let field = MaturationField::new(
            0.8,
            1.0,
            0.5,
            1.0,
            0.5,
            SpeedField::Exponential {
                floor: 0.55,
                gamma: CoefFn::Affine {
                    intercept: 0.3,
                    slope: 0.1,
                },
            },
        )
        .unwrap();
        let diag = field.validate(&GridSpec::default());
        assert!(diag.all_pass(), "{diag:?}");
    }

    #[test]
    fn random_histories_stay_in_bracket() {
        let field = MaturationField::new(
            0.8,
            1.0,
            0.5,
            1.0,
            0.5,
            SpeedField::Exponential {
                floor: 0.55,
                gamma: CoefFn::Constant(0.4),
            },
        )
        .unwrap();
        let (lo, hi) = field.tau_bounds();
        let h = field.history_length();
        for seed in 0..60 {
            let psi = History::random_lipschitz(seed, h, 1, 2.0, 4.0, 9).unwrap();
            let res = solve_maturation(&field, &psi, None).unwrap();
            assert!(res.tau >= lo - 1e-12 && res.tau <= hi + 1e-12, "tau {}", res.tau);
            assert!(res.residual <= 1e-9);
            assert!(res.y_path.min_value() >= field.x_high() - field.radius() - 1e-12);
            assert!(res.y_path.max_value() <= field.x_high() + field.radius() + 1e-12);

            // Step-halved reference agreement.
            let fine = solve_maturation_with_step(
                &field,
                &psi,
                None,
                default_inner_step(&field) / 2.0,
            )
            .unwrap();
            assert!((res.tau - fine.tau).abs() / fine.tau <= 1e-8);
        }
    }

    #[test]
    fn monotone_inhibition_lengthens_delay() {
        // Diagnostic: for a speed decreasing in z, pointwise-larger psi must
        // not shorten the delay. Reported as a sanity check.
        let field = MaturationField::new(
            0.8,
            1.0,
            0.5,
            1.0,
            0.5,
            SpeedField::Exponential {
                floor: 0.55,
                gamma: CoefFn::Constant(0.4),
            },
        )
        .unwrap();
        let h = field.history_length();
        let mut worst: f64 = 0.0;
        for seed in 0..20 {
            let psi = History::random_lipschitz(seed, h, 1, 1.0, 3.0, 7).unwrap();
            let larger = psi.shift_values(0.5);
            let t0 = solve_maturation(&field, &psi, None).unwrap().tau;
            let t1 = solve_maturation(&field, &larger, None).unwrap().tau;
            worst = worst.max(t0 - t1);
            assert!(t1 >= t0 - 1e-12, "tau dropped: {t0} -> {t1}");
        }
        println!("monotone-delay diagnostic, worst decrease: {worst:.3e}");
    }

    #[test]
    fn delay_is_empirically_lipschitz_in_the_history() {
        let field = MaturationField::new(
            0.8,
            1.0,
            0.5,
            1.0,
            0.5,
            SpeedField::Exponential {
                floor: 0.55,
                gamma: CoefFn::Constant(0.4),
            },
        )
        .unwrap();
        let h = field.history_length();
        let base = History::random_lipschitz(11, h, 1, 1.0, 2.0, 9).unwrap();
        let mut max_quotient: f64 = 0.0;
        for seed in 0..40 {
            let bump = History::random_lipschitz_in(seed ^ 0xabcd, h, 1, -0.05, 0.05, 1.0, 9).unwrap();
            let other = crate::retraction::retract(
                &base.add(&bump).unwrap(),
                &crate::retraction::DomainSpec::nonnegative(1),
            )
            .unwrap();
            let dist = base.sup_distance(&other).unwrap();
            if dist < 1e-14 {
                continue;
            }
            let t0 = solve_maturation(&field, &base, None).unwrap().tau;
            let t1 = solve_maturation(&field, &other, None).unwrap().tau;
            max_quotient = max_quotient.max((t0 - t1).abs() / dist);
        }
        assert!(max_quotient.is_finite());
        println!("empirical delay Lipschitz quotient: {max_quotient:.4}");
    }
}
