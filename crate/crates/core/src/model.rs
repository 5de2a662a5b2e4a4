//! The cell-model ingredients, the delayed renewal functional `j`, the full
//! right-hand side, and the derived constants `qbar` (growth-rate supremum)
//! and `kj` (the functional's Lipschitz-type bound).
//!
//! The two-component system is
//!
//! ```text
//! w'(t) = q(v(t)) w(t)
//! v'(t) = -mu v(t) + j(w_t, v_t)
//! ```
//!
//! with
//!
//! ```text
//! j(phi, psi) = gamma(psi(-tau)) / g(x_low, psi(-tau))
//!               * g(x_high, psi(0)) * phi(-tau)
//!               * exp( int_0^tau [d - d1g](y(s), psi(-s)) ds ),
//! ```
//!
//! `tau = tau(psi)` the implicit threshold delay. The functional is
//! nonnegative and satisfies `j <= kj * phi(-tau) <= kj * ||phi||` with
//!
//! ```text
//! kj = speed_max/speed_min * exp((speed_max/radius + sup|d|) h) * sup gamma.
//! ```

use crate::error::{Error, Result};
use crate::funcs::CoefFn;
use crate::history::{History, HistoryPair};
use crate::invariance::BoundParams;
use crate::retraction::{retract, DomainSpec};
use crate::threshold::{self, MaturationField, PsiSource};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Division, renewal and death parameters of the cell model.
///
/// Renewal side: self-renewal fraction `a_w / (1 + k_a z)` and division rate
/// `p_w / (1 + k_p z)` yield the net growth rate
/// `q(z) = [2 s_w(z) - 1] d_w(z) - mu_w` and the flux into the progenitor
/// compartment `gamma(z) = 2 [1 - s_w(z)] d_w(z)`. Death side:
/// `d(y, z) = alpha(y) / (1 + k_d z) - mu_u(y)`.
#[derive(Clone, Debug)]
pub struct IngredientSet {
    pub a_w: f64,
    pub p_w: f64,
    pub mu_w: f64,
    pub k_a: f64,
    pub k_p: f64,
    pub k_d: f64,
    pub alpha: CoefFn,
    pub mu_u: CoefFn,
}

impl IngredientSet {
    pub fn new(
        a_w: f64,
        p_w: f64,
        mu_w: f64,
        k_a: f64,
        k_p: f64,
        k_d: f64,
        alpha: CoefFn,
        mu_u: CoefFn,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&a_w) {
            return Err(Error::InvalidParameter(format!(
                "a_w must lie in [0, 1], got {a_w}"
            )));
        }
        for (name, v) in [("p_w", p_w), ("mu_w", mu_w), ("k_a", k_a), ("k_p", k_p), ("k_d", k_d)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be nonnegative, got {v}"
                )));
            }
        }
        Ok(IngredientSet {
            a_w,
            p_w,
            mu_w,
            k_a,
            k_p,
            k_d,
            alpha,
            mu_u,
        })
    }

    fn s_w(&self, z: f64) -> f64 {
        self.a_w / (1.0 + self.k_a * z)
    }

    fn d_w(&self, z: f64) -> f64 {
        self.p_w / (1.0 + self.k_p * z)
    }

    /// Net stem cell growth rate `q(z)`.
    pub fn q(&self, z: f64) -> f64 {
        (2.0 * self.s_w(z) - 1.0) * self.d_w(z) - self.mu_w
    }

    /// Progenitor influx rate `gamma(z)`.
    pub fn gamma(&self, z: f64) -> f64 {
        2.0 * (1.0 - self.s_w(z)) * self.d_w(z)
    }

    /// Death rate `d(y, z)` without the maturity-range guard.
    fn d_raw(&self, y: f64, z: f64) -> f64 {
        self.alpha.eval(y) / (1.0 + self.k_d * z) - self.mu_u.eval(y)
    }
}

/// Full parameter set with derived constants, immutable after construction.
#[derive(Clone, Debug)]
pub struct ModelParams {
    ingredients: IngredientSet,
    field: MaturationField,
    mu: f64,
    z_cap: f64,
    qbar: f64,
    sup_gamma: f64,
    sup_abs_d: f64,
    kj: f64,
}

impl ModelParams {
    pub fn new(ingredients: IngredientSet, field: MaturationField, mu: f64) -> Result<Self> {
        ModelParams::with_z_cap(ingredients, field, mu, 1e3)
    }

    /// `z_cap` is the window on which the suprema of `q`, `gamma` and `|d|`
    /// are maximized numerically (grid scan plus golden-section refinement
    /// plus the analytic `z -> inf` tail); the value is recorded in run
    /// metadata by downstream tools.
    pub fn with_z_cap(
        ingredients: IngredientSet,
        field: MaturationField,
        mu: f64,
        z_cap: f64,
    ) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "mu must be positive, got {mu}"
            )));
        }
        if !(z_cap.is_finite() && z_cap > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "z_cap must be positive, got {z_cap}"
            )));
        }

        // Tail limits as z -> inf: s_w, d_w -> 0 (or stay constant when the
        // inhibition constant vanishes); handled by evaluating at z_cap and
        // the analytic limits below.
        let q_tail = if ingredients.k_a == 0.0 && ingredients.k_p == 0.0 {
            ingredients.q(0.0)
        } else {
            -ingredients.mu_w
        };
        let qbar = sup_scan(|z| ingredients.q(z), z_cap).max(q_tail);

        let gamma_tail = if ingredients.k_a == 0.0 && ingredients.k_p == 0.0 {
            ingredients.gamma(0.0)
        } else {
            0.0
        };
        let sup_gamma = sup_scan(|z| ingredients.gamma(z), z_cap).max(gamma_tail);

        let (y_lo, y_hi) = (
            field.x_high() - field.radius(),
            field.x_high() + field.radius(),
        );
        let mut sup_abs_d = 0.0_f64;
        let y_points = 33;
        for i in 0..y_points {
            let y = y_lo + (y_hi - y_lo) * i as f64 / (y_points - 1) as f64;
            let scan = sup_scan(|z| ingredients.d_raw(y, z).abs(), z_cap);
            let tail = ingredients.mu_u.eval(y).abs();
            sup_abs_d = sup_abs_d.max(scan).max(tail);
        }

        let h = field.history_length();
        let kj = field.speed_max() / field.speed_min()
            * ((field.speed_max() / field.radius() + sup_abs_d) * h).exp()
            * sup_gamma;
        if !(qbar.is_finite() && kj.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "derived constants must be finite: qbar = {qbar}, kj = {kj}"
            )));
        }

        Ok(ModelParams {
            ingredients,
            field,
            mu,
            z_cap,
            qbar,
            sup_gamma,
            sup_abs_d,
            kj,
        })
    }

    pub fn ingredients(&self) -> &IngredientSet {
        &self.ingredients
    }

    pub fn field(&self) -> &MaturationField {
        &self.field
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn z_cap(&self) -> f64 {
        self.z_cap
    }

    /// Supremum of the growth rate `q` over `[0, inf)`.
    pub fn qbar(&self) -> f64 {
        self.qbar
    }

    pub fn sup_gamma(&self) -> f64 {
        self.sup_gamma
    }

    pub fn sup_abs_d(&self) -> f64 {
        self.sup_abs_d
    }

    /// The functional bound constant `kj`.
    pub fn kj(&self) -> f64 {
        self.kj
    }

    pub fn history_length(&self) -> f64 {
        self.field.history_length()
    }

    /// Lower delay bound `(x_high - x_low) / speed_max`.
    pub fn tau_lower(&self) -> f64 {
        self.field.tau_bounds().0
    }

    /// The abstract constants the growth-envelope module works with.
    pub fn bound_params(&self) -> BoundParams {
        BoundParams {
            kj: self.kj,
            mu: self.mu,
            qbar: self.qbar,
            tau_lower: self.tau_lower(),
        }
    }

    pub fn q(&self, z: f64) -> f64 {
        self.ingredients.q(z)
    }

    pub fn gamma(&self, z: f64) -> f64 {
        self.ingredients.gamma(z)
    }

    /// Death rate with the maturity-range guard.
    pub fn d(&self, y: f64, z: f64) -> Result<f64> {
        let (lo, hi) = (
            self.field.x_high() - self.field.radius(),
            self.field.x_high() + self.field.radius(),
        );
        if y < lo - 1e-12 || y > hi + 1e-12 {
            return Err(Error::OutOfDomain { point: y, lo, hi });
        }
        Ok(self.ingredients.d_raw(y, z))
    }

    /// The exponent integrand `(y, z) -> d(y, z) - d1g(y, z)`.
    fn exponent_integrand(&self) -> impl Fn(f64, f64) -> f64 + '_ {
        move |y, z| self.ingredients.d_raw(y, z) - self.field.d1g(y, z)
    }

    /// The delayed functional `j` evaluated via abstract state sources:
    /// `w_at(s)` for `s in [-h, 0]`, the inhibitor source for the inner ODE,
    /// and the current inhibitor value (kept separate so the integrator can
    /// feed stage values).
    pub(crate) fn j_from_sources(
        &self,
        w_at: &dyn Fn(f64) -> f64,
        v_src: &dyn PsiSource,
        v_now: f64,
        inner_step: f64,
        root_tol: f64,
    ) -> Result<JEval> {
        let integrand = self.exponent_integrand();
        let res = threshold::solve_maturation_src(
            &self.field,
            v_src,
            Some(&integrand),
            inner_step,
            root_tol,
        )?;
        let z_tau = v_src.psi(-res.tau);
        let value = self.gamma(z_tau) / self.field.g(self.field.x_low(), z_tau)
            * self.field.g(self.field.x_high(), v_now)
            * w_at(-res.tau)
            * res.exponent_integral.exp();
        if !value.is_finite() {
            return Err(Error::NonFinite { t: 0.0 });
        }
        Ok(JEval {
            value,
            tau: res.tau,
        })
    }

    /// The delayed functional `j(phi, psi) >= 0` with its delay.
    pub fn functional_j(&self, phi: &History, psi: &History) -> Result<JEval> {
        let eval = self.j_from_sources(
            &|s| {
                phi.value_at(s.clamp(-phi.h(), 0.0), 0)
                    .expect("clamped point is inside the domain")
            },
            psi,
            psi.eval(0.0)?,
            threshold::default_inner_step(&self.field),
            threshold::DEFAULT_ROOT_TOL,
        )?;
        debug_assert!(
            eval.value >= 0.0,
            "the delayed functional must be nonnegative on the cone, got {}",
            eval.value
        );
        Ok(eval)
    }

    /// Full right-hand side `(w', v')` on a pair of histories.
    pub fn rhs(&self, phi: &History, psi: &History) -> Result<(f64, f64)> {
        let w0 = phi.eval(0.0)?;
        let v0 = psi.eval(0.0)?;
        let j = self.functional_j(phi, psi)?.value;
        Ok((self.q(v0) * w0, -self.mu * v0 + j))
    }

    pub fn rhs_pair(&self, pair: &HistoryPair) -> Result<(f64, f64)> {
        self.rhs(pair.phi(), pair.psi())
    }

    /// Right-hand side on a two-component history (components `w`, `v`), the
    /// shape the boundary feedback checker works with.
    pub fn rhs_state(&self, state: &History) -> Result<Vec<f64>> {
        if state.dim() != 2 {
            return Err(Error::InvalidParameter(format!(
                "model state needs 2 components, got {}",
                state.dim()
            )));
        }
        let times = state.times().to_vec();
        let phi = History::new(state.h(), times.clone(), vec![state.component(0).to_vec()])?;
        let psi = History::new(state.h(), times, vec![state.component(1).to_vec()])?;
        let (dw, dv) = self.rhs(&phi, &psi)?;
        Ok(vec![dw, dv])
    }

    /// The positive equilibrium `(w*, v*)`, when the parameter regime admits
    /// one: `v*` is the positive zero of `q` (bisection on the decreasing
    /// rate), `w*` follows from `mu v* = j(w*, v*)` by linearity of `j` in
    /// the first argument. Returns `None` when `q(0) <= 0` (only the trivial
    /// equilibrium exists) or the renewal flux vanishes at `v*`.
    pub fn positive_equilibrium(&self) -> Result<Option<(f64, f64)>> {
        if self.q(0.0) <= 0.0 {
            return Ok(None);
        }
        let mut hi = 1.0;
        let mut tries = 0;
        while self.q(hi) > 0.0 {
            hi *= 2.0;
            tries += 1;
            if tries > 60 {
                return Ok(None);
            }
        }
        let (mut lo, mut hi) = (0.0, hi);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.q(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let v_star = 0.5 * (lo + hi);

        let h = self.history_length();
        let unit_phi = History::constant(h, 1.0)?;
        let psi = History::constant(h, v_star)?;
        let j_unit = self.functional_j(&unit_phi, &psi)?.value;
        if j_unit <= 0.0 {
            return Ok(None);
        }
        Ok(Some((self.mu * v_star / j_unit, v_star)))
    }
}

/// A functional evaluation together with the delay it used.
#[derive(Clone, Copy, Debug)]
pub struct JEval {
    pub value: f64,
    pub tau: f64,
}

/// Grid scan with quadratic clustering near zero, followed by a
/// golden-section refinement around the best grid point.
fn sup_scan(f: impl Fn(f64) -> f64, z_cap: f64) -> f64 {
    let n = 2000;
    let grid = |i: usize| {
        let frac = i as f64 / n as f64;
        frac * frac * z_cap
    };
    let mut best_i = 0;
    let mut best = f64::NEG_INFINITY;
    for i in 0..=n {
        let v = f(grid(i));
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let lo = grid(best_i.saturating_sub(1));
    let hi = grid((best_i + 1).min(n));
    best.max(golden_max(&f, lo, hi))
}

fn golden_max(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..80 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    f1.max(f2)
}

/// Empirical local Lipschitz estimate of a functional on pairs: the largest
/// quotient `|f(a) - f(b)| / ||a - b||` over random pairs drawn from the
/// `delta`-ball around `pair0` intersected with the nonnegative cone, all
/// with Lipschitz constant at most `lip_cap`.
pub fn estimate_local_lipschitz<F>(
    functional: F,
    pair0: &HistoryPair,
    delta: f64,
    lip_cap: f64,
    n_samples: usize,
    seed: u64,
) -> Result<f64>
where
    F: Fn(&HistoryPair) -> Result<f64>,
{
    if !(delta > 0.0) {
        return Err(Error::Precondition(format!(
            "delta must be positive, got {delta}"
        )));
    }
    if lip_cap < pair0.lip() {
        return Err(Error::Precondition(format!(
            "lip_cap {lip_cap} is below lip(pair0) = {}",
            pair0.lip()
        )));
    }
    let spec = DomainSpec::nonnegative(1);
    let bump_lip = lip_cap - pair0.lip();
    let h = pair0.h();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| -> Result<HistoryPair> {
        let s: u64 = rand::Rng::random(rng);
        let bump_phi = History::random_lipschitz_in(s, h, 1, -delta, delta, bump_lip, 9)?;
        let bump_psi =
            History::random_lipschitz_in(s ^ 0x5bd1_e995, h, 1, -delta, delta, bump_lip, 9)?;
        HistoryPair::new(
            retract(&pair0.phi().add(&bump_phi)?, &spec)?,
            retract(&pair0.psi().add(&bump_psi)?, &spec)?,
        )
    };
    let mut worst = 0.0_f64;
    for _ in 0..n_samples {
        let a = draw(&mut rng)?;
        let b = draw(&mut rng)?;
        let dist = a.sup_distance(&b)?;
        if dist < 1e-14 {
            continue;
        }
        let quotient = (functional(&a)? - functional(&b)?).abs() / dist;
        worst = worst.max(quotient);
    }
    if !worst.is_finite() {
        return Err(Error::NonFinite { t: 0.0 });
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcs::SpeedField;

    pub(crate) fn plain_ingredients(a_w: f64, p_w: f64, mu_w: f64) -> IngredientSet {
        IngredientSet::new(
            a_w,
            p_w,
            mu_w,
            1.0,
            0.5,
            0.5,
            CoefFn::Constant(0.4),
            CoefFn::Constant(0.1),
        )
        .unwrap()
    }

    fn default_field() -> MaturationField {
        MaturationField::new(
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
        .unwrap()
    }

    fn default_params() -> ModelParams {
        ModelParams::new(plain_ingredients(1.0, 1.0, 0.1), default_field(), 1.0).unwrap()
    }

    #[test]
    fn rate_examples() {
        let ing = plain_ingredients(1.0, 1.0, 0.1);
        assert!((ing.q(0.0) - 0.9).abs() < 1e-15);
        assert_eq!(ing.gamma(0.0), 0.0);
        // Large-z limit: q -> -mu_w.
        assert!((ing.q(1e9) + 0.1).abs() < 1e-8);
    }

    #[test]
    fn death_rate_examples() {
        let field = default_field();
        // alpha = 1, mu_u = 0, k_d = 0 -> d = 1.
        let ing = IngredientSet::new(
            1.0,
            1.0,
            0.0,
            0.0,
            0.0,
            0.0,
            CoefFn::Constant(1.0),
            CoefFn::Constant(0.0),
        )
        .unwrap();
        let params = ModelParams::new(ing, field.clone(), 1.0).unwrap();
        assert_eq!(params.d(1.0, 3.0).unwrap(), 1.0);
        assert!(params.d(5.0, 0.0).is_err());

        // alpha = 1, mu_u = 0.5, k_d = 1, z = 1 -> 0.
        let ing = IngredientSet::new(
            1.0,
            1.0,
            0.0,
            0.0,
            0.0,
            1.0,
            CoefFn::Constant(1.0),
            CoefFn::Constant(0.5),
        )
        .unwrap();
        let params = ModelParams::new(ing, field, 1.0).unwrap();
        assert!(params.d(1.0, 1.0).unwrap().abs() < 1e-15);
    }

    #[test]
    fn qbar_matches_closed_form_candidates() {
        // q decreasing from q(0): supremum at zero.
        let params = default_params();
        assert!((params.qbar() - 0.9).abs() < 1e-9);

        // a_w = 0.5: 2 s_w - 1 <= 0 for all z, supremum still at zero.
        let params =
            ModelParams::new(plain_ingredients(0.5, 1.0, 0.1), default_field(), 1.0).unwrap();
        assert!((params.qbar() - params.q(0.0)).abs() < 1e-9);

        // mu_w = 0, a_w = 1, p_w = 2 -> qbar = 2.
        let params =
            ModelParams::new(plain_ingredients(1.0, 2.0, 0.0), default_field(), 1.0).unwrap();
        assert!((params.qbar() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn kj_formula_direct_evaluation() {
        // K = 2, eps = 0.5, b = 1 (h = 0.5), sup|d| = 1, sup gamma = 2:
        // kj = 4 e^{1.5} * 2.
        let field = MaturationField::new(
            0.55,
            1.0,
            1.0,
            2.0,
            0.5,
            SpeedField::Constant(1.0),
        )
        .unwrap();
        // d = 1: alpha = 1, mu_u = 0, k_d = 0; gamma: send a_w = 0, p_w = 1,
        // k_a = k_p = 0 -> gamma(z) = 2 (sup 2), mu_w = 0.
        let ing = IngredientSet::new(
            0.0,
            1.0,
            0.0,
            0.0,
            0.0,
            0.0,
            CoefFn::Constant(1.0),
            CoefFn::Constant(0.0),
        )
        .unwrap();
        let params = ModelParams::new(ing, field, 1.0).unwrap();
        assert!((params.sup_gamma() - 2.0).abs() < 1e-12);
        assert!((params.sup_abs_d() - 1.0).abs() < 1e-12);
        let expect = 8.0 * 1.5_f64.exp();
        assert!(
            (params.kj() - expect).abs() / expect < 1e-12,
            "kj = {}, expected {expect}",
            params.kj()
        );

        // gamma == 0 -> kj = 0: a_w = 1 with k_a = 0 makes 1 - s_w == 0.
        let ing = IngredientSet::new(
            1.0,
            1.0,
            0.0,
            0.0,
            0.0,
            0.0,
            CoefFn::Constant(1.0),
            CoefFn::Constant(0.0),
        )
        .unwrap();
        let field = MaturationField::new(0.55, 1.0, 1.0, 2.0, 0.5, SpeedField::Constant(1.0)).unwrap();
        let params = ModelParams::new(ing, field, 1.0).unwrap();
        assert_eq!(params.kj(), 0.0);

        // h = 1, sup|d| = 0, K = 1, eps = 0.5, sup gamma = 1 -> kj = 2 e.
        let field = MaturationField::new(0.7, 1.0, 1.0, 1.0, 0.5, SpeedField::Constant(0.9)).unwrap();
        let ing = IngredientSet::new(
            0.5,
            1.0,
            0.0,
            0.0,
            0.0,
            0.0,
            CoefFn::Constant(0.0),
            CoefFn::Constant(0.0),
        )
        .unwrap();
        let params = ModelParams::new(ing, field, 1.0).unwrap();
        let expect = 2.0 * std::f64::consts::E;
        assert!((params.kj() - expect).abs() / expect < 1e-12);
    }

    #[test]
    fn functional_vanishes_with_its_factors() {
        let params = default_params();
        let h = params.history_length();
        let psi = History::random_lipschitz(3, h, 1, 1.0, 2.0, 7).unwrap();

        let zero_phi = History::constant(h, 0.0).unwrap();
        let j = params.functional_j(&zero_phi, &psi).unwrap();
        assert_eq!(j.value, 0.0);

        // gamma == 0 via a_w = 1, k_a = 0.
        let ing = IngredientSet::new(
            1.0,
            1.0,
            0.1,
            0.0,
            0.5,
            0.5,
            CoefFn::Constant(0.4),
            CoefFn::Constant(0.1),
        )
        .unwrap();
        let params = ModelParams::new(ing, default_field(), 1.0).unwrap();
        let phi = History::constant(h, 2.0).unwrap();
        assert_eq!(params.functional_j(&phi, &psi).unwrap().value, 0.0);
    }

    #[test]
    fn functional_reduces_to_hand_formula_for_unit_speed() {
        // g = 1 (derivative 0), d = 0, phi constant: j = gamma(psi(-tau)) w0
        // with tau = x_high - x_low.
        let field = MaturationField::new(0.5, 1.0, 1.0, 1.1, 0.9, SpeedField::Constant(1.0)).unwrap();
        let ing = IngredientSet::new(
            0.6,
            0.8,
            0.1,
            1.0,
            0.5,
            0.0,
            CoefFn::Constant(0.0),
            CoefFn::Constant(0.0),
        )
        .unwrap();
        let params = ModelParams::new(ing, field, 1.0).unwrap();
        let h = params.history_length();
        for seed in 0..20 {
            let psi = History::random_lipschitz(seed, h, 1, 2.0, 3.0, 9).unwrap();
            let w0 = 1.0 + seed as f64 / 10.0;
            let phi = History::constant(h, w0).unwrap();
            let j = params.functional_j(&phi, &psi).unwrap();
            assert!((j.tau - 0.5).abs() < 1e-10);
            let hand = params.gamma(psi.eval(-j.tau).unwrap()) * w0;
            assert!(
                (j.value - hand).abs() <= 1e-9 * hand.max(1e-30),
                "pipeline {} vs hand {hand}",
                j.value
            );
        }
    }

    #[test]
    fn rhs_at_trivial_and_positive_equilibrium() {
        let params = default_params();
        let h = params.history_length();

        let zero = HistoryPair::constant(h, 0.0, 0.0).unwrap();
        let (dw, dv) = params.rhs_pair(&zero).unwrap();
        assert_eq!((dw, dv), (0.0, 0.0));

        let (w_star, v_star) = params
            .positive_equilibrium()
            .unwrap()
            .expect("default regime admits a positive equilibrium");
        assert!(w_star > 0.0 && v_star > 0.0);
        let eq = HistoryPair::constant(h, w_star, v_star).unwrap();
        let (dw, dv) = params.rhs_pair(&eq).unwrap();
        assert!(dw.abs() < 1e-10, "w residual {dw}");
        assert!(dv.abs() < 1e-10, "v residual {dv}");
    }

    #[test]
    fn rhs_signs_on_the_boundary() {
        let params = default_params();
        let h = params.history_length();
        let one = History::constant(h, 1.0).unwrap();
        let zero = History::constant(h, 0.0).unwrap();
        let (dw, dv) = params.rhs(&one, &zero).unwrap();
        assert!((dw - params.q(0.0)).abs() < 1e-12);
        assert!(dv >= 0.0);
    }

    #[test]
    fn local_lipschitz_estimates() {
        let params = default_params();
        let h = params.history_length();
        let pair0 = HistoryPair::random(5, h, 1.0, 1.0, 1.0, 1.0, 9).unwrap();

        let constant = estimate_local_lipschitz(|_| Ok(1.0), &pair0, 0.2, 3.0, 50, 7).unwrap();
        assert_eq!(constant, 0.0);

        let eval0 =
            estimate_local_lipschitz(|p| p.phi().eval(0.0), &pair0, 0.2, 3.0, 200, 7).unwrap();
        assert!(eval0 <= 1.0 + 1e-9, "evaluation quotient {eval0}");
        assert!(eval0 > 0.5, "evaluation quotient too small: {eval0}");

        let j_quot = estimate_local_lipschitz(
            |p| Ok(params.functional_j(p.phi(), p.psi())?.value),
            &pair0,
            0.2,
            3.0,
            80,
            11,
        )
        .unwrap();
        assert!(j_quot.is_finite() && j_quot > 0.0);
        // Stable under doubling the sample count (within a factor of 2).
        let j_quot2 = estimate_local_lipschitz(
            |p| Ok(params.functional_j(p.phi(), p.psi())?.value),
            &pair0,
            0.2,
            3.0,
            160,
            11,
        )
        .unwrap();
        assert!(j_quot2 <= 2.0 * j_quot && j_quot <= 2.0 * j_quot2);
    }
}
