//! Closed-form growth envelopes and invariant-compact-set budgets for the
//! two-component system, plus their ensemble verification.
//!
//! Everything here is driven by four abstract constants: the functional
//! bound `kj`, the decay rate `mu`, the growth-rate supremum `qbar` and the
//! lower delay bound `tau_lower`. From the variation-of-constants formula
//! one gets, for `||phi|| <= A` and `psi(0) <= B`,
//!
//! ```text
//! v(t) <= e^{-mu t} psi(0) + ||phi|| f(t)
//! ```
//!
//! with `f = f_linear` under the bound `j <= kj ||phi||` and the sharper
//! `f = f_threshold` under `j <= kj phi(-tau(psi))`. The ratio functions
//! `f(t) / (1 - e^{-mu t})` increase from `kj/mu`, which turns the bound
//! into invariance statements for the compact convex sets
//! `{chi : 0 <= chi <= B, lip chi <= R}`.

use crate::ensemble;
use crate::error::{Error, Result};
use crate::history::History;
use crate::integrator::{integrate, SolverConfig};
use crate::model::ModelParams;
use crate::report::{CheckSet, NamedCheck};
use serde::Serialize;

/// The abstract constants of the growth-envelope layer.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BoundParams {
    /// Functional bound constant (`j <= kj ...`).
    pub kj: f64,
    /// Mature-population decay rate.
    pub mu: f64,
    /// Supremum of the stem cell growth rate.
    pub qbar: f64,
    /// Lower bound of the threshold delay.
    pub tau_lower: f64,
}

impl BoundParams {
    pub fn new(kj: f64, mu: f64, qbar: f64, tau_lower: f64) -> Result<Self> {
        if !(kj.is_finite() && kj >= 0.0) {
            return Err(Error::InvalidParameter(format!("kj must be >= 0, got {kj}")));
        }
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::InvalidParameter(format!("mu must be > 0, got {mu}")));
        }
        if !qbar.is_finite() {
            return Err(Error::InvalidParameter(format!("qbar must be finite, got {qbar}")));
        }
        if !(tau_lower.is_finite() && tau_lower > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tau_lower must be > 0, got {tau_lower}"
            )));
        }
        Ok(BoundParams {
            kj,
            mu,
            qbar,
            tau_lower,
        })
    }
}

/// `(e^x - 1) / x`, stable near zero.
fn phi1(x: f64) -> f64 {
    if x.abs() < 1e-5 {
        1.0 + x / 2.0 + x * x / 6.0
    } else {
        x.exp_m1() / x
    }
}

/// The exponential envelope of the stem cell component: `1` for `t <= 0`,
/// `e^{qbar t}` afterwards.
pub fn q_envelope(bp: &BoundParams, t: f64) -> f64 {
    if t <= 0.0 {
        1.0
    } else {
        (bp.qbar * t).exp()
    }
}

/// Growth bound under `j <= kj ||phi||`:
/// `kj/(mu+qbar) (e^{qbar t} - e^{-mu t})`, evaluated in a form that stays
/// stable as `mu + qbar -> 0`.
pub fn forcing_linear(bp: &BoundParams, t: f64) -> f64 {
    bp.kj * (-bp.mu * t).exp() * t * phi1((bp.mu + bp.qbar) * t)
}

/// Growth bound under `j <= kj phi(-tau(psi))`; branches at `tau_lower`.
pub fn forcing_threshold(bp: &BoundParams, t: f64) -> f64 {
    if t <= bp.tau_lower {
        bp.kj * t * phi1(-bp.mu * t)
    } else {
        let shifted = t - bp.tau_lower;
        let head = (-bp.mu * t).exp() * (bp.mu * bp.tau_lower).exp_m1() / bp.mu;
        let tail = (-bp.mu * shifted).exp() * shifted * phi1((bp.mu + bp.qbar) * shifted);
        bp.kj * (head + tail)
    }
}

/// `forcing_linear(t) / (1 - e^{-mu t})`, continued by `kj/mu` at zero.
pub fn ratio_linear(bp: &BoundParams, t: f64) -> f64 {
    if t <= 0.0 {
        return bp.kj / bp.mu;
    }
    bp.kj / bp.mu * (-bp.mu * t).exp() * phi1((bp.mu + bp.qbar) * t) / phi1(-bp.mu * t)
}

/// `forcing_threshold(t) / (1 - e^{-mu t})`; identically `kj/mu` on
/// `(0, tau_lower]` by the branch formula.
pub fn ratio_threshold(bp: &BoundParams, t: f64) -> f64 {
    if t <= bp.tau_lower {
        return bp.kj / bp.mu;
    }
    forcing_threshold(bp, t) / (-(-bp.mu * t).exp_m1())
}

/// Tightest bound/Lipschitz budget on horizon `t` under the linear
/// functional bound: `(B, R) = (A ratio_linear(t), max(mu B, kj A e^{qbar t}))`.
pub fn budget_linear(bp: &BoundParams, phi_bound: f64, t: f64) -> (f64, f64) {
    let b = phi_bound * ratio_linear(bp, t);
    let r = (bp.mu * b).max(bp.kj * phi_bound * (bp.qbar * t).exp());
    (b, r)
}

/// Tightest budget under the delayed functional bound:
/// `(B, R) = (A ratio_threshold(t), max(mu B, kj A q_envelope(t - tau_lower)))`.
pub fn budget_threshold(bp: &BoundParams, phi_bound: f64, t: f64) -> (f64, f64) {
    let b = phi_bound * ratio_threshold(bp, t);
    let r = (bp.mu * b).max(bp.kj * phi_bound * q_envelope(bp, t - bp.tau_lower));
    (b, r)
}

/// Largest invariance horizons for fixed `(A, B, R)`; requires
/// `A kj / mu < B` and `R >= mu B`. Each horizon is the smaller of the time
/// at which the respective ratio reaches `B/A` and the time at which the
/// Lipschitz budget binds; all four are infinite when `qbar <= 0`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Horizons {
    pub t_d: f64,
    pub t_e: f64,
    pub t_d1: f64,
    pub t_d2: f64,
    pub t_e1: f64,
    pub t_e2: f64,
}

pub fn horizons(bp: &BoundParams, phi_bound: f64, b: f64, r: f64) -> Result<Horizons> {
    if !(phi_bound > 0.0 && b > 0.0) {
        return Err(Error::Precondition(format!(
            "bounds must be positive, got A = {phi_bound}, B = {b}"
        )));
    }
    if phi_bound * bp.kj / bp.mu >= b {
        return Err(Error::Precondition(format!(
            "requires A kj / mu < B, got {} >= {b}",
            phi_bound * bp.kj / bp.mu
        )));
    }
    if r < bp.mu * b {
        return Err(Error::Precondition(format!(
            "requires R >= mu B, got {r} < {}",
            bp.mu * b
        )));
    }
    if bp.qbar <= 0.0 {
        return Ok(Horizons {
            t_d: f64::INFINITY,
            t_e: f64::INFINITY,
            t_d1: f64::INFINITY,
            t_d2: f64::INFINITY,
            t_e1: f64::INFINITY,
            t_e2: f64::INFINITY,
        });
    }
    let target = b / phi_bound;
    let t_d1 = invert_increasing(|t| ratio_linear(bp, t), target, 1e-12, 1.0 / bp.mu)?;
    let t_e1 = invert_increasing(
        |t| ratio_threshold(bp, t),
        target,
        bp.tau_lower,
        bp.tau_lower + 1.0 / bp.mu,
    )?;
    let t_d2 = (r / (phi_bound * bp.kj)).ln() / bp.qbar;
    let t_e2 = bp.tau_lower + t_d2;
    Ok(Horizons {
        t_d: t_d1.min(t_d2),
        t_e: t_e1.min(t_e2),
        t_d1,
        t_d2,
        t_e1,
        t_e2,
    })
}

/// Bisection for `f(t) = target` on an increasing function, expanding the
/// bracket upwards from `[lo, hi0]`.
fn invert_increasing(
    f: impl Fn(f64) -> f64,
    target: f64,
    lo: f64,
    hi0: f64,
) -> Result<f64> {
    let mut hi = hi0.max(lo * 2.0);
    let mut tries = 0;
    while f(hi) < target {
        hi *= 2.0;
        tries += 1;
        if tries > 200 || !hi.is_finite() {
            return Err(Error::Precondition(format!(
                "target {target} is never reached"
            )));
        }
    }
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi.max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Uniform extra horizon: with `A kj < mu B <= R`, invariance holds on
/// `[0, tau_lower + delta]` where `A kj e^{qbar delta} = mu B`. Unbounded
/// (`+inf`) when `qbar <= 0`.
pub fn delta_horizon(bp: &BoundParams, phi_bound: f64, b: f64) -> Result<f64> {
    if !(phi_bound * bp.kj < bp.mu * b) {
        return Err(Error::Precondition(format!(
            "requires A kj < mu B, got {} >= {}",
            phi_bound * bp.kj,
            bp.mu * b
        )));
    }
    if bp.qbar <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((bp.mu * b / (phi_bound * bp.kj)).ln() / bp.qbar)
}

/// The stem cell Lipschitz condition `qbar A e^{qbar T} <= R`.
pub fn w_lip_condition(bp: &BoundParams, phi_bound: f64, r: f64, t: f64) -> bool {
    bp.qbar * phi_bound * (bp.qbar * t).exp() <= r
}

/// The compact convex set of histories valued in `[0, bound]` with
/// Lipschitz constant at most `lip`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CompactSet {
    pub bound: f64,
    pub lip: f64,
}

/// Absolute tolerance on the nonnegativity side of membership tests.
pub const MEMBERSHIP_ABS_TOL: f64 = 1e-9;

impl CompactSet {
    pub fn new(bound: f64, lip: f64) -> Result<Self> {
        if !(bound > 0.0 && lip > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "compact set needs positive bound and lip, got {bound}, {lip}"
            )));
        }
        Ok(CompactSet { bound, lip })
    }

    /// Membership with multiplicative slack on the upper bound and the
    /// Lipschitz cap, absolute [`MEMBERSHIP_ABS_TOL`] below zero.
    pub fn contains(&self, chi: &History, rel_slack: f64) -> bool {
        chi.min_value() >= -MEMBERSHIP_ABS_TOL
            && chi.max_value() <= self.bound * (1.0 + rel_slack)
            && chi.lip() <= self.lip * (1.0 + rel_slack)
    }
}

/// A certified invariance statement: initial data with `||phi|| <= phi_bound`
/// and `psi` in `set` keep the `v`-segments inside `set` on `[0, horizon]`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct InvarianceBudget {
    pub phi_bound: f64,
    pub set: CompactSet,
    pub horizon: f64,
    pub case: BudgetCase,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetCase {
    /// Conditions derived from `j <= kj ||phi||`.
    Linear,
    /// Conditions derived from `j <= kj phi(-tau(psi))`.
    Threshold,
}

impl InvarianceBudget {
    /// Tightest linear-case budget for the given amplitude and horizon.
    pub fn tightest_linear(bp: &BoundParams, phi_bound: f64, horizon: f64) -> Result<Self> {
        let (b, r) = budget_linear(bp, phi_bound, horizon);
        Ok(InvarianceBudget {
            phi_bound,
            set: CompactSet::new(b, r)?,
            horizon,
            case: BudgetCase::Linear,
        })
    }

    /// Tightest threshold-case budget.
    pub fn tightest_threshold(bp: &BoundParams, phi_bound: f64, horizon: f64) -> Result<Self> {
        let (b, r) = budget_threshold(bp, phi_bound, horizon);
        Ok(InvarianceBudget {
            phi_bound,
            set: CompactSet::new(b, r)?,
            horizon,
            case: BudgetCase::Threshold,
        })
    }

    /// Budget from the uniform-horizon statement: given `A kj < mu B <= R`,
    /// invariance holds up to `tau_lower + delta`.
    pub fn from_delta_horizon(bp: &BoundParams, phi_bound: f64, b: f64, r: f64) -> Result<Self> {
        if r < bp.mu * b {
            return Err(Error::Precondition(format!(
                "requires mu B <= R, got {} > {r}",
                bp.mu * b
            )));
        }
        let delta = delta_horizon(bp, phi_bound, b)?;
        Ok(InvarianceBudget {
            phi_bound,
            set: CompactSet::new(b, r)?,
            horizon: bp.tau_lower + delta,
            case: BudgetCase::Threshold,
        })
    }

    /// Re-checks the side conditions of the underlying statement (with a
    /// `1e-12` relative slack for budgets constructed at equality).
    pub fn check_conditions(&self, bp: &BoundParams) -> Result<()> {
        let slack = 1.0 + 1e-12;
        let (b, r) = (self.set.bound, self.set.lip);
        let (need_b, need_r) = match self.case {
            BudgetCase::Linear => budget_linear(bp, self.phi_bound, self.horizon),
            BudgetCase::Threshold => budget_threshold(bp, self.phi_bound, self.horizon),
        };
        if need_b > b * slack {
            return Err(Error::Precondition(format!(
                "bound condition fails: needs B >= {need_b}, budget has {b}"
            )));
        }
        if need_r > r * slack {
            return Err(Error::Precondition(format!(
                "Lipschitz condition fails: needs R >= {need_r}, budget has {r}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Violation {
    pub member: usize,
    pub t: f64,
    pub quantity: String,
    pub value: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct InvarianceReport {
    pub preconditions_ok: bool,
    pub precondition_message: Option<String>,
    pub case: BudgetCase,
    pub members: usize,
    pub horizon: f64,
    /// Smallest slack of the `v`-segment value bound across the ensemble.
    pub v_value_worst_margin: f64,
    /// Smallest slack of the `v`-segment Lipschitz bound.
    pub v_lip_worst_margin: f64,
    pub w_lip_checked: bool,
    pub w_lip_worst_margin: f64,
    /// Smallest state value observed anywhere (positivity indicator).
    pub min_state: f64,
    pub violations: Vec<Violation>,
    pub all_pass: bool,
}

/// Relative slack applied to ensemble membership checks; the statements are
/// exact, the Lipschitz extraction from the dense representation is not.
pub const ENSEMBLE_REL_SLACK: f64 = 1e-6;

/// Integrates an ensemble of random initial pairs admissible for `budget`
/// and verifies that every `v`-segment on `[0, horizon]` stays in the
/// budget's compact set (value bound and Lipschitz bound, with
/// [`ENSEMBLE_REL_SLACK`]). When the stem cell Lipschitz condition holds for
/// the budget, the `w`-segments' Lipschitz cap is verified as well.
///
/// Segment membership for all `t` at once is equivalent to: `v` stays in
/// `[0, B]` on `[-h, horizon]`, `|v'|` stays below `R` on `[0, horizon]`,
/// and `lip(psi) <= R`; value ranges and derivative maxima are extracted
/// exactly from the dense cubic representation.
pub fn verify_invariance(
    params: &ModelParams,
    budget: &InvarianceBudget,
    ensemble_size: usize,
    seed: u64,
    config: &SolverConfig,
) -> Result<InvarianceReport> {
    let bp = params.bound_params();
    if let Err(err) = budget.check_conditions(&bp) {
        return Ok(InvarianceReport {
            preconditions_ok: false,
            precondition_message: Some(err.to_string()),
            case: budget.case,
            members: 0,
            horizon: budget.horizon,
            v_value_worst_margin: f64::NAN,
            v_lip_worst_margin: f64::NAN,
            w_lip_checked: false,
            w_lip_worst_margin: f64::NAN,
            min_state: f64::NAN,
            violations: Vec::new(),
            all_pass: false,
        });
    }

    let h = params.history_length();
    let (b, r) = (budget.set.bound, budget.set.lip);
    let b_slack = b * (1.0 + ENSEMBLE_REL_SLACK);
    let r_slack = r * (1.0 + ENSEMBLE_REL_SLACK);
    let check_w_lip = w_lip_condition(&bp, budget.phi_bound, r, budget.horizon);

    struct MemberOutcome {
        v_value_margin: f64,
        v_lip_margin: f64,
        w_lip_margin: f64,
        min_state: f64,
        violations: Vec<Violation>,
    }

    let outcomes = ensemble::try_indexed_map(ensemble_size, |i| -> Result<MemberOutcome> {
        let member_seed = ensemble::member_seed(seed, i);
        let phi = History::random_lipschitz(member_seed, h, 1, budget.phi_bound, r, 9)?;
        let psi = History::random_lipschitz(member_seed ^ 0x0123_4567_89ab_cdef, h, 1, b, r, 9)?;
        let pair = crate::history::HistoryPair::new(phi, psi)?;
        let traj = integrate(params, &pair, budget.horizon, config)?;

        let ((w_min, _), (v_min, v_max)) = traj.value_range(-h, budget.horizon);
        let (w_prime_max, v_prime_max) = traj.max_abs_derivative(0.0, budget.horizon);
        let psi_lip = pair.psi().lip();

        let mut violations = Vec::new();
        let v_value_margin = b_slack - v_max;
        if v_value_margin < 0.0 {
            violations.push(Violation {
                member: i,
                t: budget.horizon,
                quantity: "v max".into(),
                value: v_max,
                bound: b_slack,
            });
        }
        if v_min < -MEMBERSHIP_ABS_TOL {
            violations.push(Violation {
                member: i,
                t: budget.horizon,
                quantity: "v min".into(),
                value: v_min,
                bound: -MEMBERSHIP_ABS_TOL,
            });
        }
        let v_lip_margin = r_slack - v_prime_max.max(psi_lip);
        if v_lip_margin < 0.0 {
            violations.push(Violation {
                member: i,
                t: budget.horizon,
                quantity: "v lip".into(),
                value: v_prime_max.max(psi_lip),
                bound: r_slack,
            });
        }
        let w_lip_margin = if check_w_lip {
            let margin = r_slack - w_prime_max.max(pair.phi().lip());
            if margin < 0.0 {
                violations.push(Violation {
                    member: i,
                    t: budget.horizon,
                    quantity: "w lip".into(),
                    value: w_prime_max.max(pair.phi().lip()),
                    bound: r_slack,
                });
            }
            margin
        } else {
            f64::INFINITY
        };
        Ok(MemberOutcome {
            v_value_margin,
            v_lip_margin,
            w_lip_margin,
            min_state: w_min.min(v_min),
            violations,
        })
    })?;

    let mut report = InvarianceReport {
        preconditions_ok: true,
        precondition_message: None,
        case: budget.case,
        members: ensemble_size,
        horizon: budget.horizon,
        v_value_worst_margin: f64::INFINITY,
        v_lip_worst_margin: f64::INFINITY,
        w_lip_checked: check_w_lip,
        w_lip_worst_margin: f64::INFINITY,
        min_state: f64::INFINITY,
        violations: Vec::new(),
        all_pass: true,
    };
    for outcome in outcomes {
        report.v_value_worst_margin = report.v_value_worst_margin.min(outcome.v_value_margin);
        report.v_lip_worst_margin = report.v_lip_worst_margin.min(outcome.v_lip_margin);
        report.w_lip_worst_margin = report.w_lip_worst_margin.min(outcome.w_lip_margin);
        report.min_state = report.min_state.min(outcome.min_state);
        report.violations.extend(outcome.violations);
    }
    report.all_pass = report.violations.is_empty() && report.min_state >= -MEMBERSHIP_ABS_TOL;
    Ok(report)
}

/// Log-spaced grid, endpoints included.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (llo, lhi) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (llo + (lhi - llo) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Grid checks of the closed-form inequalities: ordering of the two forcing
/// bounds, monotonicity of both ratio functions, the exponential-gap
/// estimates, the constancy of the threshold ratio below `tau_lower`, and
/// homogeneity in `kj`. Strict inequalities are only asserted for
/// `t >= 1e-6` (both sides vanish at zero).
pub fn lemma_grid_checks(bp: &BoundParams, t_grid: &[f64]) -> CheckSet {
    let ts: Vec<f64> = t_grid.iter().copied().filter(|&t| t >= 1e-6).collect();
    let n = ts.len();

    let mut order_margin = f64::INFINITY;
    let mut growth_l_margin = f64::INFINITY;
    let mut growth_tau_margin = f64::INFINITY;
    let mut ratio_l_inc = f64::INFINITY;
    let mut ratio_tau_inc = f64::INFINITY;
    let mut forcing_inc = f64::INFINITY;
    let mut const_below = 0.0_f64;
    let mut homo_dev = 0.0_f64;

    let double = BoundParams {
        kj: 2.0 * bp.kj,
        ..*bp
    };

    let mut prev: Option<(f64, f64, f64, f64, f64)> = None;
    for &t in &ts {
        let fl = forcing_linear(bp, t);
        let ft = forcing_threshold(bp, t);
        let rl = ratio_linear(bp, t);
        let rt = ratio_threshold(bp, t);

        order_margin = order_margin.min(fl - ft);
        growth_l_margin = growth_l_margin.min(bp.kj * (bp.qbar * t).exp() / bp.mu - rl);
        if t >= bp.tau_lower * (1.0 + 1e-6) + 1e-6 {
            growth_tau_margin =
                growth_tau_margin.min(bp.kj * (bp.qbar * (t - bp.tau_lower)).exp() - bp.mu * rt);
        }
        if t <= bp.tau_lower {
            const_below = const_below.max((rt - bp.kj / bp.mu).abs());
        }
        homo_dev = homo_dev
            .max((forcing_linear(&double, t) - 2.0 * fl).abs() / fl.max(1e-300))
            .max((forcing_threshold(&double, t) - 2.0 * ft).abs() / ft.max(1e-300));

        if let Some((pt, pfl, pft, prl, prt)) = prev {
            debug_assert!(t > pt);
            ratio_l_inc = ratio_l_inc.min(rl - prl);
            if pt > bp.tau_lower {
                ratio_tau_inc = ratio_tau_inc.min(rt - prt);
            }
            forcing_inc = forcing_inc.min((fl - pfl).min(ft - pft));
        }
        prev = Some((t, fl, ft, rl, rt));
    }

    CheckSet::new(vec![
        NamedCheck::new("forcing_linear > forcing_threshold", n, order_margin),
        NamedCheck::new("ratio_linear strictly increasing", n, ratio_l_inc),
        NamedCheck::new(
            "ratio_threshold strictly increasing beyond tau_lower",
            n,
            ratio_tau_inc,
        ),
        NamedCheck::new(
            "ratio_threshold constant below tau_lower",
            n,
            if const_below == 0.0 { 0.0 } else { -const_below },
        ),
        NamedCheck::new(
            "kj e^{qbar t}/mu exceeds ratio_linear",
            n,
            growth_l_margin,
        ),
        NamedCheck::new(
            "kj e^{qbar (t - tau_lower)} exceeds mu ratio_threshold",
            n,
            growth_tau_margin,
        ),
        NamedCheck::new("forcing functions increasing", n, forcing_inc),
        NamedCheck::new(
            "forcing functions homogeneous in kj",
            n,
            if homo_dev <= 1e-12 { 1e-12 - homo_dev } else { -homo_dev },
        ),
    ])
}

/// The decay-plus-forcing envelope `t -> mu (e^{-mu t} B + A forcing_linear(t))`
/// attains its maximum `mu B` on `[0, t1]`, where `t1` solves
/// `A ratio_linear(t1) = B`; verified on a dense grid within `1e-9`
/// relative. Requires `A kj / mu < B` and `qbar > 0`.
pub fn forcing_max_check(bp: &BoundParams, phi_bound: f64, b: f64) -> Result<NamedCheck> {
    if !(phi_bound * bp.kj / bp.mu < b) {
        return Err(Error::Precondition(format!(
            "requires A kj / mu < B, got {} >= {b}",
            phi_bound * bp.kj / bp.mu
        )));
    }
    if bp.qbar <= 0.0 {
        return Err(Error::Precondition("requires qbar > 0".into()));
    }
    let t1 = invert_increasing(|t| ratio_linear(bp, t), b / phi_bound, 1e-12, 1.0 / bp.mu)?;
    let n = 4001;
    let mut max = f64::NEG_INFINITY;
    for i in 0..n {
        let t = t1 * i as f64 / (n - 1) as f64;
        let g = bp.mu * ((-bp.mu * t).exp() * b + phi_bound * forcing_linear(bp, t));
        max = max.max(g);
    }
    let target = bp.mu * b;
    let margin = 1e-9 - (max - target).abs() / target;
    Ok(NamedCheck::new(
        "max of decay-plus-forcing envelope equals mu B",
        n,
        margin,
    ))
}
