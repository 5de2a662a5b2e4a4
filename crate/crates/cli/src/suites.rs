//! Verification suites driven by `sddde verify`. Each suite returns a JSON
//! report plus an aggregate pass flag; gated checks decide the exit code.

use sddde::checks;
use sddde::ensemble::{member_seed, try_indexed_map};
use sddde::funcs::SpeedField;
use sddde::history::{History, HistoryPair};
use sddde::integrator::SolverConfig;
use sddde::invariance::{
    self, forcing_max_check, lemma_grid_checks, log_grid, verify_invariance, InvarianceBudget,
};
use sddde::model::ModelParams;
use sddde::report::{CheckSet, NamedCheck};
use sddde::retraction::{check_feedback, counterexample_report, retract, DomainSpec};
use sddde::threshold::{
    default_inner_step, solve_maturation, solve_maturation_with_step, GridSpec, MaturationField,
};
use sddde::Result;
use serde_json::json;

pub struct SuiteOutcome {
    pub name: &'static str,
    pub report: serde_json::Value,
    pub pass: bool,
}

/// Clamping-retraction contraction properties on a mixed-sign ensemble,
/// the boundary feedback check of the model right-hand side, and the
/// non-closed-image fixture (reported, ungated).
pub fn retraction_suite(
    params: &ModelParams,
    ensemble: usize,
    seed: u64,
) -> Result<SuiteOutcome> {
    let spec = DomainSpec::nonnegative(1);
    let h = params.history_length();

    struct Margins {
        lip: f64,
        distance: f64,
        idempotent: bool,
    }
    let outcomes = try_indexed_map(ensemble, |i| {
        let s = member_seed(seed, i);
        let phi = History::random_lipschitz_in(s, h, 1, -2.0, 2.0, 6.0, 9)?;
        let chi = History::random_lipschitz_in(s ^ 0xb5f3_c6a7, h, 1, -2.0, 2.0, 6.0, 7)?;
        let r_phi = retract(&phi, &spec)?;
        let r_chi = retract(&chi, &spec)?;
        Ok(Margins {
            lip: phi.lip() - r_phi.lip(),
            distance: phi.sup_distance(&chi)? + 1e-12 - r_phi.sup_distance(&r_chi)?,
            idempotent: retract(&r_phi, &spec)? == r_phi,
        })
    })?;
    let lip_margin = outcomes.iter().map(|m| m.lip).fold(f64::INFINITY, f64::min);
    let dist_margin = outcomes
        .iter()
        .map(|m| m.distance)
        .fold(f64::INFINITY, f64::min);
    let idempotent = outcomes.iter().all(|m| m.idempotent);

    // Boundary feedback: stem cell component at zero, then the mature
    // component at zero.
    let mut samples = Vec::new();
    for i in 0..8u64 {
        let s = member_seed(seed ^ 0x77, i as usize);
        let free = History::random_lipschitz(s, h, 1, 1.0, 2.0, 7)?;
        let mut pinned = History::random_lipschitz(s ^ 1, h, 1, 1.0, 2.0, 7)?;
        // Force the value at 0 onto the boundary, keeping nonnegativity.
        let offset = pinned.eval(0.0)?;
        pinned = retract(&pinned.shift_values(-offset), &spec)?;
        let (phi, psi) = if i % 2 == 0 {
            (pinned, free)
        } else {
            (free, pinned)
        };
        let pair = HistoryPair::new(phi, psi)?;
        let times = pair.phi().times().to_vec();
        samples.push(History::new(
            h,
            times,
            vec![
                pair.phi().component(0).to_vec(),
                pair.psi().component(0).to_vec(),
            ],
        )?);
    }
    let feedback = check_feedback(
        |state| params.rhs_state(state),
        &DomainSpec::nonnegative(2),
        &samples,
    )?;

    let fixture = counterexample_report(&[2, 4, 8, 16, 32])?;

    let checks = CheckSet::new(vec![
        NamedCheck::new("lip never grows under clamping", ensemble, lip_margin),
        NamedCheck::new("clamping is 1-Lipschitz", ensemble, dist_margin),
        NamedCheck::new(
            "clamping is idempotent node-exactly",
            ensemble,
            if idempotent { 0.0 } else { -1.0 },
        ),
        NamedCheck::new(
            "boundary feedback nonnegative",
            feedback.samples.len(),
            if feedback.all_pass { 0.0 } else { -1.0 },
        ),
    ]);
    let pass = checks.all_pass;
    Ok(SuiteOutcome {
        name: "retraction",
        report: json!({
            "checks": checks,
            "feedback": feedback,
            "non_closed_image_fixture": fixture,
        }),
        pass,
    })
}

/// Speed-field diagnostics, the delay bracket/residual ensemble with a
/// step-halved reference, and the constant-speed analytic case.
pub fn threshold_suite(params: &ModelParams, ensemble: usize, seed: u64) -> Result<SuiteOutcome> {
    let field = params.field();
    let h = params.history_length();
    let diagnostics = field.validate(&GridSpec::with_z_max(110.0));
    let (tau_lo, tau_hi) = field.tau_bounds();

    struct Member {
        bracket_margin: f64,
        residual: f64,
        reference_dev: f64,
    }
    let outcomes = try_indexed_map(ensemble, |i| {
        let psi = History::random_lipschitz(member_seed(seed, i), h, 1, 2.0, 4.0, 9)?;
        let res = solve_maturation(field, &psi, None)?;
        let fine = solve_maturation_with_step(field, &psi, None, default_inner_step(field) / 2.0)?;
        Ok(Member {
            bracket_margin: (res.tau - tau_lo).min(tau_hi - res.tau),
            residual: res.residual,
            reference_dev: (res.tau - fine.tau).abs() / fine.tau,
        })
    })?;
    let bracket_margin = outcomes
        .iter()
        .map(|m| m.bracket_margin)
        .fold(f64::INFINITY, f64::min);
    let worst_residual = outcomes.iter().map(|m| m.residual).fold(0.0, f64::max);
    let worst_ref_dev = outcomes
        .iter()
        .map(|m| m.reference_dev)
        .fold(0.0, f64::max);

    // Unit-speed fixture: thresholds half a unit apart, delay exactly 1/2.
    let unit = MaturationField::new(0.5, 1.0, 1.0, 1.1, 0.9, SpeedField::Constant(1.0))?;
    let psi = History::constant(unit.history_length(), 1.0)?;
    let analytic_dev = (solve_maturation(&unit, &psi, None)?.tau - 0.5).abs();

    let checks = CheckSet::new(vec![
        NamedCheck::new(
            "speed-field conditions on the grid",
            diagnostics.grid_points,
            if diagnostics.all_pass() { 0.0 } else { -1.0 },
        ),
        NamedCheck::new("delay inside its bracket", ensemble, bracket_margin),
        NamedCheck::new(
            "crossing residual below 1e-9",
            ensemble,
            1e-9 - worst_residual,
        ),
        NamedCheck::new(
            "step-halved delay agreement below 1e-8",
            ensemble,
            1e-8 - worst_ref_dev,
        ),
        NamedCheck::new("unit-speed delay exact to 1e-10", 1, 1e-10 - analytic_dev),
    ]);
    let pass = checks.all_pass;
    Ok(SuiteOutcome {
        name: "threshold",
        report: json!({
            "checks": checks,
            "field_diagnostics": diagnostics,
            "tau_bracket": [tau_lo, tau_hi],
        }),
        pass,
    })
}

/// Closed-form inequality grid, the envelope-maximum identity, budget and
/// horizon ordering, and the compact-set ensembles for all three budget
/// constructions.
pub fn invariance_suite(
    params: &ModelParams,
    ensemble: usize,
    seed: u64,
    horizon: f64,
    config: &SolverConfig,
) -> Result<SuiteOutcome> {
    let bp = params.bound_params();
    let grid = log_grid(1e-6, (30.0 / bp.mu).min(500.0 / bp.qbar.max(1e-3)), 1200);
    let mut named = lemma_grid_checks(&bp, &grid).checks;
    named.push(forcing_max_check(&bp, 1.0, 2.0 * bp.kj / bp.mu)?);

    // Budget ordering at the suite horizon.
    let (b_d, r_d) = invariance::budget_linear(&bp, 1.0, horizon);
    let (b_e, r_e) = invariance::budget_threshold(&bp, 1.0, horizon);
    named.push(NamedCheck::new("threshold bound below linear bound", 1, b_d - b_e));
    named.push(NamedCheck::new("threshold lip cap at most linear cap", 1, r_d - r_e));
    let hz = invariance::horizons(&bp, 1.0, 2.0 * bp.kj / bp.mu, 2.0 * bp.kj)?;
    named.push(NamedCheck::new("threshold horizon beyond linear horizon", 1, hz.t_e - hz.t_d));

    let budgets = [
        ("linear", InvarianceBudget::tightest_linear(&bp, 1.0, horizon)?),
        (
            "threshold",
            InvarianceBudget::tightest_threshold(&bp, 1.0, horizon)?,
        ),
        (
            "uniform-horizon",
            InvarianceBudget::from_delta_horizon(
                &bp,
                1.0,
                1.5 * bp.kj / bp.mu,
                1.5 * bp.kj,
            )?,
        ),
    ];
    let mut reports = Vec::new();
    for (label, budget) in &budgets {
        let report = verify_invariance(params, budget, ensemble, seed, config)?;
        named.push(NamedCheck::new(
            format!("compact-set ensemble ({label})"),
            ensemble,
            if report.all_pass {
                report.v_value_worst_margin.min(report.v_lip_worst_margin)
            } else {
                -1.0
            },
        ));
        reports.push(json!({ "budget": budget, "label": label, "report": report }));
    }

    let checks = CheckSet::new(named);
    let pass = checks.all_pass;
    Ok(SuiteOutcome {
        name: "invariance",
        report: json!({ "checks": checks, "ensembles": reports }),
        pass,
    })
}

/// Semigroup identity, continuous dependence, Lipschitz propagation, and the
/// equilibrium-limit certificate.
pub fn semiflow_suite(
    params: &ModelParams,
    samples: usize,
    seed: u64,
    config: &SolverConfig,
) -> Result<SuiteOutcome> {
    let h = params.history_length();
    let step = config.resolved_step(params)?;

    let mut reports = Vec::new();
    let mut worst_semigroup = 0.0_f64;
    let mut identity_exact = true;
    for i in 0..samples {
        let s_seed = member_seed(seed, i);
        let pair = HistoryPair::random(s_seed, h, 1.0, 1.5, 1.0, 1.5, 9)?;
        let s = step * (4 + (i % 5)) as f64;
        let t = step * (6 + (i % 7)) as f64;
        let rep = checks::check_semigroup(params, &pair, s, t, config)?;
        worst_semigroup = worst_semigroup.max(rep.worst_residual.unwrap_or(f64::INFINITY));
        identity_exact &= sddde::integrator::semiflow(params, &pair, 0.0, config)? == pair;
        reports.push(rep);
    }

    let pair = HistoryPair::random(member_seed(seed, 1000), h, 1.0, 1.5, 1.0, 1.5, 9)?;
    let scales: Vec<f64> = (0..5).map(|k| 1e-2 * 0.5_f64.powi(k)).collect();
    let dependence =
        checks::check_continuous_dependence(params, &pair, &scales, 3.0 * h, seed ^ 0x9a, config)?;
    let lip = checks::check_lip_propagation(
        params,
        &pair,
        &[2.0 * step, h, 2.0 * h, 3.0 * h],
        config,
    )?;
    let limit = checks::certify_equilibrium_limit(params, &pair, 8.0 * h, config)?;

    let checks_set = CheckSet::new(vec![
        NamedCheck::new(
            "semigroup residual below 1e-7",
            samples,
            checks::SEMIGROUP_TOL - worst_semigroup,
        ),
        NamedCheck::new(
            "time-zero map is the identity",
            samples,
            if identity_exact { 0.0 } else { -1.0 },
        ),
        NamedCheck::new(
            "continuous dependence decays",
            scales.len(),
            if dependence.pass { 0.0 } else { -1.0 },
        ),
        NamedCheck::new(
            "Lipschitz propagation bound",
            4,
            if lip.pass { 0.0 } else { -1.0 },
        ),
        NamedCheck::new(
            "equilibrium-limit certificate",
            1,
            if limit.pass { 0.0 } else { -1.0 },
        ),
    ]);
    let pass = checks_set.all_pass;
    Ok(SuiteOutcome {
        name: "semiflow",
        report: json!({
            "checks": checks_set,
            "semigroup": reports,
            "continuous_dependence": dependence,
            "lip_propagation": lip,
            "equilibrium_limit": limit,
        }),
        pass,
    })
}
