//! Property experiments for the semiflow induced by the delay system:
//! semigroup identity, continuous dependence on initial data, Lipschitz
//! propagation, and the equilibrium-limit certificate.

use crate::error::{Error, Result};
use crate::history::{History, HistoryPair};
use crate::integrator::{detect_equilibrium, integrate, semiflow, SolverConfig};
use crate::model::ModelParams;
use crate::retraction::{retract, DomainSpec};
use serde::Serialize;

/// Residual threshold of the semigroup check on step-matched paths.
pub const SEMIGROUP_TOL: f64 = 1e-7;

/// Outcome of one property experiment. Reports are deterministic given the
/// inputs and any seed they were built from.
#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub parameters: serde_json::Value,
    pub samples: usize,
    pub worst_residual: Option<f64>,
    pub threshold: f64,
    pub pass: bool,
    pub note: Option<String>,
}

impl CheckReport {
    fn passing(name: &str, parameters: serde_json::Value, samples: usize, worst: f64, threshold: f64) -> Self {
        CheckReport {
            name: name.into(),
            parameters,
            samples,
            worst_residual: Some(worst),
            threshold,
            pass: worst <= threshold,
            note: None,
        }
    }
}

/// Compares the one-shot path `S(s + t, pair)` against the composed path
/// `S(t, S(s, pair))` in the sup-norm. Exact (residual zero) for `s = 0`;
/// for positive multiples of the step the two integrations are step-matched
/// and agree within [`SEMIGROUP_TOL`].
pub fn check_semigroup(
    params: &ModelParams,
    pair: &HistoryPair,
    s: f64,
    t: f64,
    config: &SolverConfig,
) -> Result<CheckReport> {
    if s < 0.0 || t < 0.0 {
        return Err(Error::Precondition(format!(
            "semigroup times must be nonnegative, got ({s}, {t})"
        )));
    }
    let one_shot = semiflow(params, pair, s + t, config)?;
    let mid = semiflow(params, pair, s, config)?;
    let composed = semiflow(params, &mid, t, config)?;
    let residual = one_shot.sup_distance(&composed)?;
    Ok(CheckReport::passing(
        "semigroup identity",
        serde_json::json!({ "s": s, "t": t }),
        1,
        residual,
        SEMIGROUP_TOL,
    ))
}

/// Perturbs the initial pair along a fixed random direction at a sequence of
/// shrinking scales, and requires the solution deviations on `[0, t_final]`
/// to decrease strictly; with five or more halvings the total reduction must
/// reach a factor of ten. No rate is asserted.
pub fn check_continuous_dependence(
    params: &ModelParams,
    pair: &HistoryPair,
    scales: &[f64],
    t_final: f64,
    seed: u64,
    config: &SolverConfig,
) -> Result<CheckReport> {
    if scales.is_empty() || scales.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Precondition(
            "perturbation scales must be strictly decreasing".into(),
        ));
    }
    let h = params.history_length();
    let spec = DomainSpec::nonnegative(1);
    // One fixed direction, normalized to unit sup-norm.
    let raw_phi = History::random_lipschitz_in(seed, h, 1, -1.0, 1.0, 4.0, 9)?;
    let raw_psi = History::random_lipschitz_in(seed ^ 0x00c0_ffee, h, 1, -1.0, 1.0, 4.0, 9)?;
    let norm = raw_phi.sup_norm().max(raw_psi.sup_norm());
    if norm == 0.0 {
        return Err(Error::Precondition("degenerate perturbation direction".into()));
    }
    let dir_phi = raw_phi.scale(1.0 / norm);
    let dir_psi = raw_psi.scale(1.0 / norm);

    let base = integrate(params, pair, t_final, config)?;
    let mut deviations = Vec::with_capacity(scales.len());
    let mut distances = Vec::with_capacity(scales.len());
    for &scale in scales {
        let perturbed = HistoryPair::new(
            retract(&pair.phi().add(&dir_phi.scale(scale))?, &spec)?,
            retract(&pair.psi().add(&dir_psi.scale(scale))?, &spec)?,
        )?;
        distances.push(perturbed.sup_distance(pair)?);
        let traj = integrate(params, &perturbed, t_final, config)?;
        let mut dev = 0.0_f64;
        let samples = 200;
        for k in 0..=samples {
            let t = t_final * k as f64 / samples as f64;
            let (w0, v0) = base.state_at(t)?;
            let (w1, v1) = traj.state_at(t)?;
            dev = dev.max((w0 - w1).abs()).max((v0 - v1).abs());
        }
        deviations.push(dev);
    }
    let monotone = deviations.windows(2).all(|w| w[1] < w[0]);
    let reduction_ok = if scales.len() >= 5 {
        deviations.last().unwrap() * 10.0 <= deviations[0]
    } else {
        true
    };
    Ok(CheckReport {
        name: "continuous dependence".into(),
        parameters: serde_json::json!({
            "scales": scales,
            "initial_distances": distances,
            "deviations": deviations,
            "t_final": t_final,
            "seed": seed,
        }),
        samples: scales.len(),
        worst_residual: Some(*deviations.last().unwrap()),
        threshold: deviations[0] / 10.0,
        pass: monotone && reduction_ok,
        note: (!monotone).then(|| "deviations are not strictly decreasing".into()),
    })
}

/// Runs the trajectory out to `t_max` and, when a flat tail is detected,
/// certifies that the detected limit is an equilibrium:
/// `||rhs(limit)|| <= 1e-6 (1 + |limit|)`. Absence of a detected limit is
/// inconclusive, not a failure.
pub fn certify_equilibrium_limit(
    params: &ModelParams,
    pair: &HistoryPair,
    t_max: f64,
    config: &SolverConfig,
) -> Result<CheckReport> {
    let window = (2.0 * params.history_length()).min(t_max / 2.0);
    let traj = integrate(params, pair, t_max, config)?;
    match detect_equilibrium(params, &traj, window, None)? {
        Some(est) => {
            let threshold = 1e-6 * (1.0 + est.w.abs().max(est.v.abs()));
            Ok(CheckReport {
                name: "equilibrium-limit certificate".into(),
                parameters: serde_json::json!({
                    "t_max": t_max,
                    "limit": [est.w, est.v],
                    "total_variation": est.total_variation,
                }),
                samples: 1,
                worst_residual: Some(est.residual),
                threshold,
                pass: est.residual <= threshold,
                note: None,
            })
        }
        None => Ok(CheckReport {
            name: "equilibrium-limit certificate".into(),
            parameters: serde_json::json!({ "t_max": t_max }),
            samples: 1,
            worst_residual: None,
            threshold: 0.0,
            pass: true,
            note: Some("inconclusive: no flat tail detected".into()),
        }),
    }
}

/// Verifies along one trajectory that segment Lipschitz constants never
/// exceed `max(lip(initial), sup |derivative|)` (within `1e-9` relative).
pub fn check_lip_propagation(
    params: &ModelParams,
    pair: &HistoryPair,
    t_grid: &[f64],
    config: &SolverConfig,
) -> Result<CheckReport> {
    let t_max = t_grid.iter().copied().fold(0.0_f64, f64::max);
    let traj = integrate(params, pair, t_max, config)?;
    let mut worst = f64::NEG_INFINITY;
    for &t in t_grid {
        let seg = traj.segment_at(t, config.segment_samples)?;
        let (dw, dv) = traj.max_abs_derivative(0.0, t);
        let bound = pair.lip().max(dw.max(dv)) * (1.0 + 1e-9);
        worst = worst.max(seg.lip() - bound);
    }
    Ok(CheckReport {
        name: "Lipschitz propagation".into(),
        parameters: serde_json::json!({ "t_grid": t_grid }),
        samples: t_grid.len(),
        worst_residual: Some(worst),
        threshold: 0.0,
        pass: worst <= 0.0,
        note: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcs::{CoefFn, SpeedField};
    use crate::model::IngredientSet;
    use crate::threshold::MaturationField;

    fn default_params() -> ModelParams {
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
        let ing = IngredientSet::new(
            1.0,
            1.0,
            0.1,
            1.0,
            0.5,
            0.5,
            CoefFn::Constant(0.4),
            CoefFn::Constant(0.1),
        )
        .unwrap();
        ModelParams::new(ing, field, 1.0).unwrap()
    }

    #[test]
    fn semigroup_zero_shift_is_exact() {
        let params = default_params();
        let pair = HistoryPair::random(3, params.history_length(), 1.0, 1.0, 1.0, 1.0, 7).unwrap();
        let config = SolverConfig::default();
        let report = check_semigroup(&params, &pair, 0.0, 0.5, &config).unwrap();
        assert_eq!(report.worst_residual, Some(0.0));
    }

    #[test]
    fn semigroup_on_equilibrium_is_tiny() {
        let params = default_params();
        let (w, v) = params.positive_equilibrium().unwrap().unwrap();
        let pair = HistoryPair::constant(params.history_length(), w, v).unwrap();
        let config = SolverConfig::default();
        let report = check_semigroup(&params, &pair, 0.4, 0.4, &config).unwrap();
        assert!(report.worst_residual.unwrap() <= 1e-12, "{report:?}");
    }

    #[test]
    fn semigroup_step_matched_random_pair() {
        let params = default_params();
        let h = params.history_length();
        let pair = HistoryPair::random(17, h, 1.0, 1.0, 1.0, 1.0, 9).unwrap();
        let config = SolverConfig::default();
        let step = config.resolved_step(&params).unwrap();
        let (s, t) = (8.0 * step, 12.0 * step);
        let report = check_semigroup(&params, &pair, s, t, &config).unwrap();
        assert!(report.pass, "{report:?}");

        // Swapping (s, t) changes the residual by at most a factor of two
        // (plus floating-point floor).
        let swapped = check_semigroup(&params, &pair, t, s, &config).unwrap();
        let a = report.worst_residual.unwrap();
        let b = swapped.worst_residual.unwrap();
        assert!(b <= 2.0 * a + 1e-12 && a <= 2.0 * b + 1e-12, "{a} vs {b}");
    }

    #[test]
    fn continuous_dependence_decays() {
        let params = default_params();
        let h = params.history_length();
        let pair = HistoryPair::random(23, h, 1.0, 1.0, 1.0, 1.0, 9).unwrap();
        let config = SolverConfig::default();
        let scales: Vec<f64> = (0..5).map(|k| 1e-2 * 0.5_f64.powi(k)).collect();
        let report =
            check_continuous_dependence(&params, &pair, &scales, 3.0 * h, 7, &config).unwrap();
        assert!(report.pass, "{report:?}");

        // Zero perturbation sanity: identical trajectory.
        let base = integrate(&params, &pair, h, &config).unwrap();
        let again = integrate(&params, &pair, h, &config).unwrap();
        let (w0, v0) = base.state_at(h).unwrap();
        let (w1, v1) = again.state_at(h).unwrap();
        assert_eq!((w0, v0), (w1, v1));
    }

    #[test]
    fn continuous_dependence_linear_regime_scales_linearly() {
        // Decoupled linear system: deviation / scale is constant.
        let ing = IngredientSet::new(
            1.0,
            0.5,
            0.1,
            0.0,
            0.0,
            0.5,
            CoefFn::Constant(0.4),
            CoefFn::Constant(0.1),
        )
        .unwrap();
        let field = MaturationField::new(
            0.8,
            1.0,
            0.5,
            1.0,
            0.5,
            SpeedField::Exponential {
                floor: 0.55,
                gamma: CoefFn::Constant(0.35),
            },
        )
        .unwrap();
        let params = ModelParams::new(ing, field, 1.0).unwrap();
        let h = params.history_length();
        let pair = HistoryPair::random(29, h, 1.0, 1.0, 1.0, 1.0, 9).unwrap();
        let config = SolverConfig::default();
        let scales: Vec<f64> = (0..4).map(|k| 1e-2 * 0.5_f64.powi(k)).collect();
        let report =
            check_continuous_dependence(&params, &pair, &scales, 2.0 * h, 11, &config).unwrap();
        assert!(report.pass);
        let devs: Vec<f64> = serde_json::from_value(report.parameters["deviations"].clone()).unwrap();
        let ratios: Vec<f64> = devs
            .iter()
            .zip(scales.iter())
            .map(|(d, s)| d / s)
            .collect();
        for pair in ratios.windows(2) {
            assert!(
                (pair[0] - pair[1]).abs() <= 0.1 * pair[0].abs(),
                "response not linear: {ratios:?}"
            );
        }
    }

    #[test]
    fn equilibrium_certificate_certifies_and_reports_inconclusive() {
        let params = default_params();
        let h = params.history_length();
        let config = SolverConfig::default();

        // Start at the trivial equilibrium: certified immediately.
        let zero = HistoryPair::constant(h, 0.0, 0.0).unwrap();
        let report = certify_equilibrium_limit(&params, &zero, 3.0 * h, &config).unwrap();
        assert!(report.pass && report.worst_residual.is_some());
        assert!(report.worst_residual.unwrap() <= 1e-9);

        // A transient far from settled within the window: inconclusive.
        let pair = HistoryPair::random(31, h, 1.0, 1.0, 1.0, 1.0, 7).unwrap();
        let report = certify_equilibrium_limit(&params, &pair, 3.0 * h, &config).unwrap();
        assert!(report.note.is_some(), "{report:?}");
        assert!(report.pass);
    }

    #[test]
    fn lip_propagation_short_horizon_dominated_by_history() {
        let params = default_params();
        let h = params.history_length();
        // Steep initial pair, short horizon: the history carries the slope.
        let pair = HistoryPair::random(37, h, 1.0, 8.0, 1.0, 8.0, 11).unwrap();
        let config = SolverConfig::default();
        let step = config.resolved_step(&params).unwrap();
        let report =
            check_lip_propagation(&params, &pair, &[step, 2.0 * step, h], &config).unwrap();
        assert!(report.pass, "{report:?}");

        // Constant pair: lip stays at solver-noise level.
        let (w, v) = params.positive_equilibrium().unwrap().unwrap();
        let eq = HistoryPair::constant(h, w, v).unwrap();
        let traj = integrate(&params, &eq, h, &config).unwrap();
        let seg = traj.segment_at(h, config.segment_samples).unwrap();
        assert!(seg.lip() <= 1e-10, "equilibrium lip {}", seg.lip());
    }
}
