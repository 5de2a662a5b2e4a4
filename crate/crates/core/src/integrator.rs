//! Method-of-steps integration of the two-component delay system, dense
//! trajectory output, the induced semiflow map, and long-time diagnostics.
//!
//! The outer method is the classical fourth-order one-step scheme with a
//! cubic Hermite continuous extension. The step never exceeds the lower
//! delay bound, so every *delayed* evaluation falls into already-computed
//! territory. The delay functional itself, however, inspects the inhibitor
//! segment all the way up to the current time: values inside the step being
//! computed are served by a predictor extension (an Euler ray from the step
//! start), after which the whole step is re-evaluated `corrector_passes`
//! times against its own Hermite candidate.

use crate::dense::CubicSeg;
use crate::error::{Error, Result};
use crate::history::{History, HistoryPair};
use crate::model::ModelParams;
use crate::threshold::{self, PsiSource};
use serde::Serialize;
use std::io::{self, Write};

/// Configuration of the outer integrator.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SolverConfig {
    /// Outer step; `None` resolves to `min(tau_lower, h) / 8`. Must not
    /// exceed the lower delay bound.
    pub step: Option<f64>,
    /// Full re-evaluations of each step against its own dense candidate.
    pub corrector_passes: usize,
    /// Tolerance for locating the inner threshold crossing.
    pub root_tol: f64,
    /// Positivity slack: state components may not drop below `-residual_tol`.
    pub residual_tol: f64,
    /// Dense samples per step when extracting a piecewise-linear segment.
    pub segment_samples: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            step: None,
            corrector_passes: 1,
            root_tol: 1e-12,
            residual_tol: 1e-9,
            segment_samples: 64,
        }
    }
}

impl SolverConfig {
    pub fn with_step(step: f64) -> Self {
        SolverConfig {
            step: Some(step),
            ..SolverConfig::default()
        }
    }

    /// The effective outer step; explicitness requires `step <= tau_lower`.
    pub fn resolved_step(&self, params: &ModelParams) -> Result<f64> {
        let tau_lower = params.tau_lower();
        let fallback = tau_lower.min(params.history_length()) / 8.0;
        let step = self.step.unwrap_or(fallback);
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "outer step must be positive, got {step}"
            )));
        }
        if step > tau_lower * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "outer step {step} exceeds the lower delay bound {tau_lower}"
            )));
        }
        if self.corrector_passes == 0 {
            return Err(Error::InvalidParameter(
                "corrector_passes must be at least 1".into(),
            ));
        }
        Ok(step)
    }
}

/// One committed step: Hermite data for both components.
#[derive(Clone, Copy, Debug)]
struct Step {
    t0: f64,
    t1: f64,
    w0: f64,
    v0: f64,
    w1: f64,
    v1: f64,
    dw0: f64,
    dv0: f64,
    dw1: f64,
    dv1: f64,
}

impl Step {
    fn w_seg(&self) -> CubicSeg {
        CubicSeg {
            t0: self.t0,
            t1: self.t1,
            y0: self.w0,
            y1: self.w1,
            d0: self.dw0,
            d1: self.dw1,
        }
    }

    fn v_seg(&self) -> CubicSeg {
        CubicSeg {
            t0: self.t0,
            t1: self.t1,
            y0: self.v0,
            y1: self.v1,
            d0: self.dv0,
            d1: self.dv1,
        }
    }
}

/// Dense solution on `[-h, t_end]`: the initial pair on `[-h, 0]` plus the
/// committed piecewise-cubic steps.
#[derive(Clone, Debug)]
pub struct Trajectory {
    initial: HistoryPair,
    steps: Vec<Step>,
    t_end: f64,
}

impl Trajectory {
    pub fn initial(&self) -> &HistoryPair {
        &self.initial
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn h(&self) -> f64 {
        self.initial.h()
    }

    fn clamp_t(&self, t: f64) -> Result<f64> {
        let h = self.h();
        if t < -h - 1e-12 * h.max(1.0) || t > self.t_end + 1e-12 * self.t_end.max(1.0) {
            return Err(Error::OutOfDomain {
                point: t,
                lo: -h,
                hi: self.t_end,
            });
        }
        Ok(t.clamp(-h, self.t_end))
    }

    /// `(w(t), v(t))` for `t` in `[-h, t_end]`.
    pub fn state_at(&self, t: f64) -> Result<(f64, f64)> {
        let t = self.clamp_t(t)?;
        if t <= 0.0 || self.steps.is_empty() {
            return Ok((
                self.initial.phi().value_at(t.min(0.0), 0)?,
                self.initial.psi().value_at(t.min(0.0), 0)?,
            ));
        }
        let idx = self
            .steps
            .partition_point(|s| s.t1 < t)
            .min(self.steps.len() - 1);
        let s = &self.steps[idx];
        Ok((s.w_seg().eval(t), s.v_seg().eval(t)))
    }

    /// `(w'(t), v'(t))` from the dense representation, `t` in `[0, t_end]`.
    pub fn derivative_at(&self, t: f64) -> Result<(f64, f64)> {
        if t < 0.0 || self.steps.is_empty() {
            return Err(Error::OutOfDomain {
                point: t,
                lo: 0.0,
                hi: self.t_end,
            });
        }
        let t = self.clamp_t(t)?;
        let idx = self
            .steps
            .partition_point(|s| s.t1 < t)
            .min(self.steps.len() - 1);
        let s = &self.steps[idx];
        Ok((s.w_seg().deriv(t), s.v_seg().deriv(t)))
    }

    /// Exact value ranges `((w_min, w_max), (v_min, v_max))` over
    /// `[from, to]`, combining initial nodes and cubic extrema.
    pub fn value_range(&self, from: f64, to: f64) -> ((f64, f64), (f64, f64)) {
        let mut w = (f64::INFINITY, f64::NEG_INFINITY);
        let mut v = (f64::INFINITY, f64::NEG_INFINITY);
        let fold = |range: (f64, f64), acc: &mut (f64, f64)| {
            acc.0 = acc.0.min(range.0);
            acc.1 = acc.1.max(range.1);
        };
        if from < 0.0 {
            let hi = to.min(0.0);
            let phi = self.initial.phi();
            let psi = self.initial.psi();
            // Piecewise-linear extrema: nodes inside plus the two endpoints.
            let mut points: Vec<f64> = vec![from.max(-self.h()), hi];
            points.extend(
                phi.times()
                    .iter()
                    .copied()
                    .filter(|&u| u > from && u < hi),
            );
            for &u in &points {
                let wv = phi.value_at(u, 0).expect("inside domain");
                let vv = psi.value_at(u, 0).expect("inside domain");
                fold((wv, wv), &mut w);
                fold((vv, vv), &mut v);
            }
        }
        for s in &self.steps {
            if s.t1 < from || s.t0 > to {
                continue;
            }
            fold(s.w_seg().value_range(from, to), &mut w);
            fold(s.v_seg().value_range(from, to), &mut v);
        }
        (w, v)
    }

    /// Exact maxima of `(|w'|, |v'|)` over `[from, to]` (intersected with
    /// `[0, t_end]`), from the dense representation.
    pub fn max_abs_derivative(&self, from: f64, to: f64) -> (f64, f64) {
        let mut w = 0.0_f64;
        let mut v = 0.0_f64;
        for s in &self.steps {
            if s.t1 < from || s.t0 > to {
                continue;
            }
            w = w.max(s.w_seg().max_abs_deriv(from, to));
            v = v.max(s.v_seg().max_abs_deriv(from, to));
        }
        (w, v)
    }

    /// Smallest state value anywhere on `[-h, t_end]`.
    pub fn min_state(&self) -> f64 {
        let ((w_min, _), (v_min, _)) = self.value_range(-self.h(), self.t_end);
        w_min.min(v_min)
    }

    /// Step log: `(t, (w, v), (w', v'))` at step starts plus the endpoint.
    pub fn step_log(&self) -> Vec<(f64, (f64, f64), (f64, f64))> {
        let mut out: Vec<_> = self
            .steps
            .iter()
            .map(|s| (s.t0, (s.w0, s.v0), (s.dw0, s.dv0)))
            .collect();
        if let Some(last) = self.steps.last() {
            out.push((last.t1, (last.w1, last.v1), (last.dw1, last.dv1)));
        }
        out
    }

    /// Extracts the solution segment at time `t` as a piecewise-linear pair
    /// on `[-h, 0]`: initial nodes are reproduced exactly where the segment
    /// overlaps the initial interval, and each integration step contributes
    /// `samples_per_step` dense samples. `segment_at(0)` returns the initial
    /// pair node-for-node.
    pub fn segment_at(&self, t: f64, samples_per_step: usize) -> Result<HistoryPair> {
        if t == 0.0 {
            return Ok(self.initial.clone());
        }
        let t = self.clamp_t(t)?;
        if t < 0.0 {
            return Err(Error::OutOfDomain {
                point: t,
                lo: 0.0,
                hi: self.t_end,
            });
        }
        let h = self.h();
        let lo = t - h;
        let mut times: Vec<f64> = vec![lo];
        if lo < 0.0 {
            times.extend(
                self.initial
                    .phi()
                    .times()
                    .iter()
                    .copied()
                    .filter(|&u| u > lo && u <= 0.0),
            );
        }
        let samples = samples_per_step.max(1);
        for s in &self.steps {
            let a = s.t0.max(lo.max(0.0));
            let b = s.t1.min(t);
            if a >= b {
                continue;
            }
            let full = s.t1 - s.t0;
            let n = ((samples as f64) * (b - a) / full).ceil().max(1.0) as usize;
            for k in 1..=n {
                times.push(a + (b - a) * k as f64 / n as f64);
            }
        }
        // Strictly increasing with exact endpoints.
        let tol = 1e-12 * h.max(1.0);
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        times.dedup_by(|a, b| (*a - *b).abs() <= tol);
        if (times[0] - lo).abs() <= tol {
            times[0] = lo;
        }
        let n = times.len() - 1;
        if (times[n] - t).abs() <= tol {
            times[n] = t;
        }

        let mut w_vals = Vec::with_capacity(times.len());
        let mut v_vals = Vec::with_capacity(times.len());
        for &u in &times {
            let (w, v) = self.state_at(u)?;
            w_vals.push(w);
            v_vals.push(v);
        }
        let shifted: Vec<f64> = {
            let mut s: Vec<f64> = times.iter().map(|&u| u - t).collect();
            s[0] = -h;
            let n = s.len() - 1;
            s[n] = 0.0;
            s
        };
        // Interior samples of the computed solution are smooth; only kinks
        // inherited from the initial interval (and the junction at time
        // zero) are genuine.
        let mut kinks: Vec<f64> = self
            .initial
            .kink_times()
            .into_iter()
            .chain(std::iter::once(0.0))
            .map(|u| u - t)
            .filter(|&s| s > -h && s <= 0.0)
            .collect();
        kinks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        kinks.dedup();
        HistoryPair::new(
            History::new(h, shifted.clone(), vec![w_vals])?.with_kink_times(kinks.clone()),
            History::new(h, shifted, vec![v_vals])?.with_kink_times(kinks),
        )
    }

    /// Writes rows `t,w,v` on the grid `0, dt, 2dt, ..., t_end`.
    /// Returns the number of data rows.
    pub fn write_csv<W: Write>(&self, out: &mut W, output_dt: f64) -> io::Result<usize> {
        writeln!(out, "t,w,v")?;
        let mut rows = 0;
        let mut k = 0usize;
        loop {
            let t = (k as f64 * output_dt).min(self.t_end);
            let (w, v) = self
                .state_at(t)
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e.to_string()))?;
            writeln!(out, "{t},{w},{v}")?;
            rows += 1;
            if t >= self.t_end {
                break;
            }
            k += 1;
            if k as f64 * output_dt > self.t_end + 1e-9 * output_dt {
                // Final partial row lands exactly on t_end next iteration.
                let (w, v) = self
                    .state_at(self.t_end)
                    .map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e.to_string()))?;
                writeln!(out, "{},{w},{v}", self.t_end)?;
                rows += 1;
                break;
            }
        }
        Ok(rows)
    }
}

/// Committed dense lookups during integration.
struct Committed<'a> {
    initial: &'a HistoryPair,
    steps: &'a [Step],
}

impl Committed<'_> {
    fn state(&self, t: f64) -> (f64, f64) {
        if t <= 0.0 || self.steps.is_empty() {
            let u = t.max(-self.initial.h()).min(0.0);
            return (
                self.initial.phi().value_at(u, 0).expect("inside domain"),
                self.initial.psi().value_at(u, 0).expect("inside domain"),
            );
        }
        let idx = self
            .steps
            .partition_point(|s| s.t1 < t)
            .min(self.steps.len() - 1);
        let s = &self.steps[idx];
        let t = t.min(s.t1);
        (s.w_seg().eval(t), s.v_seg().eval(t))
    }
}

/// Within-step extension used while the current step is being evaluated.
enum Ext {
    None,
    Euler {
        t0: f64,
        w0: f64,
        v0: f64,
        dw: f64,
        dv: f64,
    },
    Herm(Step),
}

impl Ext {
    fn state(&self, t: f64) -> (f64, f64) {
        match self {
            Ext::None => unreachable!("extension queried before any was installed"),
            Ext::Euler { t0, w0, v0, dw, dv } => (w0 + (t - t0) * dw, v0 + (t - t0) * dv),
            Ext::Herm(step) => (step.w_seg().eval(t), step.v_seg().eval(t)),
        }
    }
}

/// Stage context: committed dense up to `t_base`, extension on
/// `(t_base, stage_time]`. The stage values feed the pointwise factors of
/// the right-hand side; the delay functional reads the dense representation
/// throughout, so each one-step stage sees a smooth time coefficient.
struct StageCtx<'a> {
    committed: Committed<'a>,
    ext: &'a Ext,
    t_base: f64,
    stage_time: f64,
    w_stage: f64,
    v_stage: f64,
}

impl StageCtx<'_> {
    fn state(&self, t: f64) -> (f64, f64) {
        if t <= self.t_base {
            self.committed.state(t)
        } else {
            self.ext.state(t)
        }
    }

    fn w(&self, t: f64) -> f64 {
        self.state(t).0
    }
}

impl PsiSource for StageCtx<'_> {
    fn psi(&self, s: f64) -> f64 {
        self.state(self.stage_time + s).1
    }

    fn kink_radii(&self, horizon: f64) -> Vec<f64> {
        let lo = self.stage_time - horizon;
        let mut out = Vec::new();
        // Genuine kinks of the initial pair, plus the junction with the
        // computed solution at time zero.
        let mut initial_kinks = self.committed.initial.kink_times();
        initial_kinks.push(0.0);
        for u in initial_kinks {
            if u > lo && u < self.stage_time {
                out.push(self.stage_time - u);
            }
        }
        // Committed step boundaries and the extension junction.
        for s in self.committed.steps {
            if s.t0 > lo && s.t0 > 0.0 && s.t0 < self.stage_time {
                out.push(self.stage_time - s.t0);
            }
        }
        if self.t_base > lo && self.t_base > 0.0 && self.t_base < self.stage_time {
            out.push(self.stage_time - self.t_base);
        }
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * horizon);
        out
    }
}

/// Right-hand side at one stage; also returns the delay used (NaN when the
/// renewal flux vanishes identically and the delay solve is skipped).
fn rhs_stage(params: &ModelParams, ctx: &StageCtx<'_>, root_tol: f64) -> Result<(f64, f64, f64)> {
    let (j_value, tau) = if params.sup_gamma() == 0.0 {
        (0.0, f64::NAN)
    } else {
        let inner_step = threshold::default_inner_step(params.field());
        let j = params.j_from_sources(
            &|theta| ctx.w(ctx.stage_time + theta),
            ctx,
            ctx.v_stage,
            inner_step,
            root_tol,
        )?;
        (j.value, j.tau)
    };
    Ok((
        params.q(ctx.v_stage) * ctx.w_stage,
        -params.mu() * ctx.v_stage + j_value,
        tau,
    ))
}

/// The delay at time `t` evaluated on committed steps plus an extension.
fn delay_at(
    params: &ModelParams,
    initial: &HistoryPair,
    steps: &[Step],
    ext: &Ext,
    t_base: f64,
    t: f64,
    root_tol: f64,
) -> Result<f64> {
    let ctx = StageCtx {
        committed: Committed { initial, steps },
        ext,
        t_base,
        stage_time: t,
        w_stage: 0.0,
        v_stage: 0.0,
    };
    let inner_step = threshold::default_inner_step(params.field());
    Ok(threshold::solve_maturation_src(params.field(), &ctx, None, inner_step, root_tol)?.tau)
}

/// Integrates the pair forward to `t_final`. The initial pair must be
/// nonnegative with history length matching the model. Positivity is
/// enforced by assertion (error on violation), never by clamping.
pub fn integrate(
    params: &ModelParams,
    pair: &HistoryPair,
    t_final: f64,
    config: &SolverConfig,
) -> Result<Trajectory> {
    let h = params.history_length();
    if (pair.h() - h).abs() > 1e-12 * h.max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "pair history length {} does not match the model's {h}",
            pair.h()
        )));
    }
    if pair.min_value() < 0.0 {
        return Err(Error::Precondition(format!(
            "initial pair must be nonnegative, min value {}",
            pair.min_value()
        )));
    }
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "final time must be nonnegative, got {t_final}"
        )));
    }
    let step = config.resolved_step(params)?;
    let mut traj = Trajectory {
        initial: pair.clone(),
        steps: Vec::new(),
        t_end: 0.0,
    };
    if t_final == 0.0 {
        return Ok(traj);
    }

    // Step grid: k * step with the last node pinned to t_final.
    let ratio = t_final / step;
    let mut n = ratio.ceil() as usize;
    if (ratio - ratio.round()).abs() < 1e-9 {
        n = ratio.round() as usize;
    }
    let n = n.max(1);
    let grid_time = |k: usize| {
        if k >= n {
            t_final
        } else {
            k as f64 * step
        }
    };

    let mut w0 = pair.phi().eval(0.0)?;
    let mut v0 = pair.psi().eval(0.0)?;
    let (mut dw0, mut dv0, mut tau0) = {
        let ctx = StageCtx {
            committed: Committed {
                initial: &traj.initial,
                steps: &traj.steps,
            },
            ext: &Ext::None,
            t_base: 0.0,
            stage_time: 0.0,
            w_stage: w0,
            v_stage: v0,
        };
        rhs_stage(params, &ctx, config.root_tol)?
    };

    // Breaking points of the first delay sweep: the solution's second
    // derivative jumps where the delayed argument t - tau(v_t) crosses a
    // node of the initial pair (including the junction at 0). Integrating a
    // one-step method across such a point costs two local orders, so those
    // roots become step boundaries. Later sweeps carry jumps only in higher
    // derivatives and are left unaligned.
    let mut pending_kinks: Vec<f64> = if params.sup_gamma() == 0.0 {
        Vec::new() // no delayed coupling at all
    } else {
        let mut kinks = pair.kink_times();
        kinks.push(0.0); // junction of initial data and computed solution
        kinks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        kinks.dedup();
        kinks.retain(|&u| u > -tau0);
        kinks
    };

    let mut k = 0usize;
    let mut t0 = 0.0_f64;
    while k < n {
        let t_target = grid_time(k + 1);
        let mut t1 = t_target;
        let mut splits_left = 32usize;
        loop {
            let dt = t1 - t0;
            if dt <= 0.0 {
                break;
            }
            let mut ext = Ext::Euler {
                t0,
                w0,
                v0,
                dw: dw0,
                dv: dv0,
            };
            let mut candidate: Option<(Step, f64)> = None;
            for _pass in 0..=config.corrector_passes {
                let eval = |time: f64, w: f64, v: f64, ext: &Ext| -> Result<(f64, f64, f64)> {
                    let ctx = StageCtx {
                        committed: Committed {
                            initial: &traj.initial,
                            steps: &traj.steps,
                        },
                        ext,
                        t_base: t0,
                        stage_time: time,
                        w_stage: w,
                        v_stage: v,
                    };
                    rhs_stage(params, &ctx, config.root_tol)
                };
                let tm = t0 + 0.5 * dt;
                let (kw1, kv1) = (dw0, dv0);
                let (kw2, kv2, _) = eval(tm, w0 + 0.5 * dt * kw1, v0 + 0.5 * dt * kv1, &ext)?;
                let (kw3, kv3, _) = eval(tm, w0 + 0.5 * dt * kw2, v0 + 0.5 * dt * kv2, &ext)?;
                let (kw4, kv4, _) = eval(t1, w0 + dt * kw3, v0 + dt * kv3, &ext)?;
                let w1 = w0 + dt / 6.0 * (kw1 + 2.0 * kw2 + 2.0 * kw3 + kw4);
                let v1 = v0 + dt / 6.0 * (kv1 + 2.0 * kv2 + 2.0 * kv3 + kv4);
                if !(w1.is_finite() && v1.is_finite()) {
                    return Err(Error::NonFinite { t: t1 });
                }
                let (dw1, dv1, tau1) = eval(t1, w1, v1, &ext)?;
                let step_rec = Step {
                    t0,
                    t1,
                    w0,
                    v0,
                    w1,
                    v1,
                    dw0,
                    dv0,
                    dw1,
                    dv1,
                };
                ext = Ext::Herm(step_rec);
                candidate = Some((step_rec, tau1));
            }
            let (step_rec, tau1) = candidate.expect("at least one pass runs");

            // Locate the earliest pending kink crossed by the delayed
            // argument inside this step and split there.
            if splits_left > 0 && !pending_kinks.is_empty() && tau0.is_finite() {
                let d0 = t0 - tau0;
                let d1 = t1 - tau1;
                let (lo, hi) = (d0.min(d1), d0.max(d1));
                let crossed = pending_kinks.iter().copied().find(|&u| u > lo && u <= hi);
                if let Some(u) = crossed {
                    let ext = Ext::Herm(step_rec);
                    let mut a = t0;
                    let mut b = t1;
                    // Bisection on t - tau(v_t) - u; the candidate dense is
                    // accurate enough to place the root within a squared
                    // misalignment of the true breaking point.
                    for _ in 0..30 {
                        let mid = 0.5 * (a + b);
                        let d_mid = mid
                            - delay_at(
                                params,
                                &traj.initial,
                                &traj.steps,
                                &ext,
                                t0,
                                mid,
                                config.root_tol,
                            )?;
                        if (d_mid - u) * (d1 - u) <= 0.0 {
                            a = mid;
                        } else {
                            b = mid;
                        }
                    }
                    let xi = 0.5 * (a + b);
                    let margin = 1e-6 * dt;
                    if xi > t0 + margin && xi < t1 - margin {
                        splits_left -= 1;
                        t1 = xi;
                        continue; // redo the shortened step
                    }
                    // Root is already grid-aligned; fall through and retire
                    // the kink below.
                }
            }

            // Positivity assertion on the exact dense range of this step.
            for (component, seg) in [(0usize, step_rec.w_seg()), (1usize, step_rec.v_seg())] {
                let (min, _) = seg.value_range(t0, t1);
                if min < -config.residual_tol {
                    return Err(Error::PositivityViolated {
                        t: t0,
                        component,
                        value: min,
                    });
                }
            }

            traj.steps.push(step_rec);
            traj.t_end = t1;
            w0 = step_rec.w1;
            v0 = step_rec.v1;
            dw0 = step_rec.dw1;
            dv0 = step_rec.dv1;
            if tau1.is_finite() {
                let d1 = t1 - tau1;
                pending_kinks.retain(|&u| u > d1);
                tau0 = tau1;
            }
            t0 = t1;
            if t1 >= t_target {
                break;
            }
            t1 = t_target;
        }
        k += 1;
    }
    Ok(traj)
}

/// The semiflow map: integrate to `t` and extract the segment. `t = 0`
/// returns the pair unchanged.
pub fn semiflow(
    params: &ModelParams,
    pair: &HistoryPair,
    t: f64,
    config: &SolverConfig,
) -> Result<HistoryPair> {
    if t == 0.0 {
        return Ok(pair.clone());
    }
    integrate(params, pair, t, config)?.segment_at(t, config.segment_samples)
}

/// A detected flat tail of a trajectory.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EquilibriumEstimate {
    pub w: f64,
    pub v: f64,
    /// `max(|w'|, |v'|)` of the right-hand side at the constant candidate.
    pub residual: f64,
    pub total_variation: f64,
}

/// Detects an equilibrium limit: if the total variation of both components
/// over the trailing `window` is at most `tol` (default
/// `1e-8 (1 + sup |state|)`), returns the trailing mean together with the
/// right-hand-side residual of the constant candidate. The trajectory must
/// cover at least two windows.
pub fn detect_equilibrium(
    params: &ModelParams,
    traj: &Trajectory,
    window: f64,
    tol: Option<f64>,
) -> Result<Option<EquilibriumEstimate>> {
    if !(window > 0.0) || traj.t_end() < 2.0 * window {
        return Err(Error::Precondition(format!(
            "trajectory must cover two windows: t_end = {}, window = {window}",
            traj.t_end()
        )));
    }
    let lo = traj.t_end() - window;
    let subs = 16;
    let mut ts = Vec::new();
    for s in &traj.steps {
        if s.t1 < lo {
            continue;
        }
        let a = s.t0.max(lo);
        for k in 0..subs {
            ts.push(a + (s.t1 - a) * k as f64 / subs as f64);
        }
    }
    ts.push(traj.t_end());

    let mut tv_w = 0.0;
    let mut tv_v = 0.0;
    let mut sup = 0.0_f64;
    let mut sum_w = 0.0;
    let mut sum_v = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for &t in &ts {
        let (w, v) = traj.state_at(t)?;
        sup = sup.max(w.abs()).max(v.abs());
        sum_w += w;
        sum_v += v;
        if let Some((pw, pv)) = prev {
            tv_w += (w - pw).abs();
            tv_v += (v - pv).abs();
        }
        prev = Some((w, v));
    }
    let tol = tol.unwrap_or(1e-8 * (1.0 + sup));
    let total_variation = tv_w.max(tv_v);
    if total_variation > tol {
        return Ok(None);
    }
    let w_bar = sum_w / ts.len() as f64;
    let v_bar = sum_v / ts.len() as f64;
    let constant = HistoryPair::constant(params.history_length(), w_bar.max(0.0), v_bar.max(0.0))?;
    let (dw, dv) = params.rhs_pair(&constant)?;
    Ok(Some(EquilibriumEstimate {
        w: w_bar,
        v: v_bar,
        residual: dw.abs().max(dv.abs()),
        total_variation,
    }))
}

/// Richardson-style convergence estimate from endpoint errors at steps
/// `base`, `base/2`, `base/4` against a `base/8` reference.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ConvergenceReport {
    pub errors: [f64; 3],
    /// Pairwise halving orders; noisy once errors approach the reference's
    /// own accuracy.
    pub orders: [f64; 2],
    /// Mean slope of `log2 error` over the sampled step range.
    pub observed_order: f64,
}

pub fn convergence_order(
    params: &ModelParams,
    pair: &HistoryPair,
    t_final: f64,
    base_step: f64,
) -> Result<ConvergenceReport> {
    if !(base_step > 0.0) || base_step > t_final {
        return Err(Error::InvalidParameter(format!(
            "base step must lie in (0, {t_final}], got {base_step}"
        )));
    }
    if base_step / 8.0 < 1e-13 * t_final.max(1.0) {
        return Err(Error::InvalidParameter(
            "base step too small: three distinct step sizes above the reference are required"
                .into(),
        ));
    }
    let run = |s: f64| -> Result<(f64, f64)> {
        let config = SolverConfig::with_step(s);
        let traj = integrate(params, pair, t_final, &config)?;
        traj.state_at(t_final)
    };
    let reference = run(base_step / 8.0)?;
    let scale = 1.0 + reference.0.abs().max(reference.1.abs());
    let mut errors = [0.0_f64; 3];
    for (i, div) in [1.0, 2.0, 4.0].iter().enumerate() {
        let (w, v) = run(base_step / div)?;
        errors[i] = ((w - reference.0).abs().max((v - reference.1).abs()) / scale).max(1e-300);
    }
    let orders = [
        (errors[0] / errors[1]).log2(),
        (errors[1] / errors[2]).log2(),
    ];
    Ok(ConvergenceReport {
        errors,
        orders,
        observed_order: (errors[0] / errors[2]).log2() / 2.0,
    })
}

/// Maximum relative deviation between the stem cell component and its
/// exponential representation `phi(0) exp(int_0^t q(v))`, with the integral
/// taken by composite Simpson quadrature on the stored dense inhibitor.
pub fn exponential_representation_residual(
    params: &ModelParams,
    traj: &Trajectory,
) -> Result<f64> {
    let w_init = traj.initial().phi().eval(0.0)?;
    let mut integral = 0.0;
    let mut worst = 0.0_f64;
    let subs = 8;
    let w_scale = traj.initial().phi().sup_norm();
    for s in &traj.steps {
        let dt = (s.t1 - s.t0) / subs as f64;
        for k in 0..subs {
            let a = s.t0 + k as f64 * dt;
            let b = a + dt;
            let qa = params.q(traj.state_at(a)?.1);
            let qm = params.q(traj.state_at(0.5 * (a + b))?.1);
            let qb = params.q(traj.state_at(b)?.1);
            integral += dt / 6.0 * (qa + 4.0 * qm + qb);
            let expected = w_init * integral.exp();
            let actual = traj.state_at(b)?.0;
            let denom = expected.abs().max(1e-9 * w_scale).max(1e-300);
            worst = worst.max((actual - expected).abs() / denom);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcs::{CoefFn, SpeedField};
    use crate::model::IngredientSet;
    use crate::threshold::MaturationField;

    pub(crate) fn default_field() -> MaturationField {
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

    pub(crate) fn default_params() -> ModelParams {
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
        ModelParams::new(ing, default_field(), 1.0).unwrap()
    }

    /// gamma == 0 and q == p_w - mu_w: the components decouple into scalar
    /// linear equations.
    pub(crate) fn decoupled_params(p_w: f64, mu_w: f64, mu: f64) -> ModelParams {
        let ing = IngredientSet::new(
            1.0,
            p_w,
            mu_w,
            0.0,
            0.0,
            0.5,
            CoefFn::Constant(0.4),
            CoefFn::Constant(0.1),
        )
        .unwrap();
        ModelParams::new(ing, default_field(), mu).unwrap()
    }

    #[test]
    fn trivial_equilibrium_stays_zero() {
        let params = default_params();
        let pair = HistoryPair::constant(params.history_length(), 0.0, 0.0).unwrap();
        let traj = integrate(&params, &pair, 1.0, &SolverConfig::default()).unwrap();
        let ((wmin, wmax), (vmin, vmax)) = traj.value_range(-params.history_length(), 1.0);
        assert_eq!((wmin, wmax), (0.0, 0.0));
        assert_eq!((vmin, vmax), (0.0, 0.0));
    }

    #[test]
    fn decoupled_linear_matches_closed_forms() {
        // q == 0.4, gamma == 0, mu = 1: w = w0 e^{0.4 t}, v = v0 e^{-t}.
        let params = decoupled_params(0.5, 0.1, 1.0);
        assert_eq!(params.kj(), 0.0);
        let h = params.history_length();
        let pair = HistoryPair::random(3, h, 1.0, 2.0, 1.0, 2.0, 9).unwrap();
        let (w0, v0) = (
            pair.phi().eval(0.0).unwrap(),
            pair.psi().eval(0.0).unwrap(),
        );
        let traj = integrate(&params, &pair, 2.5, &SolverConfig::default()).unwrap();
        for k in 0..=50 {
            let t = 2.5 * k as f64 / 50.0;
            let (w, v) = traj.state_at(t).unwrap();
            let we = w0 * (0.4 * t).exp();
            let ve = v0 * (-t).exp();
            assert!((w - we).abs() <= 1e-8 * we.abs().max(1e-12), "w at {t}");
            assert!((v - ve).abs() <= 1e-8 * ve.abs().max(1e-12), "v at {t}");
        }
    }

    #[test]
    fn self_convergence_under_step_halving() {
        let params = default_params();
        let h = params.history_length();
        let pair = HistoryPair::random(11, h, 1.0, 1.5, 1.0, 1.5, 9).unwrap();
        let t_final = 5.0 * h;
        let coarse = integrate(&params, &pair, t_final, &SolverConfig::default()).unwrap();
        let step = SolverConfig::default().resolved_step(&params).unwrap();
        let fine = integrate(&params, &pair, t_final, &SolverConfig::with_step(step / 2.0)).unwrap();
        let (wc, vc) = coarse.state_at(t_final).unwrap();
        let (wf, vf) = fine.state_at(t_final).unwrap();
        let scale = 1.0 + wf.abs().max(vf.abs());
        let dev = (wc - wf).abs().max((vc - vf).abs()) / scale;
        assert!(dev <= 1e-6, "step-halving deviation {dev}");
    }

    #[test]
    fn semiflow_identity_at_zero_and_equilibrium_fixed_point() {
        let params = default_params();
        let h = params.history_length();
        let pair = HistoryPair::random(5, h, 1.0, 1.0, 1.0, 1.0, 7).unwrap();
        let config = SolverConfig::default();
        assert_eq!(semiflow(&params, &pair, 0.0, &config).unwrap(), pair);

        let (w_star, v_star) = params.positive_equilibrium().unwrap().unwrap();
        let eq = HistoryPair::constant(h, w_star, v_star).unwrap();
        let moved = semiflow(&params, &eq, h, &config).unwrap();
        let dist = moved.sup_distance(&eq).unwrap();
        assert!(dist <= 1e-9, "equilibrium drifted by {dist}");
    }

    #[test]
    fn segment_matches_dense_values() {
        let params = default_params();
        let h = params.history_length();
        let pair = HistoryPair::random(7, h, 1.0, 1.0, 1.0, 1.0, 7).unwrap();
        let config = SolverConfig::default();
        let traj = integrate(&params, &pair, 2.0 * h, &config).unwrap();
        let seg = traj.segment_at(h, config.segment_samples).unwrap();
        // Value at segment time 0 equals trajectory value at h.
        let (w_h, v_h) = traj.state_at(h).unwrap();
        assert!((seg.phi().eval(0.0).unwrap() - w_h).abs() < 1e-12);
        assert!((seg.psi().eval(0.0).unwrap() - v_h).abs() < 1e-12);
        // Interior agreement within the piecewise-linear resolution.
        for k in 0..=40 {
            let theta = -h + h * k as f64 / 40.0;
            let (w, v) = traj.state_at(h + theta).unwrap();
            assert!((seg.phi().eval(theta).unwrap() - w).abs() < 1e-7);
            assert!((seg.psi().eval(theta).unwrap() - v).abs() < 1e-7);
        }
        // Segment at 0 is the initial pair, node-for-node.
        assert_eq!(traj.segment_at(0.0, 8).unwrap(), pair);
    }

    #[test]
    fn equilibrium_detection_on_flat_and_decaying_runs() {
        let params = default_params();
        let h = params.history_length();
        let (w_star, v_star) = params.positive_equilibrium().unwrap().unwrap();
        let eq = HistoryPair::constant(h, w_star, v_star).unwrap();
        let traj = integrate(&params, &eq, 4.0 * h, &SolverConfig::default()).unwrap();
        let found = detect_equilibrium(&params, &traj, 2.0 * h, None)
            .unwrap()
            .expect("constant trajectory must be detected");
        assert!(found.residual <= 1e-9, "residual {}", found.residual);

        // Pure decay (gamma == 0, q < 0): limit (0, 0).
        let decay = decoupled_params(0.3, 0.5, 1.0);
        assert!(decay.qbar() < 0.0);
        let pair = HistoryPair::random(9, h, 1.0, 1.0, 1.0, 1.0, 7).unwrap();
        let t_final = 120.0;
        let traj = integrate(&decay, &pair, t_final, &SolverConfig::default()).unwrap();
        let found = detect_equilibrium(&decay, &traj, 2.0 * h, None)
            .unwrap()
            .expect("decaying trajectory settles");
        assert!(found.w.abs() < 1e-6 && found.v.abs() < 1e-6);

        // Short window precondition.
        assert!(detect_equilibrium(&params, &traj, t_final, None).is_err());
    }

    #[test]
    fn convergence_order_estimates() {
        let params = default_params();
        let h = params.history_length();
        let pair = HistoryPair::random(13, h, 1.0, 1.0, 1.0, 1.0, 7).unwrap();

        // Decoupled linear case: pure one-step method, order ~ 4.
        let decoupled = decoupled_params(0.5, 0.1, 1.0);
        let report = convergence_order(&decoupled, &pair, 1.6, 0.1).unwrap();
        assert!(
            report.observed_order > 3.4 && report.observed_order < 4.7,
            "decoupled order {:?}",
            report
        );

        // Full model: at least second order.
        let report = convergence_order(&params, &pair, 1.6, 0.1).unwrap();
        assert!(report.observed_order >= 2.0, "full order {report:?}");

        // Input validation.
        assert!(convergence_order(&params, &pair, 1.6, 0.0).is_err());
        assert!(convergence_order(&params, &pair, 1.6, 1e-14).is_err());
    }

    #[test]
    fn exponential_representation_and_envelope() {
        let params = default_params();
        let h = params.history_length();
        for seed in 0..5 {
            let pair = HistoryPair::random(seed, h, 1.0, 1.5, 1.0, 1.5, 9).unwrap();
            let traj = integrate(&params, &pair, 3.0 * h, &SolverConfig::default()).unwrap();
            let residual = exponential_representation_residual(&params, &traj).unwrap();
            assert!(residual <= 1e-7, "representation residual {residual}");

            // Envelope: w(t) <= ||phi|| e^{qbar t}.
            let phi_norm = pair.phi().sup_norm();
            for k in 0..=60 {
                let t = 3.0 * h * k as f64 / 60.0;
                let (w, _) = traj.state_at(t).unwrap();
                let env = phi_norm * (params.qbar() * t).exp();
                assert!(w <= env * (1.0 + 1e-9), "w {w} above envelope {env} at {t}");
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let params = default_params();
        let h = params.history_length();
        let pair = HistoryPair::random(1, h, 1.0, 1.0, 1.0, 1.0, 7).unwrap();

        // Mismatched history length.
        let off = HistoryPair::random(1, h * 2.0, 1.0, 1.0, 1.0, 1.0, 7).unwrap();
        assert!(integrate(&params, &off, 1.0, &SolverConfig::default()).is_err());

        // Negative initial data.
        let neg = HistoryPair::new(
            History::constant(h, -0.1).unwrap(),
            History::constant(h, 0.5).unwrap(),
        )
        .unwrap();
        assert!(integrate(&params, &neg, 1.0, &SolverConfig::default()).is_err());

        // Step beyond the delay bound.
        let config = SolverConfig::with_step(params.tau_lower() * 2.0);
        assert!(integrate(&params, &pair, 1.0, &config).is_err());
    }

    #[test]
    fn lipschitz_propagation_bound() {
        let params = default_params();
        let h = params.history_length();
        let pair = HistoryPair::random(21, h, 1.0, 3.0, 1.0, 3.0, 9).unwrap();
        let config = SolverConfig::default();
        let traj = integrate(&params, &pair, 2.0 * h, &config).unwrap();
        for k in 1..=8 {
            let t = 2.0 * h * k as f64 / 8.0;
            let seg = traj.segment_at(t, config.segment_samples).unwrap();
            let (dw, dv) = traj.max_abs_derivative(0.0, t);
            let bound = pair.lip().max(dw.max(dv)) * (1.0 + 1e-9);
            assert!(
                seg.lip() <= bound,
                "lip {} above bound {bound} at t = {t}",
                seg.lip()
            );
        }
    }
}
