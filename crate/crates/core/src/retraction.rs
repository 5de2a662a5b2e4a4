//! The clamping retraction onto `C([-h,0], [-B, inf)^n)` and the boundary
//! feedback check that keeps solutions inside that cone.
//!
//! Clamping a piecewise-linear history is again piecewise linear once
//! crossing nodes are inserted, so the contraction properties of the
//! retraction (`lip` never grows, distances never grow, idempotence) are
//! exactly assertable on the node representation rather than approximately
//! on samples.

use crate::error::{Error, Result};
use crate::history::History;
use serde::Serialize;

/// Boundary-detection tolerance for feedback samples.
const BOUNDARY_TOL: f64 = 1e-12;

/// Pass threshold for boundary derivatives; the delayed functional involves
/// quadrature, so exact zero is unattainable.
pub const FEEDBACK_TOL: f64 = 1e-10;

/// The target cone `[-B, inf)^n`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DomainSpec {
    /// Lower bound offset: values are clamped to `[-b, inf)`.
    pub b: f64,
    /// Component count.
    pub dim: usize,
}

impl DomainSpec {
    pub fn new(b: f64, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter(
                "domain needs at least one component".into(),
            ));
        }
        if !b.is_finite() {
            return Err(Error::InvalidParameter(format!("non-finite bound {b}")));
        }
        Ok(DomainSpec { b, dim })
    }

    /// The nonnegative cone used by the cell model.
    pub fn nonnegative(dim: usize) -> Self {
        DomainSpec { b: 0.0, dim }
    }

    pub fn floor(&self) -> f64 {
        -self.b
    }
}

/// Scalar clamp onto `[-b, inf)`.
pub fn clamp_scalar(u: f64, b: f64) -> f64 {
    u.max(-b)
}

/// Component-wise clamp of a history onto `[-b, inf)^n`. Where a linear
/// segment crosses the floor, the crossing node is inserted first, so the
/// result is exactly the pointwise clamp of the input function.
pub fn retract(phi: &History, spec: &DomainSpec) -> Result<History> {
    if phi.dim() != spec.dim {
        return Err(Error::InvalidParameter(format!(
            "history has {} components, domain expects {}",
            phi.dim(),
            spec.dim
        )));
    }
    let floor = spec.floor();

    // Crossing times of any component, then one shared refined grid. A
    // crossing node carries exactly the floor value in its component, and
    // its time is biased toward the flat (clamped) side until the surviving
    // chord slope, recomputed the way `lip` computes it, does not exceed the
    // original segment slope. That makes the contraction of the Lipschitz
    // constant exact at the last bit.
    let times = phi.times();
    let mut crossings: Vec<f64> = Vec::new();
    let mut forced: std::collections::HashSet<(u64, usize)> = std::collections::HashSet::new();
    for c in 0..phi.dim() {
        let values = phi.component(c);
        for i in 1..times.len() {
            let (v0, v1) = (values[i - 1], values[i]);
            if (v0 - floor) * (v1 - floor) < 0.0 {
                let (t0, t1) = (times[i - 1], times[i]);
                let slope = ((v1 - v0) / (t1 - t0)).abs();
                let mut t = t0 + (floor - v0) * (t1 - t0) / (v1 - v0);
                t = t.clamp(t0, t1);
                if v0 < floor {
                    // Flat side left; the surviving chord runs to (t1, v1).
                    for _ in 0..64 {
                        if t <= t0 || (v1 - floor) / (t1 - t) <= slope {
                            break;
                        }
                        // Step down, at least one ulp of the chord length.
                        let down = t.next_down();
                        t = if t1 - down > t1 - t {
                            down
                        } else {
                            t1 - (t1 - t).next_up()
                        };
                    }
                } else {
                    for _ in 0..64 {
                        if t >= t1 || (v0 - floor) / (t - t0) <= slope {
                            break;
                        }
                        let up = t.next_up();
                        t = if up - t0 > t - t0 {
                            up
                        } else {
                            t0 + (t - t0).next_up()
                        };
                    }
                }
                if t > t0 && t < t1 {
                    crossings.push(t);
                    forced.insert((t.to_bits(), c));
                }
            }
        }
    }
    crossings.sort_by(|a, b| a.partial_cmp(b).unwrap());
    crossings.dedup();

    let mut new_times = Vec::with_capacity(times.len() + crossings.len());
    let mut cross_iter = crossings.into_iter().peekable();
    for &t in times {
        while let Some(&c) = cross_iter.peek() {
            if c < t {
                new_times.push(c);
                cross_iter.next();
            } else {
                if c == t {
                    cross_iter.next();
                }
                break;
            }
        }
        new_times.push(t);
    }

    let comps = (0..phi.dim())
        .map(|c| {
            new_times
                .iter()
                .map(|&t| {
                    if forced.contains(&(t.to_bits(), c)) {
                        return Ok(floor);
                    }
                    let v = phi.value_at(t, c)?;
                    Ok(clamp_scalar(v, spec.b))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let kink_hint = {
        let mut kinks = phi.kink_times();
        kinks.extend(forced.iter().map(|&(bits, _)| f64::from_bits(bits)));
        kinks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        kinks.dedup();
        kinks
    };
    Ok(History::new(phi.h(), new_times, comps)?.with_kink_times(kink_hint))
}

#[derive(Clone, Debug, Serialize)]
pub struct FeedbackSample {
    pub boundary_components: Vec<usize>,
    pub f_values: Vec<f64>,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct FeedbackReport {
    pub samples: Vec<FeedbackSample>,
    pub all_pass: bool,
}

/// Evaluates the right-hand side on histories whose value at `0` touches the
/// domain floor in some component, and reports whether the boundary
/// components have nonnegative derivative (within [`FEEDBACK_TOL`]). A
/// sample without any boundary component is rejected.
pub fn check_feedback<F>(rhs: F, spec: &DomainSpec, samples: &[History]) -> Result<FeedbackReport>
where
    F: Fn(&History) -> Result<Vec<f64>>,
{
    let floor = spec.floor();
    let mut out = Vec::with_capacity(samples.len());
    for (index, sample) in samples.iter().enumerate() {
        if sample.dim() != spec.dim {
            return Err(Error::InvalidParameter(format!(
                "sample {index} has {} components, domain expects {}",
                sample.dim(),
                spec.dim
            )));
        }
        let mut boundary = Vec::new();
        let mut distance = f64::INFINITY;
        for c in 0..sample.dim() {
            let gap = (sample.value_at(0.0, c)? - floor).abs();
            distance = distance.min(gap);
            if gap <= BOUNDARY_TOL {
                boundary.push(c);
            }
        }
        if boundary.is_empty() {
            return Err(Error::NotOnBoundary { index, distance });
        }
        let f_values = rhs(sample)?;
        let pass = boundary.iter().all(|&c| f_values[c] >= -FEEDBACK_TOL);
        out.push(FeedbackSample {
            boundary_components: boundary,
            f_values,
            pass,
        });
    }
    let all_pass = out.iter().all(|s| s.pass);
    Ok(FeedbackReport {
        samples: out,
        all_pass,
    })
}

/// The classical closed-but-not-closed-image fixture: a bounded sequence of
/// piecewise-linear functions on `[0, 2]` (shifted here to `[-2, 0]`) whose
/// members stay uniformly apart while their clamped images converge
/// uniformly to zero. Index `n >= 2`.
///
/// In original coordinates `t in [0, 2]` the function is `1/n` for
/// `t < 1 - 1/n`, then `1 - t` until `1`, then `-n (t - 1)` until `1 + 1/n`,
/// then `-1`.
pub fn counterexample_history(n: usize) -> Result<History> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "counterexample index must be >= 2, got {n}"
        )));
    }
    let nf = n as f64;
    // Shift t in [0, 2] to s = t - 2 in [-2, 0].
    History::from_nodes(&[
        (-2.0, 1.0 / nf),
        (-1.0 - 1.0 / nf, 1.0 / nf),
        (-1.0, 0.0),
        (-1.0 + 1.0 / nf, -1.0),
        (0.0, -1.0),
    ])
}

#[derive(Clone, Debug, Serialize)]
pub struct CounterexampleReport {
    pub indices: Vec<usize>,
    /// Pairwise sup-norm distances of the raw sequence members.
    pub raw_distances: Vec<(usize, usize, f64)>,
    /// Pairwise sup-norm distances after clamping onto the nonnegative cone.
    pub retracted_distances: Vec<(usize, usize, f64)>,
    /// Sup-norms of the clamped members; they vanish as the index grows even
    /// though the raw members stay apart, so the image of the (closed,
    /// bounded) sequence under the retraction is not closed.
    pub retracted_sup_norms: Vec<f64>,
}

/// Illustrative diagnostic around [`counterexample_history`]; distances are
/// reported, nothing is gated.
pub fn counterexample_report(indices: &[usize]) -> Result<CounterexampleReport> {
    let spec = DomainSpec::nonnegative(1);
    let members: Vec<History> = indices
        .iter()
        .map(|&n| counterexample_history(n))
        .collect::<Result<_>>()?;
    let retracted: Vec<History> = members.iter().map(|m| retract(m, &spec)).collect::<Result<_>>()?;
    let mut raw_distances = Vec::new();
    let mut retracted_distances = Vec::new();
    for i in 0..members.len() {
        for j in i + 1..members.len() {
            raw_distances.push((indices[i], indices[j], members[i].sup_distance(&members[j])?));
            retracted_distances.push((
                indices[i],
                indices[j],
                retracted[i].sup_distance(&retracted[j])?,
            ));
        }
    }
    Ok(CounterexampleReport {
        indices: indices.to_vec(),
        raw_distances,
        retracted_distances,
        retracted_sup_norms: retracted.iter().map(|r| r.sup_norm()).collect(),
    })
}
