//! Piecewise-linear Lipschitz histories on `[-h, 0]`.
//!
//! A [`History`] is the state of the delay equation: a function on `[-h, 0]`
//! stored as nodes with linear interpolation in between. Sup-norm and
//! Lipschitz constant are then exact node computations, which is what makes
//! the retraction and invariance checks of the other modules exactly
//! assertable.

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::{self, Write};

/// Tolerance for clamping evaluation points into `[-h, 0]`; absorbs
/// root-finder jitter without hiding logic bugs.
pub const EVAL_CLAMP_TOL: f64 = 1e-12;

/// A piecewise-linear function `[-h, 0] -> R^d` with nodes at strictly
/// increasing times, first node at `-h` and last node at `0`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "HistoryRepr", into = "HistoryRepr")]
pub struct History {
    h: f64,
    times: Vec<f64>,
    /// `comps[c][i]` is the value of component `c` at `times[i]`.
    comps: Vec<Vec<f64>>,
    /// Times in `(-h, 0]` where the function genuinely loses smoothness.
    /// `None` means every interior node (hand-written data); dense samples
    /// of a smooth solution record only their inherited kinks, which keeps
    /// the integrator from treating resampling artifacts as breaking
    /// points. A hint, not part of the function: excluded from equality and
    /// from the wire format.
    #[serde(skip)]
    kinks: Option<Vec<f64>>,
}

impl PartialEq for History {
    fn eq(&self, other: &Self) -> bool {
        self.h == other.h && self.times == other.times && self.comps == other.comps
    }
}

/// Wire format: `{"h": number, "nodes": [[t, [v, ...]], ...]}`.
#[derive(Serialize, Deserialize)]
struct HistoryRepr {
    h: f64,
    nodes: Vec<(f64, Vec<f64>)>,
}

impl From<History> for HistoryRepr {
    fn from(hist: History) -> Self {
        let nodes = hist
            .times
            .iter()
            .enumerate()
            .map(|(i, &t)| (t, hist.comps.iter().map(|c| c[i]).collect()))
            .collect();
        HistoryRepr { h: hist.h, nodes }
    }
}

impl TryFrom<HistoryRepr> for History {
    type Error = Error;

    fn try_from(repr: HistoryRepr) -> Result<Self> {
        let dim = repr.nodes.first().map_or(0, |(_, v)| v.len());
        let times: Vec<f64> = repr.nodes.iter().map(|(t, _)| *t).collect();
        let mut comps = vec![Vec::with_capacity(times.len()); dim];
        for (i, (_, values)) in repr.nodes.iter().enumerate() {
            if values.len() != dim {
                return Err(Error::InvalidHistory(format!(
                    "node {i} has {} components, expected {dim}",
                    values.len()
                )));
            }
            for (c, &v) in values.iter().enumerate() {
                comps[c].push(v);
            }
        }
        History::new(repr.h, times, comps)
    }
}

impl History {
    /// Builds a history from node times and per-component values, validating
    /// the representation invariants.
    pub fn new(h: f64, times: Vec<f64>, comps: Vec<Vec<f64>>) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidHistory(format!(
                "history length must be positive and finite, got {h}"
            )));
        }
        if times.len() < 2 {
            return Err(Error::InvalidHistory(
                "at least two nodes are required".into(),
            ));
        }
        if comps.is_empty() {
            return Err(Error::InvalidHistory(
                "at least one component is required".into(),
            ));
        }
        if times[0] != -h || *times.last().unwrap() != 0.0 {
            return Err(Error::InvalidHistory(format!(
                "node times must span exactly [-{h}, 0], got [{}, {}]",
                times[0],
                times.last().unwrap()
            )));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidHistory(
                "node times must be strictly increasing".into(),
            ));
        }
        for (c, values) in comps.iter().enumerate() {
            if values.len() != times.len() {
                return Err(Error::InvalidHistory(format!(
                    "component {c} has {} values for {} times",
                    values.len(),
                    times.len()
                )));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidHistory(format!(
                    "component {c} holds a non-finite value"
                )));
            }
        }
        Ok(History {
            h,
            times,
            comps,
            kinks: None,
        })
    }

    /// Scalar history from `(time, value)` nodes; `h` is taken from the first
    /// node time.
    pub fn from_nodes(nodes: &[(f64, f64)]) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidHistory("empty node list".into()));
        }
        let h = -nodes[0].0;
        let times = nodes.iter().map(|&(t, _)| t).collect();
        let values = nodes.iter().map(|&(_, v)| v).collect();
        History::new(h, times, vec![values])
    }

    /// Constant scalar history on `[-h, 0]`.
    pub fn constant(h: f64, value: f64) -> Result<Self> {
        History::new(h, vec![-h, 0.0], vec![vec![value, value]])
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn component(&self, c: usize) -> &[f64] {
        &self.comps[c]
    }

    /// Times in `(-h, 0]` where the function may lose smoothness.
    pub fn kink_times(&self) -> Vec<f64> {
        match &self.kinks {
            Some(list) => list.clone(),
            None => self
                .times
                .iter()
                .copied()
                .filter(|&t| t > -self.h)
                .collect(),
        }
    }

    /// Declares the genuine kink times (sorted, within `(-h, 0]`).
    pub fn with_kink_times(mut self, kinks: Vec<f64>) -> History {
        self.kinks = Some(kinks);
        self
    }

    /// Scalar `(time, value)` node list of component `c`.
    pub fn nodes(&self, c: usize) -> Vec<(f64, f64)> {
        self.times
            .iter()
            .copied()
            .zip(self.comps[c].iter().copied())
            .collect()
    }

    fn clamp_point(&self, s: f64) -> Result<f64> {
        if s < -self.h - EVAL_CLAMP_TOL || s > EVAL_CLAMP_TOL {
            return Err(Error::OutOfDomain {
                point: s,
                lo: -self.h,
                hi: 0.0,
            });
        }
        Ok(s.clamp(-self.h, 0.0))
    }

    /// Value of component `c` at `s` by linear interpolation; exact at nodes.
    /// `s` may exceed `[-h, 0]` by at most [`EVAL_CLAMP_TOL`].
    pub fn value_at(&self, s: f64, c: usize) -> Result<f64> {
        let s = self.clamp_point(s)?;
        Ok(self.value_clamped(s, c))
    }

    /// Interpolation with `s` already inside `[-h, 0]`.
    fn value_clamped(&self, s: f64, c: usize) -> f64 {
        // partition_point returns the first index with times[i] > s; the
        // segment is [idx-1, idx].
        let idx = self.times.partition_point(|&t| t <= s);
        if idx == 0 {
            return self.comps[c][0];
        }
        if idx == self.times.len() {
            return *self.comps[c].last().unwrap();
        }
        let (t0, t1) = (self.times[idx - 1], self.times[idx]);
        let (v0, v1) = (self.comps[c][idx - 1], self.comps[c][idx]);
        if s == t0 {
            return v0;
        }
        let w = (s - t0) / (t1 - t0);
        v0 + w * (v1 - v0)
    }

    /// Scalar evaluation; the history must have a single component.
    pub fn eval(&self, s: f64) -> Result<f64> {
        debug_assert_eq!(self.dim(), 1, "eval requires a scalar history");
        self.value_at(s, 0)
    }

    /// Sup-norm `max_s |phi(s)|` (max-norm over components). Piecewise-linear
    /// functions attain extrema at nodes, so this is exact.
    pub fn sup_norm(&self) -> f64 {
        self.comps
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Smallest value over all nodes and components.
    pub fn min_value(&self) -> f64 {
        self.comps
            .iter()
            .flat_map(|c| c.iter())
            .fold(f64::INFINITY, |acc, &v| acc.min(v))
    }

    /// Largest value over all nodes and components.
    pub fn max_value(&self) -> f64 {
        self.comps
            .iter()
            .flat_map(|c| c.iter())
            .fold(f64::NEG_INFINITY, |acc, &v| acc.max(v))
    }

    /// Lipschitz constant: the maximum absolute node-to-node slope.
    pub fn lip(&self) -> f64 {
        let mut worst = 0.0_f64;
        for values in &self.comps {
            for i in 1..self.times.len() {
                let slope = (values[i] - values[i - 1]) / (self.times[i] - self.times[i - 1]);
                worst = worst.max(slope.abs());
            }
        }
        worst
    }

    /// Returns a copy with every value multiplied by `factor`.
    pub fn scale(&self, factor: f64) -> History {
        let comps = self
            .comps
            .iter()
            .map(|c| c.iter().map(|v| v * factor).collect())
            .collect();
        History {
            h: self.h,
            times: self.times.clone(),
            comps,
            kinks: self.kinks.clone(),
        }
    }

    /// Returns a copy with `offset` added to every value.
    pub fn shift_values(&self, offset: f64) -> History {
        let comps = self
            .comps
            .iter()
            .map(|c| c.iter().map(|v| v + offset).collect())
            .collect();
        History {
            h: self.h,
            times: self.times.clone(),
            comps,
            kinks: self.kinks.clone(),
        }
    }

    /// Resamples onto the given node times (must span `[-h, 0]`).
    pub fn resampled(&self, times: &[f64]) -> Result<History> {
        let comps = (0..self.dim())
            .map(|c| {
                times
                    .iter()
                    .map(|&t| self.value_at(t, c))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        History::new(self.h, times.to_vec(), comps)
    }

    /// Pointwise sum on the union grid. Both histories must share `h` and
    /// dimension.
    pub fn add(&self, other: &History) -> Result<History> {
        self.check_compatible(other)?;
        let times = union_times(&self.times, &other.times, self.h);
        let comps = (0..self.dim())
            .map(|c| {
                times
                    .iter()
                    .map(|&t| Ok(self.value_at(t, c)? + other.value_at(t, c)?))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let mut sum = History::new(self.h, times, comps)?;
        if let (Some(a), Some(b)) = (&self.kinks, &other.kinks) {
            let mut merged: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
            merged.sort_by(|x, y| x.partial_cmp(y).unwrap());
            merged.dedup();
            sum.kinks = Some(merged);
        }
        Ok(sum)
    }

    /// Sup-norm distance `||self - other||` computed exactly on the union
    /// grid (the difference of two piecewise-linear functions is piecewise
    /// linear with kinks only at union nodes).
    pub fn sup_distance(&self, other: &History) -> Result<f64> {
        self.check_compatible(other)?;
        let times = union_times(&self.times, &other.times, self.h);
        let mut worst = 0.0_f64;
        for c in 0..self.dim() {
            for &t in &times {
                let d = (self.value_at(t, c)? - other.value_at(t, c)?).abs();
                worst = worst.max(d);
            }
        }
        Ok(worst)
    }

    fn check_compatible(&self, other: &History) -> Result<()> {
        if (self.h - other.h).abs() > EVAL_CLAMP_TOL * self.h.max(1.0) {
            return Err(Error::InvalidHistory(format!(
                "history lengths differ: {} vs {}",
                self.h, other.h
            )));
        }
        if self.dim() != other.dim() {
            return Err(Error::InvalidHistory(format!(
                "dimensions differ: {} vs {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(())
    }

    /// Deterministic random history with values in `[0, bound]` and Lipschitz
    /// constant at most `lip_cap`, both exact at nodes. A cap too small to
    /// vary the function simply produces a near-constant output.
    pub fn random_lipschitz(
        seed: u64,
        h: f64,
        dim: usize,
        bound: f64,
        lip_cap: f64,
        node_count: usize,
    ) -> Result<History> {
        History::random_lipschitz_in(seed, h, dim, 0.0, bound, lip_cap, node_count)
    }

    /// As [`History::random_lipschitz`] with values in `[lo, hi]`.
    pub fn random_lipschitz_in(
        seed: u64,
        h: f64,
        dim: usize,
        lo: f64,
        hi: f64,
        lip_cap: f64,
        node_count: usize,
    ) -> Result<History> {
        if !(lo <= hi) {
            return Err(Error::InvalidParameter(format!(
                "empty value range [{lo}, {hi}]"
            )));
        }
        if lip_cap < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "negative Lipschitz cap {lip_cap}"
            )));
        }
        if node_count < 2 {
            return Err(Error::InvalidParameter(
                "at least two nodes are required".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = node_count;
        // Jittered uniform grid: offsets stay below half a cell, so times are
        // strictly increasing with endpoints pinned.
        let mut times = Vec::with_capacity(m);
        times.push(-h);
        for i in 1..m - 1 {
            let jitter: f64 = rng.random_range(-0.4..0.4);
            times.push(-h + (i as f64 + jitter) * h / (m as f64 - 1.0));
        }
        times.push(0.0);

        let mut comps = Vec::with_capacity(dim);
        for _ in 0..dim {
            let mut values = Vec::with_capacity(m);
            let mut v = sample_in(&mut rng, lo, hi);
            values.push(v);
            for i in 1..m {
                let dt = times[i] - times[i - 1];
                let head = lip_cap * dt;
                v = sample_in(&mut rng, (v - head).max(lo), (v + head).min(hi));
                values.push(v);
            }
            comps.push(values);
        }
        History::new(h, times, comps)
    }

    /// Writes node rows `t,v1[,v2,...]` preceded by a header line.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        write!(out, "t")?;
        for c in 1..=self.dim() {
            write!(out, ",v{c}")?;
        }
        writeln!(out)?;
        for (i, &t) in self.times.iter().enumerate() {
            write!(out, "{t}")?;
            for comp in &self.comps {
                write!(out, ",{}", comp[i])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

fn sample_in(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

/// Merges two sorted node-time lists, dropping near-duplicates.
pub(crate) fn union_times(a: &[f64], b: &[f64], h: f64) -> Vec<f64> {
    let tol = 1e-12 * h.max(1.0);
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => {
                if x <= y {
                    i += 1;
                    x
                } else {
                    j += 1;
                    y
                }
            }
            (Some(&x), None) => {
                i += 1;
                x
            }
            (None, Some(&y)) => {
                j += 1;
                y
            }
            (None, None) => unreachable!(),
        };
        match out.last() {
            Some(&prev) if next - prev <= tol => {}
            _ => out.push(next),
        }
    }
    // Endpoints must survive the dedup exactly.
    out[0] = -h;
    let n = out.len() - 1;
    out[n] = 0.0;
    out
}

/// The state of the two-component system: stem cell history `phi` (the
/// `w`-component) and mature cell history `psi` (the `v`-component), sharing
/// `h` and, after construction, the same node grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryPair {
    phi: History,
    psi: History,
}

impl HistoryPair {
    /// Builds a pair from two scalar histories with equal `h`, resampling
    /// both onto the union grid so the right-hand side has a single
    /// interpolation path.
    pub fn new(phi: History, psi: History) -> Result<Self> {
        if phi.dim() != 1 || psi.dim() != 1 {
            return Err(Error::InvalidHistory(
                "pair components must be scalar histories".into(),
            ));
        }
        phi.check_compatible(&psi)?;
        let times = union_times(&phi.times, &psi.times, phi.h);
        // The union grid contains (up to duplicate collapsing) every
        // original node, so resampling preserves the functions and their
        // kink hints stay valid.
        let phi_kinks = phi.kinks.clone();
        let psi_kinks = psi.kinks.clone();
        let mut phi = phi.resampled(&times)?;
        let mut psi = psi.resampled(&times)?;
        phi.kinks = phi_kinks;
        psi.kinks = psi_kinks;
        Ok(HistoryPair { phi, psi })
    }

    pub fn constant(h: f64, w: f64, v: f64) -> Result<Self> {
        HistoryPair::new(History::constant(h, w)?, History::constant(h, v)?)
    }

    /// Deterministic random pair: `phi` valued in `[0, phi_bound]`, `psi` in
    /// `[0, psi_bound]`, with the given Lipschitz caps.
    pub fn random(
        seed: u64,
        h: f64,
        phi_bound: f64,
        phi_lip: f64,
        psi_bound: f64,
        psi_lip: f64,
        node_count: usize,
    ) -> Result<Self> {
        let phi = History::random_lipschitz(seed ^ 0x9e37_79b9_7f4a_7c15, h, 1, phi_bound, phi_lip, node_count)?;
        let psi = History::random_lipschitz(seed.wrapping_add(0x2545_f491_4f6c_dd1d), h, 1, psi_bound, psi_lip, node_count)?;
        HistoryPair::new(phi, psi)
    }

    pub fn phi(&self) -> &History {
        &self.phi
    }

    pub fn psi(&self) -> &History {
        &self.psi
    }

    pub fn h(&self) -> f64 {
        self.phi.h
    }

    pub fn sup_norm(&self) -> f64 {
        self.phi.sup_norm().max(self.psi.sup_norm())
    }

    pub fn lip(&self) -> f64 {
        self.phi.lip().max(self.psi.lip())
    }

    pub fn min_value(&self) -> f64 {
        self.phi.min_value().min(self.psi.min_value())
    }

    pub fn sup_distance(&self, other: &HistoryPair) -> Result<f64> {
        Ok(self
            .phi
            .sup_distance(&other.phi)?
            .max(self.psi.sup_distance(&other.psi)?))
    }

    /// Merged genuine kink times of both components.
    pub fn kink_times(&self) -> Vec<f64> {
        let mut out = self.phi.kink_times();
        out.extend(self.psi.kink_times());
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out.dedup();
        out
    }
}
