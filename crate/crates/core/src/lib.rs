//! Simulation and verification toolkit for a two-component delay differential
//! equation with a threshold-type state-dependent delay, as it arises in stem
//! cell population dynamics.
//!
//! The model couples a stem cell population `w` to a mature cell population
//! `v`:
//!
//! ```text
//! w'(t) = q(v(t)) w(t)
//! v'(t) = -mu v(t) + j(w_t, v_t)
//! ```
//!
//! where `x_t(s) := x(t + s)` on `[-h, 0]` denotes the solution segment and
//! the functional `j` involves an evaluation at the delayed time `t - tau(v_t)`.
//! The delay `tau(v_t)` is defined implicitly: it is the time a maturation
//! variable, driven by an inner ODE whose speed depends on the `v`-segment,
//! needs to travel from an upper threshold down to a lower one.
//!
//! The crate provides
//!
//! * piecewise-linear Lipschitz histories and their algebra ([`history`]),
//! * the clamping retraction onto the nonnegative cone and the boundary
//!   feedback check ([`retraction`]),
//! * the inner maturation ODE and the implicit delay ([`threshold`]),
//! * the model ingredients, the delayed functional `j` and its derived
//!   constants ([`model`]),
//! * a method-of-steps integrator with dense output and the induced semiflow
//!   map ([`integrator`]),
//! * closed-form growth envelopes and invariant-compact-set budgets together
//!   with ensemble verification ([`invariance`]),
//! * property experiments for the semiflow axioms ([`checks`]).
//!
//! Ensemble work is data-parallel via rayon when the default `parallel`
//! feature is enabled; disabling it yields a dependency-free sequential build
//! with identical results ([`ensemble`]).

pub mod checks;
pub mod config;
mod dense;
pub mod ensemble;
mod error;
pub mod funcs;
pub mod history;
pub mod integrator;
pub mod invariance;
pub mod model;
pub mod report;
pub mod retraction;
pub mod threshold;

pub use error::{Error, Result};
pub use history::{History, HistoryPair};
pub use model::ModelParams;
