//! Small serializable report types shared by the verification suites.

use serde::Serialize;

/// One named grid or ensemble check.
#[derive(Clone, Debug, Serialize)]
pub struct NamedCheck {
    pub name: String,
    pub grid_size: usize,
    /// Smallest slack observed; negative means the check failed somewhere.
    pub worst_margin: f64,
    pub pass: bool,
}

impl NamedCheck {
    pub fn new(name: impl Into<String>, grid_size: usize, worst_margin: f64) -> Self {
        NamedCheck {
            name: name.into(),
            grid_size,
            worst_margin,
            pass: worst_margin >= 0.0,
        }
    }
}

/// A set of named checks with an aggregate verdict.
#[derive(Clone, Debug, Serialize)]
pub struct CheckSet {
    pub checks: Vec<NamedCheck>,
    pub all_pass: bool,
}

impl CheckSet {
    pub fn new(checks: Vec<NamedCheck>) -> Self {
        let all_pass = checks.iter().all(|c| c.pass);
        CheckSet { checks, all_pass }
    }
}
