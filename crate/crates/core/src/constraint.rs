//! Named inequality checks with numeric margins.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintCheck {
    pub name: String,
    pub holds: bool,
    /// Signed slack; positive when the inequality holds.
    pub margin: f64,
}

impl ConstraintCheck {
    /// `lhs < rhs`.
    pub fn less(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self {
            name: name.into(),
            holds: lhs < rhs,
            margin: rhs - lhs,
        }
    }

    /// `|lhs - rhs| <= tol`.
    pub fn equal(name: impl Into<String>, lhs: f64, rhs: f64, tol: f64) -> Self {
        let d = (lhs - rhs).abs();
        Self {
            name: name.into(),
            holds: d <= tol,
            margin: tol - d,
        }
    }

    /// `lo <= v <= hi`.
    pub fn within(name: impl Into<String>, v: f64, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            holds: v >= lo && v <= hi,
            margin: (v - lo).min(hi - v),
        }
    }
}

pub fn all_hold(checks: &[ConstraintCheck]) -> bool {
    checks.iter().all(|c| c.holds)
}

pub fn first_failure(checks: &[ConstraintCheck]) -> Option<&ConstraintCheck> {
    checks.iter().find(|c| !c.holds)
}
