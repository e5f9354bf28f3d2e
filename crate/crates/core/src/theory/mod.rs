//! Finite-dimensional realisations of the analytical objects behind OPERA:
//! the integral operator on a discrete support grid, its fractional powers,
//! the K-functional, the error decomposition, bound constants, and numeric
//! checks of the supporting inequalities.

use std::time::Instant;

use serde::Serialize;
use serde_json::{Map, Value};

pub mod concentration;
pub mod constants;
pub mod decomposition;
pub mod kfunctional;
pub mod lemmas;
pub mod operator;
pub mod spectral;

pub use constants::{theorem1_bound, kfunctional_argument, BoundConstants};
pub use kfunctional::k_functional;
pub use spectral::SpectralModel;

// Cap on individually listed violations in a report.
const MAX_LISTED: usize = 20;

/// One failed case of a check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub case: String,
    pub lhs: f64,
    pub rhs: f64,
}

/// Outcome of a numeric verification.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub check: String,
    pub parameters: Map<String, Value>,
    pub n_cases: usize,
    pub n_violations: usize,
    /// Smallest relative slack `(rhs - lhs) / max(|rhs|, tiny)`; negative on violation.
    pub worst_margin: f64,
    pub wall_time: f64,
    pub violations: Vec<Violation>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.n_violations == 0
    }
}

/// Accumulates `lhs <= rhs` cases into a report.
#[derive(Debug)]
pub struct ReportBuilder {
    check: String,
    parameters: Map<String, Value>,
    n_cases: usize,
    n_violations: usize,
    worst_margin: f64,
    violations: Vec<Violation>,
    notes: Vec<String>,
    start: Instant,
}

impl ReportBuilder {
    pub fn new(check: impl Into<String>) -> Self {
        ReportBuilder {
            check: check.into(),
            parameters: Map::new(),
            n_cases: 0,
            n_violations: 0,
            worst_margin: f64::INFINITY,
            violations: Vec::new(),
            notes: Vec::new(),
            start: Instant::now(),
        }
    }

    pub fn param(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.parameters.insert(key.to_string(), value.into());
        self
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    /// Records `lhs <= rhs * (1 + rel_slack)`.
    pub fn case(&mut self, lhs: f64, rhs: f64, rel_slack: f64, describe: impl FnOnce() -> String) -> bool {
        self.n_cases += 1;
        let margin = (rhs - lhs) / rhs.abs().max(f64::MIN_POSITIVE);
        if margin < self.worst_margin {
            self.worst_margin = margin;
        }
        let ok = lhs <= rhs + rel_slack * rhs.abs() && lhs.is_finite() && !rhs.is_nan();
        if !ok {
            self.n_violations += 1;
            if self.violations.len() < MAX_LISTED {
                self.violations.push(Violation {
                    case: describe(),
                    lhs,
                    rhs,
                });
            }
        }
        ok
    }

    pub fn finish(self) -> VerificationReport {
        VerificationReport {
            check: self.check,
            parameters: self.parameters,
            n_cases: self.n_cases,
            n_violations: self.n_violations,
            worst_margin: if self.n_cases == 0 { 0.0 } else { self.worst_margin },
            wall_time: self.start.elapsed().as_secs_f64(),
            violations: self.violations,
            notes: self.notes,
        }
    }
}
