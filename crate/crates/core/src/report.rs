//! Structured result records: Laurent data of gauged traces, check
//! reports, and decomposition ledgers.  Reports serialize to
//! line-delimited JSON so shell pipelines and CI can consume them;
//! runtimes are kept out of the serialized form so identical inputs
//! produce byte-identical output.

use num_complex::Complex64;
use serde::Serialize;

/// Laurent data of a gauged trace at z = 0: the coefficient of 1/z and
/// the constant term.  Families regular at z = 0 have pole = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeromorphicValue {
    pole: Complex64,
    finite: Complex64,
}

impl MeromorphicValue {
    pub fn new(pole: Complex64, finite: Complex64) -> Self {
        Self { pole, finite }
    }

    pub fn pole(&self) -> Complex64 {
        self.pole
    }

    pub fn finite(&self) -> Complex64 {
        self.finite
    }
}

/// One verification check outcome.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    /// Stable check identifier; reports are sorted by it.
    pub check: String,
    /// The identity or bound the check verifies, as a formula.
    pub anchor: String,
    /// Worst measured deviation (or fitted quantity).
    pub measured: f64,
    /// The bound the measurement must meet.
    pub bound: f64,
    pub pass: bool,
    /// Extra context: truncation depths, extrapolation data, etc.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub details: Option<String>,
    /// Wall-clock runtime; excluded from serialization so records are
    /// reproducible byte-for-byte.
    #[serde(skip)]
    pub runtime_ms: u128,
}

impl Report {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serialization cannot fail")
    }
}

/// One entry of the machine-readable decomposition ledger.
#[derive(Debug, Clone, Serialize)]
pub struct LedgerEntry {
    /// Which structural part this row describes (base, commutator, …).
    pub part: String,
    /// Identifier of the operator within the decomposition.
    pub operator: String,
    /// Verification residual attached to the part.
    pub residual: f64,
}

impl LedgerEntry {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("ledger serialization cannot fail")
    }
}

/// Computation record emitted by the command-line front end.
#[derive(Debug, Clone, Serialize)]
pub struct ComputationRecord {
    pub command: String,
    pub input: String,
    pub value_re: f64,
    pub value_im: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pole_re: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pole_im: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_estimate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncation: Option<String>,
}

impl ComputationRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("record serialization cannot fail")
    }
}
