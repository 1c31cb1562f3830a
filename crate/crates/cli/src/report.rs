//! Report payloads, the header file and the trajectory CSV.

use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Value};

use projeq_core::{GeomError, Tolerances};

use crate::CliError;

pub const REPORT_FILE: &str = "report.json";
pub const HEADER_FILE: &str = "header.json";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Audit {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub threshold: f64,
    /// Offending point, time or state, when there is one.
    pub location: Value,
    /// Set for audits that a scenario is expected to fail.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected: Option<bool>,
    pub detail: Value,
}

impl Audit {
    pub fn new(name: impl Into<String>, passed: bool, measured: f64, threshold: f64) -> Audit {
        Audit { name: name.into(), passed, measured, threshold, location: Value::Null, expected: None, detail: Value::Null }
    }

    /// `measured ≤ threshold`.
    pub fn at_most(name: impl Into<String>, measured: f64, threshold: f64) -> Audit {
        Audit::new(name, measured <= threshold, measured, threshold)
    }

    pub fn at(mut self, location: Value) -> Audit {
        self.location = location;
        self
    }

    pub fn with(mut self, detail: Value) -> Audit {
        self.detail = detail;
        self
    }

    pub fn expecting(mut self, pass: bool) -> Audit {
        self.expected = Some(pass);
        self
    }

    pub fn ok(&self) -> bool {
        self.passed == self.expected.unwrap_or(true)
    }

    /// A failed audit built from a geometric error, if the error is the
    /// kind an audit can fail with rather than a structural problem.
    pub fn from_error(name: impl Into<String>, e: &GeomError) -> Option<Audit> {
        let (location, measured) = match e {
            GeomError::OrderingViolated { point, gap, .. } => (json!({ "point": point }), *gap),
            GeomError::NonPositivePhi { point, value, .. } => (json!({ "point": point }), *value),
            GeomError::GapViolated { point, gap, .. } => (json!({ "point": point }), *gap),
            GeomError::DomainViolation { point, .. } => (json!({ "point": point }), f64::NAN),
            GeomError::NotSelfAdjoint { point, defect } => (json!({ "point": point }), *defect),
            GeomError::NonPositiveSpectrum { point, eigenvalue } => (json!({ "point": point }), *eigenvalue),
            GeomError::NotPositiveDefinite { point, min_eigenvalue } => (json!({ "point": point }), *min_eigenvalue),
            GeomError::BranchViolation { z, margin } => (json!({ "z": z }), *margin),
            GeomError::NotPolynomial { residual, .. } => (Value::Null, *residual),
            GeomError::ComplexRoot { imag } => (Value::Null, *imag),
            GeomError::EnergyProportional => (Value::Null, 0.0),
            _ => return None,
        };
        Some(Audit::new(name, false, measured, f64::NAN).at(location).with(json!({ "error": e.to_string() })))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub command: String,
    pub status: &'static str,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub audits: Vec<Audit>,
    pub data: Value,
}

impl Report {
    pub fn new(command: &str, seed: u64, tolerances: Tolerances, audits: Vec<Audit>, data: Value) -> Report {
        let status = if audits.iter().all(Audit::ok) { "PASS" } else { "FAIL" };
        Report { command: command.to_string(), status, seed, tolerances, audits, data }
    }

    pub fn passed(&self) -> bool {
        self.status == "PASS"
    }

    pub fn failures(&self) -> impl Iterator<Item = &Audit> {
        self.audits.iter().filter(|a| !a.ok())
    }
}

/// Writes `report.json` (deterministic payload) and `header.json` (timestamp).
pub fn write_report(dir: &Path, report: &Report) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    let mut body = serde_json::to_string_pretty(report)?;
    body.push('\n');
    fs::write(dir.join(REPORT_FILE), body)?;
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let header = json!({
        "tool": "projeq",
        "version": env!("CARGO_PKG_VERSION"),
        "command": report.command,
        "timestamp_unix": secs,
    });
    fs::write(dir.join(HEADER_FILE), format!("{header}\n"))?;
    Ok(())
}

/// CSV with a header row and LF line endings; floats use the shortest
/// representation that round-trips.
pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<(), CliError> {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}
