//! Manifest-driven command runner.
//!
//! A run reads a JSON manifest, builds the geometry it describes, runs one
//! command's audits and writes `report.json` and `header.json` (plus
//! `trajectory.csv` for `geodesic`) into the output directory.

use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use thiserror::Error;

use projeq_core::GeomError;

pub mod commands;
pub mod manifest;
pub mod report;

use manifest::{build_scene, Manifest};
use report::{write_report, Audit, Report};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("expression: {0}")]
    Expression(String),
    #[error("usage: {0}")]
    Usage(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Geom(#[from] GeomError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    CheckBm,
    Pair,
    Geodesic,
    Conserve,
    Weyl,
    Classify2d,
    LcBuild,
    Split,
    Example,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::CheckBm => "check-bm",
            Command::Pair => "pair",
            Command::Geodesic => "geodesic",
            Command::Conserve => "conserve",
            Command::Weyl => "weyl",
            Command::Classify2d => "classify2d",
            Command::LcBuild => "lc-build",
            Command::Split => "split",
            Command::Example => "example",
        }
    }
}

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Clone, Debug)]
pub struct Invocation {
    pub command: Command,
    pub manifest: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
    /// `key=value` tolerance overrides, applied after the manifest's own.
    pub tolerances: Vec<(String, f64)>,
}

pub fn parse_tolerance(text: &str) -> Result<(String, f64), String> {
    let (k, v) = text.split_once('=').ok_or_else(|| format!("expected key=value, got `{text}`"))?;
    let v: f64 = v.trim().parse().map_err(|_| format!("`{v}` is not a number"))?;
    Ok((k.trim().to_string(), v))
}

pub fn load_manifest(path: &Path) -> Result<Manifest, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Manifest(format!("{}: {e}", path.display())))?;
    Manifest::from_json(&text)
}

/// Builds the report for one run without touching the filesystem, except
/// for the trajectory CSV of `geodesic`.
pub fn run(command: Command, m: &Manifest, out: &Path) -> Result<Report, CliError> {
    let run = &m.run;
    let scene = match build_scene(m) {
        Ok(s) => s,
        Err(CliError::Geom(e)) => {
            let audit = Audit::from_error("geometry", &e).ok_or(CliError::Geom(e))?;
            return Ok(Report::new(command.name(), run.seed, run.tolerances.clone(), vec![audit], serde_json::Value::Null));
        }
        Err(e) => return Err(e),
    };
    if command == Command::Geodesic {
        fs::create_dir_all(out)?;
    }
    let (audits, data) = match command {
        Command::CheckBm => commands::check_bm(&scene, run)?,
        Command::Pair => commands::pair(&scene, run)?,
        Command::Geodesic => commands::geodesic(&scene, run, out)?,
        Command::Conserve => commands::conserve(&scene, run)?,
        Command::Weyl => commands::weyl(&scene, run)?,
        Command::Classify2d => commands::classify2d(&scene, run)?,
        Command::LcBuild => commands::lc_build(&scene, run)?,
        Command::Split => commands::split_cmd(&scene, run)?,
        Command::Example => commands::example(&scene, run)?,
    };
    Ok(Report::new(command.name(), run.seed, run.tolerances.clone(), audits, data))
}

/// Loads the manifest, applies overrides, runs and writes the report.
pub fn execute(inv: &Invocation) -> Result<Report, CliError> {
    let mut m = load_manifest(&inv.manifest)?;
    if let Some(seed) = inv.seed {
        m.run.seed = seed;
    }
    for (k, v) in &inv.tolerances {
        m.run.tolerances.set(k, *v).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let report = run(inv.command, &m, &inv.out)?;
    write_report(&inv.out, &report)?;
    Ok(report)
}

pub fn exit_code(result: &Result<Report, CliError>) -> i32 {
    match result {
        Ok(r) if r.passed() => EXIT_PASS,
        Ok(_) => EXIT_FAIL,
        Err(_) => EXIT_ERROR,
    }
}
