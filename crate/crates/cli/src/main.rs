use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use projeq_cli::{execute, exit_code, parse_tolerance, Command, Invocation, EXIT_ERROR};

#[derive(Parser, Debug)]
#[command(name = "projeq", version, about = "Audits for projectively equivalent metrics and their integrals")]
struct Args {
    #[arg(value_enum)]
    command: Command,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides `run.seed` in the manifest.
    #[arg(long)]
    seed: Option<u64>,
    /// Tolerance override, e.g. `--tol drift_bound=1e-6`; repeatable.
    #[arg(long = "tol", value_parser = parse_tolerance)]
    tol: Vec<(String, f64)>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { EXIT_ERROR } else { 0 };
            return ExitCode::from(code as u8);
        }
    };
    let inv = Invocation { command: args.command, manifest: args.manifest, out: args.out, seed: args.seed, tolerances: args.tol };
    let result = execute(&inv);
    match &result {
        Ok(report) => {
            println!("{} {}: {} audits", report.command, report.status, report.audits.len());
            for a in &report.audits {
                let mark = if a.ok() { "ok  " } else { "FAIL" };
                println!("  {mark} {}: {:.3e} (threshold {:.3e})", a.name, a.measured, a.threshold);
            }
            for a in report.failures() {
                eprintln!("audit `{}` failed: measured {:e}, threshold {:e}, at {}", a.name, a.measured, a.threshold, a.location);
            }
        }
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(exit_code(&result) as u8)
}
