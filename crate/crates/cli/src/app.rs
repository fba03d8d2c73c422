//! Command-line surface. `run` is pure apart from reading the scenario file,
//! so tests can drive it without spawning a process.

use std::path::{Path, PathBuf};

use advcal_core::composition::dual_norm_compose;
use advcal_core::Norm;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::bridge::{render_text as render_bridge, run_bridge};
use crate::calibrate::{calibrate, render_text, CalibrationReport};
use crate::doc::{ScenarioDoc, WindowMode};
use crate::error::{exit, CliError, Result};
use crate::render::{header_line, to_canonical_json, Num};
use crate::verify::{render_text as render_verify, verify, Verdict};

#[derive(Debug, Parser)]
#[command(name = "advcal", version, about = "Calibrate DP noise to a guessing-advantage bound")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Output {
    /// Emit canonical JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    /// Omit the timestamped header line.
    #[arg(long, global = true)]
    pub no_header: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute epsilon and the noise scale for a scenario.
    Calibrate {
        scenario: PathBuf,
        /// Window mode: auto, fixed:A or scan:N (overrides the scenario).
        #[arg(long)]
        window: Option<WindowMode>,
        /// Also check the result with the enumeration oracle.
        #[arg(long)]
        verify: bool,
        #[command(flatten)]
        out: Output,
    },
    /// Check a scenario's advantage bound by exact enumeration.
    Verify {
        scenario: PathBuf,
        /// Epsilon to check; defaults to the calibrated one.
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        window: Option<WindowMode>,
        #[command(flatten)]
        out: Output,
    },
    /// Convert between approximate DP and guessing advantage.
    Bridge {
        scenario: PathBuf,
        #[arg(long)]
        window: Option<WindowMode>,
        #[command(flatten)]
        out: Output,
    },
    /// Total budget of several outputs under an input norm.
    Compose {
        /// Comma-separated per-output budgets.
        #[arg(long, value_delimiter = ',', required = true)]
        eps: Vec<f64>,
        /// Norm combining the inputs: 1, 2 or inf.
        #[arg(long, default_value = "inf")]
        norm: Norm,
        #[command(flatten)]
        out: Output,
    },
}

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub stdout: String,
    pub stderr: String,
    pub code: i32,
}

#[derive(Debug, Serialize)]
struct ComposeReport {
    eps: Vec<Num>,
    input_norm: Norm,
    dual_norm: Norm,
    total: Num,
}

#[derive(Debug, Serialize)]
struct ErrorReport {
    error: String,
    exit_code: i32,
}

fn emit<T: Serialize>(out: &Output, value: &T, text: impl FnOnce() -> String, code: i32) -> Result<Outcome> {
    let mut outcome = Outcome { code, ..Default::default() };
    let header = if out.no_header { String::new() } else { format!("{}\n", header_line()) };
    if out.json {
        outcome.stdout = to_canonical_json(value)?;
        outcome.stderr = header;
    } else {
        outcome.stdout = header + &text();
    }
    Ok(outcome)
}

fn calibrated(path: &Path, window: Option<WindowMode>) -> Result<(ScenarioDoc, CalibrationReport)> {
    let doc = ScenarioDoc::load(path)?;
    let report = calibrate(&doc, window)?;
    Ok((doc, report))
}

fn dispatch(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Calibrate { scenario, window, verify: check, out } => {
            let (doc, mut report) = calibrated(scenario, *window)?;
            let mut code = if report.feasible { exit::OK } else { exit::INFEASIBLE };
            if !report.noise_scale.0.is_finite() {
                code = exit::INFEASIBLE;
            }
            if *check && report.feasible {
                let v = verify(&doc, report.epsilon.0)?;
                if v.verdict == Verdict::Fail {
                    code = exit::INFEASIBLE;
                }
                report.verification = Some(v);
            }
            emit(out, &report, || render_text(&report), code)
        }
        Command::Verify { scenario, epsilon, window, out } => {
            let doc = ScenarioDoc::load(scenario)?;
            let epsilon = match epsilon {
                Some(e) => *e,
                None => {
                    let report = calibrate(&doc, *window)?;
                    if !report.feasible {
                        return Err(CliError::Invalid(
                            "the scenario is infeasible; pass --epsilon to verify a specific value".into(),
                        ));
                    }
                    report.epsilon.0
                }
            };
            let v = verify(&doc, epsilon)?;
            let code = if v.verdict == Verdict::Pass { exit::OK } else { exit::INFEASIBLE };
            emit(out, &v, || render_verify(&v), code)
        }
        Command::Bridge { scenario, window, out } => {
            let (doc, report) = calibrated(scenario, *window)?;
            let b = run_bridge(&doc, &report)?;
            let code = if b.succeeded() { exit::OK } else { exit::INFEASIBLE };
            emit(out, &b, || render_bridge(&b), code)
        }
        Command::Compose { eps, norm, out } => {
            let total = dual_norm_compose(eps, *norm)?;
            let report = ComposeReport {
                eps: eps.iter().copied().map(Num).collect(),
                input_norm: *norm,
                dual_norm: norm.dual(),
                total: Num(total),
            };
            let text = || format!("total epsilon = {} (input norm {}, dual norm {})\n", report.total, norm, norm.dual());
            emit(out, &report, text, exit::OK)
        }
    }
}

fn output_flags(cli: &Cli) -> &Output {
    match &cli.command {
        Command::Calibrate { out, .. }
        | Command::Verify { out, .. }
        | Command::Bridge { out, .. }
        | Command::Compose { out, .. } => out,
    }
}

/// Run a parsed command line. Errors become a diagnostic and an exit code.
pub fn run(cli: &Cli) -> Outcome {
    match dispatch(cli) {
        Ok(outcome) => outcome,
        Err(e) => {
            let code = e.exit_code();
            let mut outcome = Outcome { code, stderr: format!("error: {e}\n"), ..Default::default() };
            if output_flags(cli).json {
                let report = ErrorReport { error: e.to_string(), exit_code: code };
                outcome.stdout = to_canonical_json(&report).unwrap_or_default();
            }
            outcome
        }
    }
}
