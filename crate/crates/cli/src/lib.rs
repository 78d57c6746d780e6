//! Command-line harness for the `treedyn` simulation toolkit.

// Negated float comparisons are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod report;
pub mod verify;

use std::io::Write;
use std::time::Instant;

use crate::args::Cli;
use crate::config::{ExperimentConfig, Format};
use crate::error::{exit, CliError};
use crate::report::{Report, Timing};

/// A finished run before it is written anywhere.
pub struct Outcome {
    pub report: Report,
    pub timing: Timing,
    /// False when a verify suite had failing checks.
    pub passed: bool,
}

/// Merges the config file and the flags, resolves guards against `env`, and
/// runs the command on a pool of the requested size.
pub fn execute(cli: &Cli, env: impl Fn(&str) -> Option<String>) -> Result<Outcome, CliError> {
    let mut layers = Vec::new();
    if let Some(path) = &cli.config {
        layers.push(ExperimentConfig::load(path)?);
    }
    let (flags, extras) = cli.layer();
    layers.push(flags);
    let mut config = ExperimentConfig::from_layers(&layers)?;
    let guards = config.resolve_guards(env)?;
    let workers = config.sampling.workers.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {workers} workers: {e}")))?;
    let workers = pool.current_num_threads();
    let start = Instant::now();
    let command = config.command.clone().unwrap_or_default();
    let (report, checks, passed) = pool.install(|| match command.strip_prefix("verify ") {
        Some(suite) => {
            let o = verify::run_suite(&mut config, guards, suite)?;
            Ok::<_, CliError>((o.report, o.elapsed, o.passed))
        }
        None => Ok((commands::run(&mut config, guards, extras.input.as_deref())?, Vec::new(), true)),
    })?;
    let timing = Timing {
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        workers,
        checks,
    };
    Ok(Outcome { report, timing, passed })
}

/// Runs the CLI and returns the process exit status. Data goes to `out`
/// unless an output directory is configured; diagnostics go to `err`.
pub fn run_cli(
    cli: &Cli,
    env: impl Fn(&str) -> Option<String>,
    out: &mut impl Write,
    err: &mut impl Write,
) -> i32 {
    match run_inner(cli, env, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "treedyn: {e}");
            e.exit_code()
        }
    }
}

fn run_inner(cli: &Cli, env: impl Fn(&str) -> Option<String>, out: &mut impl Write) -> Result<i32, CliError> {
    let outcome = execute(cli, env)?;
    let output = &outcome.report.config.output;
    match &output.dir {
        Some(dir) => {
            for path in outcome.report.write(dir, &outcome.timing)? {
                writeln!(out, "{}", path.display())?;
            }
        }
        None => {
            let format = output.format.unwrap_or(Format::Csv);
            out.write_all(outcome.report.stdout_text(format).as_bytes())?;
        }
    }
    if outcome.passed {
        Ok(exit::OK)
    } else {
        let failed = &outcome.report.summary["failed"];
        Err(CliError::VerifyFailed(format!("checks {failed} did not pass")))
    }
}
