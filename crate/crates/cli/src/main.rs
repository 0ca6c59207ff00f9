//! Command-line front end for RBF fitting, Helmholtz-Hodge decomposition and
//! the analysis tools of the `rbf-hhd` crate.
//!
//! Exit codes: 0 success, 1 numerical failure, 2 input or usage error.

// `!(a > b)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod io;
mod settings;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::*;
use settings::{GlobalArgs, Settings};

#[derive(Debug, Parser)]
#[command(
    name = "rbf-hhd",
    version,
    about = "Meshless RBF potentials and Helmholtz-Hodge decomposition"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a scalar potential to scalar and/or gradient samples.
    Fit(FitArgs),
    /// Split a sampled vector field into conservative, solenoidal and harmonic parts.
    Hhd(HhdArgs),
    /// Select RBF centres from a sample file.
    Centres(CentresArgs),
    /// Evaluate models on a regular grid (CSV and/or legacy VTK).
    EvalGrid(EvalGridArgs),
    /// Trace RK4 streamlines of a model or analytic field.
    Streamlines(StreamlinesArgs),
    /// Locate and classify critical points of a scalar model.
    CriticalPoints(CriticalArgs),
    /// Compare a candidate sample file against a reference.
    Metrics(MetricsArgs),
    /// Add seeded Gaussian noise to a sample file.
    Noise(NoiseArgs),
    /// Noise-propagation bound for a fitted model.
    Bound(BoundArgs),
    /// Write samples of a built-in analytic field.
    Sample(SampleArgs),
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let settings = Settings::resolve(&cli.global)?;
    match cli.command {
        Command::Fit(a) => fit(&settings, a),
        Command::Hhd(a) => hhd(&settings, a),
        Command::Centres(a) => centres(&settings, a),
        Command::EvalGrid(a) => eval_grid(&settings, a),
        Command::Streamlines(a) => streamlines(&settings, a),
        Command::CriticalPoints(a) => critical_points(&settings, a),
        Command::Metrics(a) => metrics(&settings, a),
        Command::Noise(a) => noise(&settings, a),
        Command::Bound(a) => bound(&settings, a),
        Command::Sample(a) => sample(&settings, a),
    }
}

/// 1 for numerical failures of the solver or kernels, 2 for everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    let numerical = err
        .chain()
        .filter_map(|e| e.downcast_ref::<rbf_hhd::Error>())
        .any(rbf_hhd::Error::is_numerical);
    if numerical {
        1
    } else {
        2
    }
}

/// The error chain joined by `: `, skipping causes already quoted by the
/// message above them.
fn describe(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if out.contains(&text) {
            continue;
        }
        if !out.is_empty() {
            out.push_str(": ");
        }
        out.push_str(&text);
    }
    out
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", describe(&err));
            ExitCode::from(exit_code(&err))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn numerical_errors_map_to_one() {
        let e: anyhow::Error = rbf_hhd::Error::IllConditioned { condition: 1e20 }.into();
        assert_eq!(exit_code(&e), 1);
        let e = e.context("fitting");
        assert_eq!(exit_code(&e), 1);
        let e: anyhow::Error = rbf_hhd::Error::Input("bad".into()).into();
        assert_eq!(exit_code(&e), 2);
        assert_eq!(exit_code(&anyhow::anyhow!("other")), 2);
    }

    #[test]
    fn repeated_causes_are_printed_once() {
        let io = std::io::Error::new(std::io::ErrorKind::NotFound, "gone");
        let e: anyhow::Error = rbf_hhd::Error::io("a.csv", io).into();
        let e = e.context("reading");
        assert_eq!(describe(&e), "reading: I/O error on a.csv: gone");
    }
}
