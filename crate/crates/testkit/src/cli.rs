//! Command-line interface for the layered runner.
//!
//! ```text
//! testkit run [PATHS]... [--layer L] [--name PATTERN] [--report text|json]
//!             [--out FILE] [--jobs N] [--trace-dir DIR]
//!             [--fail-fast-within-layer]
//! testkit validate-docs [ROOT]
//! ```
//!
//! Exit codes: 0 every executed case passed, 1 at least one case failed
//! or errored, 2 configuration problem (malformed case file, unknown
//! agent, broken doc reference, unwritable output).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::docs::validate_docs;
use crate::fixtures;
use crate::pyramid::{discover, run_pyramid, DiscoverFilter, Layer, PyramidError, PyramidOptions};

#[derive(Debug, Parser)]
#[command(
    name = "testkit",
    version,
    about = "Layered structural test runner for tool-calling agents"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Discover *.case.json files and run them layer by layer.
    Run(RunArgs),
    /// Check that scenario docs cite only cases that exist in the suites.
    ValidateDocs {
        /// Repository root containing docs/ and suites/.
        #[arg(default_value = ".")]
        root: PathBuf,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Case files, or directories searched recursively for *.case.json.
    #[arg(default_value = "suites")]
    paths: Vec<PathBuf>,
    /// Run only this layer (unit, integration or acceptance).
    #[arg(long, value_parser = parse_layer)]
    layer: Option<Layer>,
    /// Run only cases whose name contains this substring.
    #[arg(long)]
    name: Option<String>,
    /// Report format written to stdout or --out.
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    report: ReportFormat,
    /// Write the report to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads per layer (1 = serial).
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Mirror every finished turn into this directory as JSONL.
    #[arg(long)]
    trace_dir: Option<PathBuf>,
    /// Skip the rest of a layer after its first non-passing case.
    #[arg(long)]
    fail_fast_within_layer: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Text,
    Json,
}

fn parse_layer(value: &str) -> Result<Layer, String> {
    value.parse().map_err(|e: PyramidError| e.to_string())
}

impl Cli {
    pub fn execute(self) -> ExitCode {
        match self.command {
            Command::Run(args) => run(args),
            Command::ValidateDocs { root } => validate(root),
        }
    }
}

/// Parses the process arguments and runs the selected command.
pub fn main() -> ExitCode {
    Cli::parse().execute()
}

fn config_error(message: impl std::fmt::Display) -> ExitCode {
    eprintln!("testkit: {message}");
    ExitCode::from(2)
}

fn run(args: RunArgs) -> ExitCode {
    let filter = DiscoverFilter { layer: args.layer, name: args.name };
    let cases = match discover(&args.paths, &filter) {
        Ok(cases) => cases,
        Err(e) => return config_error(e),
    };
    let options = PyramidOptions {
        jobs: args.jobs,
        fail_fast_within_layer: args.fail_fast_within_layer,
        trace_dir: args.trace_dir,
    };
    let report = match run_pyramid(&cases, &options, &fixtures::agent_by_name) {
        Ok(report) => report,
        Err(e) => return config_error(e),
    };

    let rendered = match args.report {
        ReportFormat::Text => report.to_text(),
        ReportFormat::Json => report.to_json(),
    };
    match args.out {
        Some(out) => {
            if let Err(e) = std::fs::write(&out, &rendered) {
                return config_error(format_args!("cannot write {}: {e}", out.display()));
            }
        }
        None => print!("{rendered}"),
    }
    ExitCode::from(report.exit_code as u8)
}

fn validate(root: PathBuf) -> ExitCode {
    match validate_docs(&root) {
        Ok(broken) if broken.is_empty() => {
            println!("docs ok: every cited case resolves to a discovered case");
            ExitCode::SUCCESS
        }
        Ok(broken) => {
            for reference in &broken {
                eprintln!("testkit: {reference}");
            }
            ExitCode::from(2)
        }
        Err(e) => config_error(e),
    }
}
