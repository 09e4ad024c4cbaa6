//! Command-line front end: index runs, verification batteries, radius
//! sweeps and sample-file checks, rendered as JSON, CSV or text.

pub mod args;
pub mod commands;
pub mod report;

use std::io::Write;

use clap::Parser;

pub use args::{Cli, Format};
pub use report::{Results, RunReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;
pub const EXIT_HYPOTHESIS: i32 = 4;
pub const EXIT_IO: i32 = 5;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] cmc_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use cmc_core::Error as E;
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io { .. } => EXIT_IO,
            CliError::Core(e) => match e {
                E::InvalidSpec(_) | E::Unsupported(_) | E::NotConstantCurvature(_) | E::NotMinimal { .. } => EXIT_USAGE,
                E::DegenerateMetric { .. } => EXIT_DEGENERATE,
                E::Umbilical { .. } => EXIT_HYPOTHESIS,
                E::Io(_) | E::Parse { .. } => EXIT_IO,
                E::Breakdown { .. } => EXIT_CHECK_FAILED,
            },
        }
    }

    pub fn describe(&self) -> String {
        match self {
            CliError::Core(cmc_core::Error::Umbilical { max_excess }) => format!(
                "theorem hypothesis not met: the surface is totally umbilical (max |A|^2 - nH^2 = {max_excess:.3e}), \
                 where the weak index is 0"
            ),
            CliError::Core(cmc_core::Error::DegenerateMetric { .. }) => format!("degenerate geometry: {self}"),
            other => other.to_string(),
        }
    }
}

pub fn render(report: &RunReport, format: Format) -> String {
    match format {
        Format::Json => report.to_json(),
        Format::Csv => report.to_csv(),
        Format::Text => report.to_text(),
    }
}

/// Parses `argv` (program name first), runs, writes the output and returns
/// the process exit code.
pub fn main_with_args<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let argv: Vec<std::ffi::OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 { stdout.write_all(text.as_bytes()) } else { stderr.write_all(text.as_bytes()) };
            return code;
        }
    };
    let echo = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect::<Vec<_>>().join(" ");
    let report = match commands::run(&cli, echo) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.describe());
            return e.exit_code();
        }
    };
    let text = render(&report, cli.format);
    let is_sweep = matches!(report.results, Results::Sweep(_));
    match (&cli.out, is_sweep) {
        (Some(path), false) => {
            if let Err(source) = std::fs::write(path, &text) {
                let e = CliError::Io { path: path.display().to_string(), source };
                let _ = writeln!(stderr, "error: {e}");
                return e.exit_code();
            }
        }
        _ => {
            let _ = stdout.write_all(text.as_bytes());
        }
    }
    if report.passed() {
        EXIT_OK
    } else {
        if let Results::Verify(v) = &report.results {
            for c in v.checks.iter().filter(|c| !c.passed) {
                let bound = if c.relation == "in" {
                    format!("[{}, {}]", c.bound[0], c.bound[1])
                } else {
                    format!("{:e}", c.bound[0])
                };
                let _ = writeln!(stderr, "check failed: {} = {:.6e} (needs {} {bound})", c.name, c.value, c.relation);
            }
        }
        EXIT_CHECK_FAILED
    }
}
