//! Command-line driver: configuration, subcommands and output files.

pub mod check;
pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::fmt::Display;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde_json::json;

pub use config::{Mode, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid `{field}`: {message}")]
    Validation { field: String, message: String },
    #[error("numerical failure: {0}")]
    Numerical(perfhom_core::Error),
    #[error("{0}")]
    Io(String),
    #[error("failed checks: {0}")]
    CheckFailed(String),
}

impl CliError {
    pub fn validation(field: &str, message: impl Display) -> Self {
        CliError::Validation {
            field: field.to_string(),
            message: message.to_string(),
        }
    }

    /// Numerical core errors keep their class; the rest become validation
    /// errors on the named field (or on the field the core error names).
    pub fn from_core(field: &str, e: perfhom_core::Error) -> Self {
        match e {
            e if e.is_numerical() => CliError::Numerical(e),
            perfhom_core::Error::InvalidParameter { field, reason } => CliError::Validation { field, message: reason },
            perfhom_core::Error::EpsilonNotUnitFraction(_) => CliError::validation("epsilon", e),
            perfhom_core::Error::KernelUnresolved { .. } => CliError::validation("delta", e),
            perfhom_core::Error::NegativeInitialData(_) => CliError::validation("initial", e),
            perfhom_core::Error::NonElliptic(_) => CliError::validation("physics", e),
            perfhom_core::Error::HoleNotGridAligned(_)
            | perfhom_core::Error::HoleTouchesCellBoundary
            | perfhom_core::Error::EmptyRobinPart
            | perfhom_core::Error::EmptyNeumannPart => CliError::validation("geometry", e),
            e => CliError::validation(field, e),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(_) | CliError::CheckFailed(_) => 2,
            _ => 1,
        }
    }

    fn status(&self) -> &'static str {
        match self {
            CliError::Parse { .. } => "parse_error",
            CliError::Validation { .. } => "validation_error",
            CliError::Numerical(_) => "numerical_error",
            CliError::Io(_) => "io_error",
            CliError::CheckFailed(_) => "check_failed",
        }
    }
}

impl From<perfhom_core::Error> for CliError {
    fn from(e: perfhom_core::Error) -> Self {
        CliError::from_core("config", e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "perfhom", version, about = "Homogenization solvers for thermo-diffusion in perforated media")]
pub struct Cli {
    /// What to run.
    #[arg(value_enum)]
    pub command: Mode,
    /// Configuration file (TOML).
    #[arg(short, long)]
    pub config: PathBuf,
    /// Output directory; overrides `run.output`.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Also write an SVG chart; relative paths are taken inside the output directory.
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Worker threads for independent runs.
    #[arg(long, env = "PERFHOM_THREADS")]
    pub threads: Option<usize>,
    /// Sequential, byte-reproducible outputs.
    #[arg(long)]
    pub deterministic: bool,
}

const DEFAULT_OUTPUT: &str = "perfhom-out";

/// Runs the tool and returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let loaded = RunConfig::load(&cli.config);
    let outdir = cli
        .output
        .clone()
        .or_else(|| loaded.as_ref().ok().and_then(|(c, _)| c.run.output.clone().map(PathBuf::from)))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT));
    if let Err(e) = std::fs::create_dir_all(&outdir) {
        eprintln!("perfhom: cannot create {}: {e}", outdir.display());
        return 1;
    }
    let result = loaded.and_then(|(cfg, _)| execute(&cli, cfg, &outdir));
    let (code, status) = match &result {
        Ok(summary) => (0, json!({"command": cli.command.as_str(), "status": "ok", "exit_code": 0, "summary": summary})),
        Err(e) => {
            eprintln!("perfhom: {e}");
            let mut s = json!({
                "command": cli.command.as_str(),
                "status": e.status(),
                "exit_code": e.exit_code(),
                "message": e.to_string(),
            });
            match e {
                CliError::Parse { line, .. } => s["line"] = json!(line),
                CliError::Validation { field, .. } => s["field"] = json!(field),
                _ => {}
            }
            (e.exit_code(), s)
        }
    };
    if result.is_err() && !outdir.join("config.toml").exists() {
        // Echo whatever was given so the directory is never without a config.
        let raw = std::fs::read_to_string(&cli.config).unwrap_or_default();
        let _ = std::fs::write(outdir.join("config.toml"), raw);
    }
    let text = serde_json::to_string_pretty(&status).expect("status serializes") + "\n";
    if let Err(e) = std::fs::write(outdir.join("status.json"), text) {
        eprintln!("perfhom: cannot write status.json: {e}");
        return 1;
    }
    code
}

fn execute(cli: &Cli, cfg: RunConfig, outdir: &Path) -> Result<serde_json::Value, CliError> {
    let mut resolved = cfg.resolve()?;
    let run = &mut resolved.config.run;
    run.mode = Some(cli.command);
    run.deterministic |= cli.deterministic;
    if let Some(t) = cli.threads {
        run.threads = Some(t);
    }
    if let Some(s) = &cli.svg {
        run.svg = Some(s.display().to_string());
    }
    run.output = Some(outdir.display().to_string());
    std::fs::write(outdir.join("config.toml"), resolved.config.echo())?;
    if resolved.config.run.threads == Some(0) {
        return Err(CliError::validation("threads", "must be positive"));
    }
    let threads = if resolved.config.run.deterministic {
        1
    } else {
        resolved.config.run.threads.unwrap_or(0)
    };
    let svg = resolved.config.run.svg.as_ref().map(|s| outdir.join(s));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::validation("threads", e))?;
    pool.install(|| commands::dispatch(cli.command, &resolved, outdir, svg.as_deref()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::from(perfhom_core::Error::BlowUp(1e9)).exit_code(), 2);
        let nc = perfhom_core::Error::NotConverged {
            iterations: 10,
            residual: 1.0,
        };
        assert_eq!(CliError::from(nc).exit_code(), 2);
        let v = CliError::from(perfhom_core::Error::EpsilonNotUnitFraction(0.3));
        assert_eq!(v.exit_code(), 1);
        assert!(matches!(v, CliError::Validation { ref field, .. } if field == "epsilon"));
        assert_eq!(CliError::Parse { line: 1, message: String::new() }.exit_code(), 1);
    }
}
