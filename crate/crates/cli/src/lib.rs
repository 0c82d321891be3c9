//! Scenario runner for the stratified shear-flow simulator.
//!
//! A run reads a [`RunConfig`], integrates every wavenumber in `k_list`, and
//! writes one CSV time series per wavenumber plus a JSON summary.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration error, 3 solver
//! failure, 4 failed acceptance assertion.

// Parameter checks are written as `!(x > 0.0)` on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod run;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Parser;

pub use config::RunConfig;
pub use run::{execute, Artifacts, Summary};

/// Environment variable overriding the configured output directory.
pub const OUT_ENV: &str = "STRATSHEAR_OUT";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("acceptance assertions failed: {0}")]
    Assertion(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Assertion(_) => 4,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "stratshear",
    version,
    about = "Linear stratified shear-flow runs over a list of wavenumbers"
)]
pub struct Cli {
    /// Run configuration (TOML, `key = value` with dotted sections).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides STRATSHEAR_OUT and `output.dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Enforce the `assert.*` checks of the config.
    #[arg(long)]
    pub assert: bool,
    /// Worker threads across wavenumbers (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Reserved. Runs are deterministic and do not sample.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Output directory by precedence: flag, environment, config.
pub fn resolve_out_dir(flag: Option<&Path>, env: Option<OsString>, config: &RunConfig) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| env.filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| config.output.dir.clone())
}

pub fn write_artifacts(artifacts: &Artifacts, dir: &Path, prefix: &str) -> Result<Vec<PathBuf>, CliError> {
    let io = |path: &Path, e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let mut written = Vec::new();
    for (k, rows) in &artifacts.series {
        let path = dir.join(run::csv_name(prefix, *k));
        let mut text = String::with_capacity(rows.len() * 220);
        text.push_str(run::CSV_HEADER);
        text.push('\n');
        for row in rows {
            text.push_str(&row.to_csv());
            text.push('\n');
        }
        fs::write(&path, text).map_err(|e| io(&path, e))?;
        written.push(path);
    }
    let path = dir.join(run::summary_name(prefix));
    let mut json = serde_json::to_string_pretty(&artifacts.summary).map_err(|e| CliError::Io(e.to_string()))?;
    json.push('\n');
    let mut file = fs::File::create(&path).map_err(|e| io(&path, e))?;
    file.write_all(json.as_bytes()).map_err(|e| io(&path, e))?;
    written.push(path);
    Ok(written)
}

/// Parses, runs and writes. Artifacts are written before assertions are
/// judged, so a failing run still leaves its evidence on disk.
pub fn run_cli(cli: &Cli) -> Result<Summary, CliError> {
    let mut config = RunConfig::load(&cli.config)?;
    config.assertions.enabled |= cli.assert;
    let dir = resolve_out_dir(cli.out.as_deref(), std::env::var_os(OUT_ENV), &config);
    let artifacts = execute(&config, cli.jobs)?;
    for path in write_artifacts(&artifacts, &dir, &config.output.prefix)? {
        eprintln!("wrote {}", path.display());
    }
    let report = &artifacts.summary.assertions;
    if report.enabled {
        if report.checks.is_empty() {
            eprintln!("warning: assertions enabled but the config sets no `assert.*` checks");
        }
        let failed: Vec<String> = report
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{} at k = {}: {} not in {}", c.name, c.k, c.value, c.expected))
            .collect();
        if !failed.is_empty() {
            return Err(CliError::Assertion(failed.join("; ")));
        }
    }
    Ok(artifacts.summary)
}

/// Entry point shared by the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run_cli(&cli) {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
