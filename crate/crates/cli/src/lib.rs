//! Config-driven experiments over the `coopnet` engines.
//!
//! A run reads one TOML file, resolves it into an [`Experiment`], evaluates
//! every requested cell and writes CSV tables whose `#` header records the
//! config digest, seed and version.

pub mod acceptance;
pub mod config;
pub mod error;
pub mod experiments;
pub mod output;

use std::path::{Path, PathBuf};

pub use config::{Experiment, Kind, Overrides, RawConfig};
pub use error::CliError;

use acceptance::{Budget, Check, Report};

#[derive(Debug)]
pub struct Outcome {
    pub written: Vec<PathBuf>,
    pub report: Option<Report>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        match &self.report {
            Some(r) if !r.passed() => 4,
            _ => 0,
        }
    }
}

pub fn load(config: &Path, overrides: &Overrides) -> Result<Experiment, CliError> {
    let mut raw = RawConfig::load(config)?;
    overrides.apply(&mut raw);
    Experiment::resolve(&raw)
}

pub fn header(exp: &Experiment) -> Vec<(String, String)> {
    vec![
        ("coopnet_version".into(), env!("CARGO_PKG_VERSION").into()),
        ("config_sha256".into(), exp.digest.clone()),
        ("seed".into(), exp.seed.to_string()),
        ("kind".into(), exp.kind.name().into()),
    ]
}

/// Runs an experiment and writes its tables. Acceptance checks are reported
/// through `on_check` as they finish.
pub fn execute(
    exp: &Experiment,
    on_check: &mut (dyn FnMut(&Check) + Send),
) -> Result<Outcome, CliError> {
    with_workers(exp.workers, || {
        let (tables, report) = match exp.kind {
            Kind::Acceptance => {
                let report = acceptance::run(&Budget::from(exp), on_check)?;
                (vec![report.table()], Some(report))
            }
            _ => (experiments::Runner::new(exp).tables()?, None),
        };
        let written = output::write_tables(&exp.output, &header(exp), &tables)?;
        Ok(Outcome { written, report })
    })
}

pub fn run(
    config: &Path,
    overrides: &Overrides,
    on_check: &mut (dyn FnMut(&Check) + Send),
) -> Result<Outcome, CliError> {
    execute(&load(config, overrides)?, on_check)
}

#[cfg(feature = "parallel")]
fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    if workers == 0 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

#[cfg(not(feature = "parallel"))]
fn with_workers<T>(_workers: usize, f: impl FnOnce() -> T) -> T {
    f()
}
