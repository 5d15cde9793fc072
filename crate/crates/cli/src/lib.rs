//! Declarative experiment runner: a TOML configuration names a domain, a
//! boundary condition, coefficient fields and an experiment; the run writes
//! `summary.json`, `timing.json` and CSV details.

pub mod config;
pub mod experiments;
pub mod record;
pub mod report;

use config::{ConfigError, ExperimentConfig, ExperimentKind};
use record::{canonical_json, sha256_hex, write_atomic, ExperimentRecord};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Command-line overrides applied on top of the configuration file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub resolution: Option<usize>,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("config asks for `{config}` but the command is `{command}`")]
    KindMismatch { config: ExperimentKind, command: ExperimentKind },
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: std::io::Error },
}

#[derive(Clone, Debug, Serialize)]
pub struct Timing {
    pub experiment: String,
    pub wall_clock_seconds: f64,
}

/// Resolves the experiment kind and applies overrides.
pub fn prepare(mut cfg: ExperimentConfig, kind: ExperimentKind, o: &Overrides) -> Result<ExperimentConfig, RunError> {
    if let Some(k) = cfg.experiment {
        if k != kind {
            return Err(RunError::KindMismatch { config: k, command: kind });
        }
    }
    cfg.experiment = Some(kind);
    if let Some(seed) = o.seed {
        cfg.seed = seed;
    }
    if let Some(n) = o.resolution {
        cfg.domain.resolution = vec![n];
    }
    cfg.validate()?;
    Ok(cfg)
}

/// SHA-256 of the canonical JSON of the configuration, output path excluded.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let mut c = cfg.clone();
    c.output = None;
    sha256_hex(&canonical_json(&c))
}

/// Runs the experiment named in `cfg`. Numerical failures are recorded in
/// the record, not returned as errors.
pub fn run(cfg: &ExperimentConfig) -> Result<(ExperimentRecord, Vec<(String, String)>, Timing), RunError> {
    let kind = cfg.experiment.unwrap_or(ExperimentKind::FullSuite);
    let start = Instant::now();
    let setup = experiments::Setup::new(cfg)?;
    let mut record = ExperimentRecord {
        experiment: kind.name().into(),
        config_hash: config_hash(cfg),
        seed: cfg.seed,
        resolution: setup.grid.nodes_per_axis().to_vec(),
        ..Default::default()
    };
    let mut artifacts = Vec::new();
    match experiments::run_kind(kind, &setup) {
        Ok(o) => {
            record.checks = o.checks;
            record.values = o.values;
            record.warnings = o.warnings;
            artifacts = o.artifacts;
        }
        Err(e) => record.errors.push(e.to_string()),
    }
    if let Some(name) = record.duplicate_check() {
        record.errors.push(format!("check `{name}` declared twice"));
    }
    record.artifacts = artifacts.iter().map(|(n, _)| n.clone()).collect();
    let timing = Timing { experiment: kind.name().into(), wall_clock_seconds: start.elapsed().as_secs_f64() };
    Ok((record, artifacts, timing))
}

/// Writes the summary, timing and CSV files into `dir`.
pub fn write_outputs(
    dir: &Path,
    record: &ExperimentRecord,
    artifacts: &[(String, String)],
    timing: &Timing,
) -> Result<PathBuf, RunError> {
    let write = |name: &str, text: &str| {
        let path = dir.join(name);
        write_atomic(&path, text).map_err(|source| RunError::Write { path: path.display().to_string(), source })
    };
    for (name, text) in artifacts {
        write(name, text)?;
    }
    write("timing.json", &canonical_json(timing))?;
    write("summary.json", &canonical_json(record))?;
    Ok(dir.join("summary.json"))
}
