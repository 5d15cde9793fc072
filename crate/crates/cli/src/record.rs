//! Experiment records and their JSON form.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = "<")]
    Below,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// `None` when the value could not be computed; such a check fails.
    pub value: Option<f64>,
    pub tolerance: f64,
    pub relation: Relation,
    pub passed: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, relation: Relation, tolerance: f64) -> Check {
        let passed = match relation {
            Relation::AtMost => value <= tolerance,
            Relation::AtLeast => value >= tolerance,
            Relation::Below => value < tolerance,
        };
        Check {
            name: name.into(),
            value: value.is_finite().then_some(value),
            tolerance,
            relation,
            passed: passed && value.is_finite(),
        }
    }

    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Check {
        Check::new(name, value, Relation::AtMost, tolerance)
    }

    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Check {
        Check::new(name, value, Relation::AtLeast, bound)
    }

    pub fn below(name: impl Into<String>, value: f64, bound: f64) -> Check {
        Check::new(name, value, Relation::Below, bound)
    }

    pub fn errored(name: impl Into<String>, relation: Relation, tolerance: f64) -> Check {
        Check { name: name.into(), value: None, tolerance, relation, passed: false }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub experiment: String,
    pub config_hash: String,
    pub seed: u64,
    pub resolution: Vec<usize>,
    pub checks: Vec<Check>,
    /// Scalar results that are reported but not asserted.
    pub values: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
    pub errors: Vec<String>,
    pub artifacts: Vec<String>,
}

impl ExperimentRecord {
    pub fn passed(&self) -> bool {
        self.errors.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    pub fn passed_strict(&self) -> bool {
        self.passed() && self.warnings.is_empty()
    }

    /// Rejects records that declare the same check twice.
    pub fn duplicate_check(&self) -> Option<&str> {
        let mut seen = std::collections::BTreeSet::new();
        self.checks.iter().map(|c| c.name.as_str()).find(|n| !seen.insert(*n))
    }
}

/// Pretty JSON with keys in lexicographic order at every level.
pub fn canonical_json<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("serializable");
    let mut s = serde_json::to_string_pretty(&v).expect("serializable");
    s.push('\n');
    s
}

pub fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes through a temporary file in the same directory and renames it.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)
}
