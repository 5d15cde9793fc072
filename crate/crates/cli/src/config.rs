//! Experiment configuration, read from TOML.

use semimax_core::discretize::BUILTIN_FIELDS;
use semimax_core::{builtin_field, BoundaryCondition, ComplexMatrix, Grid, MatrixField};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Ellipticity,
    Semigroup,
    ImaginaryPowers,
    Maximal,
    Ergodic,
    Difference,
    Duhamel,
    Transfer,
    Subordinate,
    SquareFunction,
    TwoParam,
    FullSuite,
}

impl ExperimentKind {
    /// Every kind that `full-suite` runs, in order.
    pub const SUITE: [ExperimentKind; 11] = [
        ExperimentKind::Ellipticity,
        ExperimentKind::Semigroup,
        ExperimentKind::ImaginaryPowers,
        ExperimentKind::Maximal,
        ExperimentKind::Ergodic,
        ExperimentKind::Difference,
        ExperimentKind::Duhamel,
        ExperimentKind::Transfer,
        ExperimentKind::Subordinate,
        ExperimentKind::SquareFunction,
        ExperimentKind::TwoParam,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Ellipticity => "ellipticity",
            ExperimentKind::Semigroup => "semigroup",
            ExperimentKind::ImaginaryPowers => "imaginary-powers",
            ExperimentKind::Maximal => "maximal",
            ExperimentKind::Ergodic => "ergodic",
            ExperimentKind::Difference => "difference",
            ExperimentKind::Duhamel => "duhamel",
            ExperimentKind::Transfer => "transfer",
            ExperimentKind::Subordinate => "subordinate",
            ExperimentKind::SquareFunction => "square-function",
            ExperimentKind::TwoParam => "two-param",
            ExperimentKind::FullSuite => "full-suite",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default)]
    pub extents: Option<Vec<f64>>,
    /// Nodes per axis; one entry is used for every axis.
    #[serde(default = "default_resolution")]
    pub resolution: Vec<usize>,
}

fn default_dim() -> usize {
    1
}

fn default_resolution() -> Vec<usize> {
    vec![64]
}

impl Default for DomainSpec {
    fn default() -> Self {
        DomainSpec { dim: 1, extents: None, resolution: default_resolution() }
    }
}

impl DomainSpec {
    pub fn grid(&self) -> Result<Grid, ConfigError> {
        let extents = self.extents.clone().unwrap_or_else(|| vec![1.0; self.dim]);
        let nodes = match self.resolution.as_slice() {
            [n] => vec![*n; self.dim],
            r => r.to_vec(),
        };
        if extents.len() != self.dim || nodes.len() != self.dim {
            return Err(ConfigError::invalid(
                "domain",
                format!("dim = {} but {} extents and {} resolutions", self.dim, extents.len(), nodes.len()),
            ));
        }
        Grid::new(&extents, &nodes).map_err(|e| ConfigError::invalid("domain", e.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    Builtin,
    Constant,
    RotatedReal,
    Checkerboard,
    Inline,
}

/// A coefficient field: a named built-in, a generator with its matrices, or
/// inline per-cell matrices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub generator: Generator,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<ComplexMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a1: Option<ComplexMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a2: Option<ComplexMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tiles: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cells: Option<Vec<ComplexMatrix>>,
}

const DEFAULT_TILES: usize = 4;

fn required<'a, T>(v: &'a Option<T>, key: &str, what: &str) -> Result<&'a T, ConfigError> {
    v.as_ref().ok_or_else(|| ConfigError::invalid(key, format!("required by generator `{what}`")))
}

impl FieldSpec {
    pub fn builtin(name: &str) -> FieldSpec {
        FieldSpec {
            generator: Generator::Builtin,
            name: Some(name.into()),
            matrix: None,
            theta: None,
            a1: None,
            a2: None,
            tiles: None,
            cells: None,
        }
    }

    pub fn build(&self, grid: &Grid, key: &str) -> Result<MatrixField, ConfigError> {
        let k = |f: &str| format!("{key}.{f}");
        let r = match self.generator {
            Generator::Builtin => {
                let name = required(&self.name, &k("name"), "builtin")?;
                if !BUILTIN_FIELDS.contains(&name.as_str()) {
                    return Err(ConfigError::invalid(
                        &k("name"),
                        format!("unknown built-in field `{name}`; expected one of {BUILTIN_FIELDS:?}"),
                    ));
                }
                builtin_field(name, grid)
            }
            Generator::Constant => MatrixField::constant(grid, required(&self.matrix, &k("matrix"), "constant")?),
            Generator::RotatedReal => MatrixField::rotated_real(
                grid,
                required(&self.matrix, &k("matrix"), "rotated_real")?,
                *required(&self.theta, &k("theta"), "rotated_real")?,
            ),
            Generator::Checkerboard => MatrixField::checkerboard(
                grid,
                required(&self.a1, &k("a1"), "checkerboard")?,
                required(&self.a2, &k("a2"), "checkerboard")?,
                self.tiles.unwrap_or(DEFAULT_TILES),
            ),
            Generator::Inline => MatrixField::custom(grid, required(&self.cells, &k("cells"), "inline")?.clone()),
        };
        r.map_err(|e| ConfigError::invalid(key, e.to_string()))
    }
}

/// Time samples: explicit list, or a log grid fitted to the spectrum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGridSpec {
    #[serde(default = "default_per_decade")]
    pub per_decade: usize,
}

fn default_per_decade() -> usize {
    20
}

impl Default for TimeGridSpec {
    fn default() -> Self {
        TimeGridSpec { per_decade: default_per_decade() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Parameters {
    pub p: Vec<f64>,
    pub alpha: Vec<f64>,
    /// Times for Duhamel and ergodic comparisons.
    pub times: Vec<f64>,
    pub t_grid: TimeGridSpec,
    /// Random test functions per scan.
    pub functions: usize,
    /// Greedy refinement steps of the norm search.
    pub greedy_steps: usize,
    pub u_max: f64,
    pub u_samples: usize,
    pub gamma: f64,
    pub theta: f64,
    pub truncation_u: Vec<f64>,
    pub n_quad: usize,
    pub duhamel_nodes: usize,
}

impl Default for Parameters {
    fn default() -> Self {
        Parameters {
            p: vec![1.5, 2.0, 4.0],
            alpha: vec![0.25],
            times: vec![0.01, 0.1],
            t_grid: TimeGridSpec::default(),
            functions: 20,
            greedy_steps: 40,
            u_max: 10.0,
            u_samples: 41,
            gamma: 1.0,
            theta: std::f64::consts::PI / 6.0,
            truncation_u: vec![20.0, 40.0, 60.0],
            n_quad: 4000,
            duhamel_nodes: 512,
        }
    }
}

/// Tolerances of the recorded checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub identity: f64,
    pub contraction: f64,
    pub sector: f64,
    pub transfer: f64,
    pub dual_path: f64,
    pub duhamel: f64,
    pub ergodic: f64,
    pub beta_mass: f64,
    pub mellin: f64,
    pub cowling: f64,
    pub rotation: f64,
    pub square_function: f64,
    pub stability: f64,
    pub grid_slack: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            identity: 1e-10,
            contraction: 1e-10,
            sector: 1e-6,
            transfer: 1e-8,
            dual_path: 1e-6,
            duhamel: 1e-6,
            ergodic: 1e-8,
            beta_mass: 1e-8,
            mellin: 1e-8,
            cowling: 1e-6,
            rotation: 1e-10,
            square_function: 1e-8,
            stability: 0.1,
            grid_slack: 1e-2,
        }
    }
}

impl Tolerances {
    fn validate(&self) -> Result<(), ConfigError> {
        let all = [
            ("identity", self.identity),
            ("contraction", self.contraction),
            ("sector", self.sector),
            ("transfer", self.transfer),
            ("dual_path", self.dual_path),
            ("duhamel", self.duhamel),
            ("ergodic", self.ergodic),
            ("beta_mass", self.beta_mass),
            ("mellin", self.mellin),
            ("cowling", self.cowling),
            ("rotation", self.rotation),
            ("square_function", self.square_function),
            ("stability", self.stability),
            ("grid_slack", self.grid_slack),
        ];
        for (name, v) in all {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::invalid(&format!("tolerances.{name}"), format!("must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub experiment: Option<ExperimentKind>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub domain: DomainSpec,
    #[serde(default = "default_bc")]
    pub bc: BoundaryCondition,
    #[serde(default = "default_field")]
    pub field: FieldSpec,
    /// Second field for comparisons; defaults to the real symmetric built-in.
    #[serde(default)]
    pub field_b: Option<FieldSpec>,
    #[serde(default)]
    pub params: Parameters,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: Option<String>,
}

fn default_bc() -> BoundaryCondition {
    BoundaryCondition::Dirichlet
}

fn default_field() -> FieldSpec {
    FieldSpec::builtin("complex_checkerboard")
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: None,
            seed: 0,
            domain: DomainSpec::default(),
            bc: default_bc(),
            field: default_field(),
            field_b: None,
            params: Parameters::default(),
            tolerances: Tolerances::default(),
            output: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid `{key}`: {message}")]
    Invalid { key: String, message: String },
}

impl ConfigError {
    pub fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError::Invalid { key: key.into(), message: message.into() }
    }
}

impl ExperimentConfig {
    /// Parses TOML, naming the offending key and line on failure.
    pub fn from_toml(text: &str, origin: &str) -> Result<ExperimentConfig, ConfigError> {
        let de = toml::Deserializer::parse(text).map_err(|e| ConfigError::Parse {
            path: origin.into(),
            message: e.to_string(),
        })?;
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            ConfigError::Parse { path: origin.into(), message: format!("at `{key}`: {}", e.into_inner()) }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        ExperimentConfig::from_toml(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.tolerances.validate()?;
        self.domain.grid()?;
        let p = &self.params;
        if p.p.iter().any(|&x| !(x > 1.0)) {
            return Err(ConfigError::invalid("params.p", "every p must exceed 1"));
        }
        if p.alpha.iter().any(|&a| !(a > 0.0 && a < 0.5)) {
            return Err(ConfigError::invalid("params.alpha", "every alpha must lie in (0, 1/2)"));
        }
        if p.times.iter().any(|&t| !(t > 0.0)) {
            return Err(ConfigError::invalid("params.times", "times must be positive"));
        }
        if p.functions < semimax_core::maximal::MIN_INITIAL {
            return Err(ConfigError::invalid(
                "params.functions",
                format!("at least {} test functions are needed", semimax_core::maximal::MIN_INITIAL),
            ));
        }
        if p.t_grid.per_decade == 0 || p.u_samples < 2 || !(p.u_max > 0.0) || p.n_quad == 0 || p.duhamel_nodes == 0 {
            return Err(ConfigError::invalid("params", "sample counts and ranges must be positive"));
        }
        if !(p.gamma > 0.0) {
            return Err(ConfigError::invalid("params.gamma", "must be positive"));
        }
        if !(p.theta > 0.0 && p.theta < std::f64::consts::FRAC_PI_2) {
            return Err(ConfigError::invalid("params.theta", "must lie in (0, pi/2)"));
        }
        if p.truncation_u.is_empty() || p.truncation_u.iter().any(|&u| !(u > 0.0)) {
            return Err(ConfigError::invalid("params.truncation_u", "needs positive truncations"));
        }
        Ok(())
    }

    /// Same configuration at `n` nodes per axis.
    pub fn at_resolution(&self, n: usize) -> ExperimentConfig {
        let mut c = self.clone();
        c.domain.resolution = vec![n];
        c
    }

    pub fn field_b(&self) -> FieldSpec {
        self.field_b.clone().unwrap_or_else(|| FieldSpec::builtin("real_symmetric"))
    }
}
