//! Declarative experiment configs.
//!
//! A config is a strict JSON document: unknown keys are rejected and every
//! semantic problem is reported with the dotted path of the offending field.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{ConfigIssue, Error, Result};
use crate::models::{BlochModel, ModelKind, Occupation};
use crate::region::Region;
use crate::response::DriveSpectrum;
use crate::scaling::ScalingLaw;

pub const SCHEMA_VERSION: u32 = 1;

/// Refuse frequency grids larger than this many points.
pub const MAX_GRID_POINTS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegionSpec {
    /// `l_a = N_a / 2` along every axis.
    HalfSquare,
    /// `l_x = N_x`, `l_y = 1` on a two-dimensional lattice.
    Strip,
    /// Explicit site list, reused for every size.
    Sites { sites: Vec<Vec<usize>> },
}

impl RegionSpec {
    pub fn resolve(&self, dims: &[usize]) -> Result<Region> {
        match self {
            Self::HalfSquare => Region::half_box(dims),
            Self::Strip => Region::strip(dims),
            Self::Sites { sites } => Region::from_sites(dims, sites.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WindowSpec {
    /// Measure `Δω` on the reference mesh and reuse it for every size.
    Auto {
        reference_dims: Vec<usize>,
        step_axis: usize,
    },
    Explicit { delta_omega: f64 },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridSpec {
    /// Spacing `Δω/4` covering every transition plus `2Δω` on either side.
    #[default]
    Auto,
    Uniform { start: f64, stop: f64, step: f64 },
}

/// Frequency at which size series of `S̄` are probed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Probe {
    /// The grid point where the first size's spectrum peaks.
    Named(ProbeName),
    Value(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeName {
    Peak,
}

impl Default for Probe {
    fn default() -> Self {
        Self::Named(ProbeName::Peak)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossoverSpec {
    pub temperatures: Vec<f64>,
    pub omega0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSpec {
    pub laws: Vec<ScalingLaw>,
    pub collapse: bool,
    /// Overrides the scaling dimension (strips default to 1).
    pub dimension: Option<usize>,
    pub probe_omega0: Probe,
    pub crossover: Option<CrossoverSpec>,
    /// Largest distance for the correlator decay profile; defaults to `N_x / 2`.
    pub decay_max_distance: Option<usize>,
}

impl Default for AnalysisSpec {
    fn default() -> Self {
        Self {
            laws: ScalingLaw::ALL.to_vec(),
            collapse: true,
            dimension: None,
            probe_omega0: Probe::default(),
            crossover: None,
            decay_max_distance: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema_version: u32,
    name: String,
    model: String,
    #[serde(default)]
    params: BTreeMap<String, f64>,
    sizes: Vec<Vec<usize>>,
    region: RegionSpec,
    #[serde(default)]
    temperature: f64,
    window: WindowSpec,
    #[serde(default)]
    grid: GridSpec,
    #[serde(default)]
    analysis: AnalysisSpec,
    output_dir: Option<PathBuf>,
    drive: Option<DriveSpectrum>,
}

/// A validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub model: BlochModel,
    pub sizes: Vec<Vec<usize>>,
    pub region: RegionSpec,
    pub temperature: f64,
    pub window: WindowSpec,
    pub grid: GridSpec,
    pub analysis: AnalysisSpec,
    pub output_dir: PathBuf,
    pub drive: Option<DriveSpectrum>,
    /// SHA-256 of the canonical JSON form of the input.
    pub hash: String,
}

impl ExperimentConfig {
    pub fn occupation(&self) -> Occupation {
        Occupation::from_temperature(self.temperature)
    }

    /// Dimension used by the scaling laws.
    pub fn scaling_dimension(&self) -> usize {
        self.analysis.dimension.unwrap_or(match self.region {
            RegionSpec::Strip => 1,
            _ => self.model.dimension(),
        })
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        validate_config(&std::fs::read_to_string(path)?)
    }
}

/// Linear size `L` of a region: its extent along the first axis.
pub fn linear_size(region: &Region) -> usize {
    region.extent(0)
}

fn model_from(name: &str, params: &BTreeMap<String, f64>, issues: &mut Vec<ConfigIssue>) -> Option<BlochModel> {
    let expected: &[&str] = match name {
        "qwz" => &["m"],
        "metal2d" => &["t1", "t2", "mu"],
        "metal1d" => &["t", "mu"],
        other => {
            issues.push(ConfigIssue::new(
                "model",
                format!("unknown model `{other}` (expected qwz, metal2d or metal1d)"),
            ));
            return None;
        }
    };
    let before = issues.len();
    for key in params.keys() {
        if !expected.contains(&key.as_str()) {
            issues.push(ConfigIssue::new(format!("params.{key}"), format!("not a parameter of `{name}`")));
        }
    }
    for key in expected {
        match params.get(*key) {
            None => issues.push(ConfigIssue::new(format!("params.{key}"), "missing")),
            Some(v) if !v.is_finite() => {
                issues.push(ConfigIssue::new(format!("params.{key}"), "must be finite"))
            }
            _ => {}
        }
    }
    if issues.len() > before {
        return None;
    }
    let kind = match name {
        "qwz" => ModelKind::Qwz { m: params["m"] },
        "metal2d" => ModelKind::Metal2d {
            t1: params["t1"],
            t2: params["t2"],
            mu: params["mu"],
        },
        _ => ModelKind::Metal1d {
            t: params["t"],
            mu: params["mu"],
        },
    };
    Some(BlochModel::new(kind))
}

fn check_dims(path: &str, dims: &[usize], dimension: usize, issues: &mut Vec<ConfigIssue>) -> bool {
    if dims.len() != dimension {
        issues.push(ConfigIssue::new(
            path,
            format!("expected {dimension} extents for a {dimension}D model, got {}", dims.len()),
        ));
        return false;
    }
    if let Some(a) = dims.iter().position(|&n| n == 0) {
        issues.push(ConfigIssue::new(format!("{path}[{a}]"), "extent must be positive"));
        return false;
    }
    true
}

/// Parses and cross-checks a config, reporting every problem found.
pub fn validate_config(raw: &str) -> Result<ExperimentConfig> {
    let value: serde_json::Value = serde_json::from_str(raw)
        .map_err(|e| Error::Config(vec![ConfigIssue::new("$", format!("not valid JSON: {e}"))]))?;
    let hash = hex::encode(Sha256::digest(value.to_string().as_bytes()));
    let cfg: RawConfig = serde_path_to_error::deserialize(&value).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { "$".to_string() } else { path };
        Error::Config(vec![ConfigIssue::new(path, e.into_inner().to_string())])
    })?;

    let mut issues = Vec::new();
    if cfg.schema_version != SCHEMA_VERSION {
        issues.push(ConfigIssue::new(
            "schema_version",
            format!("unsupported version {} (expected {SCHEMA_VERSION})", cfg.schema_version),
        ));
    }
    if cfg.name.is_empty() || !cfg.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
        issues.push(ConfigIssue::new("name", "must be a nonempty [A-Za-z0-9_-] identifier"));
    }
    let model = model_from(&cfg.model, &cfg.params, &mut issues);
    let dimension = model.map(|m| m.dimension());

    if cfg.sizes.is_empty() {
        issues.push(ConfigIssue::new("sizes", "at least one size is required"));
    }
    if let Some(d) = dimension {
        if matches!(cfg.region, RegionSpec::Strip) && d != 2 {
            issues.push(ConfigIssue::new("region.kind", "strip regions need a two-dimensional model"));
        }
        let mut lengths = Vec::new();
        for (i, dims) in cfg.sizes.iter().enumerate() {
            let path = format!("sizes[{i}]");
            if !check_dims(&path, dims, d, &mut issues) {
                continue;
            }
            match cfg.region.resolve(dims) {
                Ok(region) if region.is_empty() => {
                    issues.push(ConfigIssue::new(path, "region is empty"));
                }
                Ok(region) => lengths.push((i, linear_size(&region))),
                Err(e) => issues.push(ConfigIssue::new(format!("{path}: region"), e.to_string())),
            }
        }
        if lengths.windows(2).any(|w| w[1].1 <= w[0].1) {
            issues.push(ConfigIssue::new(
                "sizes",
                "subsystem linear sizes must be strictly increasing",
            ));
        }
        match &cfg.window {
            WindowSpec::Auto { reference_dims, step_axis } => {
                if reference_dims.is_empty() {
                    issues.push(ConfigIssue::new("window.reference_dims", "missing reference dims"));
                } else {
                    check_dims("window.reference_dims", reference_dims, d, &mut issues);
                }
                if *step_axis >= d {
                    issues.push(ConfigIssue::new(
                        "window.step_axis",
                        format!("axis {step_axis} does not exist in {d} dimensions"),
                    ));
                }
            }
            WindowSpec::Explicit { .. } => {}
        }
        if let Some(dim) = cfg.analysis.dimension {
            if dim == 0 || dim > d {
                issues.push(ConfigIssue::new("analysis.dimension", format!("must lie in 1..={d}")));
            }
        }
    }
    if let WindowSpec::Explicit { delta_omega } = cfg.window {
        if !(delta_omega.is_finite() && delta_omega > 0.0) {
            issues.push(ConfigIssue::new("window.delta_omega", "must be a positive number"));
        }
    }
    if let GridSpec::Uniform { start, stop, step } = cfg.grid {
        if !(start.is_finite() && stop.is_finite() && step.is_finite() && step > 0.0 && stop > start) {
            issues.push(ConfigIssue::new("grid", "need finite start < stop and step > 0"));
        } else if (stop - start) / step > MAX_GRID_POINTS as f64 {
            issues.push(ConfigIssue::new("grid.step", format!("more than {MAX_GRID_POINTS} points")));
        }
    }
    if !(cfg.temperature.is_finite() && cfg.temperature >= 0.0) {
        issues.push(ConfigIssue::new("temperature", "must be a finite nonnegative number"));
    }
    if cfg.analysis.laws.is_empty() {
        issues.push(ConfigIssue::new("analysis.laws", "at least one law is required"));
    }
    if let Probe::Value(w) = cfg.analysis.probe_omega0 {
        if !w.is_finite() {
            issues.push(ConfigIssue::new("analysis.probe_omega0", "must be finite"));
        }
    }
    if let Some(x) = &cfg.analysis.crossover {
        if x.temperatures.len() < 2 {
            issues.push(ConfigIssue::new("analysis.crossover.temperatures", "need at least two temperatures"));
        }
        for (i, t) in x.temperatures.iter().enumerate() {
            if !(t.is_finite() && *t > 0.0) {
                issues.push(ConfigIssue::new(
                    format!("analysis.crossover.temperatures[{i}]"),
                    "must be positive",
                ));
            }
        }
        if !x.omega0.is_finite() {
            issues.push(ConfigIssue::new("analysis.crossover.omega0", "must be finite"));
        }
        if cfg.sizes.len() < 2 {
            issues.push(ConfigIssue::new("sizes", "the crossover fit needs at least two sizes"));
        }
    }
    if let Some(drive) = &cfg.drive {
        if let Err(e) = drive.validate() {
            issues.push(ConfigIssue::new("drive", e.to_string()));
        }
        if cfg.temperature > 0.0 {
            issues.push(ConfigIssue::new("drive", "absorption is defined for zero temperature only"));
        }
    }

    if !issues.is_empty() {
        return Err(Error::Config(issues));
    }
    let output_dir = cfg
        .output_dir
        .unwrap_or_else(|| PathBuf::from("out").join(&cfg.name));
    Ok(ExperimentConfig {
        name: cfg.name,
        model: model.expect("model validated"),
        sizes: cfg.sizes,
        region: cfg.region,
        temperature: cfg.temperature,
        window: cfg.window,
        grid: cfg.grid,
        analysis: cfg.analysis,
        output_dir,
        drive: cfg.drive,
        hash,
    })
}
