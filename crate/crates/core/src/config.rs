//! Model configuration files.
//!
//! Files are TOML with SI units throughout (m, kg, N, N·m/rad). Parsing
//! happens in two passes: a permissive raw pass whose every field is
//! optional, then a validation pass that fills defaults and reports missing
//! or out-of-range values by their field path. The resolved [`ModelConfig`]
//! serializes back to a normalized file with every default written out.

use std::fmt;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{build_chain, BeadSpec, ChainModel, TendonDirection};
use crate::screw::Vec3;

pub const FORMAT_VERSION: u32 = 1;

/// The two-segment, 32-bead, 8-tendon platform shipped with the crate.
pub const PAPER_PLATFORM_TOML: &str = include_str!("../data/paper_platform.toml");

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError { path: path.into(), message: message.into() }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Parses TOML text into `T`, mapping failures to line/column positions.
pub(crate) fn parse_toml<T: DeserializeOwned>(text: &str) -> Result<T, LoadError> {
    let table: toml::Table = toml::from_str(text).map_err(|e| to_parse_error(text, &e))?;
    reject_degree_keys(&toml::Value::Table(table), "")?;
    toml::from_str(text).map_err(|e| LoadError::Parse(to_parse_error(text, &e)))
}

fn to_parse_error(text: &str, e: &toml::de::Error) -> ParseError {
    let offset = e.span().map(|s| s.start).unwrap_or(0).min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map(|l| l.chars().count()).unwrap_or(0) + 1;
    ParseError { line, column, message: e.message().trim().to_string() }
}

fn reject_degree_keys(value: &toml::Value, path: &str) -> Result<(), ConfigError> {
    match value {
        toml::Value::Table(t) => {
            for (k, v) in t {
                let p = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                let lower = k.to_ascii_lowercase();
                if lower.contains("deg") {
                    return Err(ConfigError::new(p, "angles must be given in radians; degree-valued keys are not accepted"));
                }
                reject_degree_keys(v, &p)?;
            }
        }
        toml::Value::Array(a) => {
            for (i, v) in a.iter().enumerate() {
                reject_degree_keys(v, &format!("{path}[{i}]"))?;
            }
        }
        _ => {}
    }
    Ok(())
}

pub(crate) fn read_file(path: &Path) -> Result<String, LoadError> {
    std::fs::read_to_string(path).map_err(|source| LoadError::Io { path: path.display().to_string(), source })
}

pub(crate) fn require<T>(v: Option<T>, path: &str) -> Result<T, ConfigError> {
    v.ok_or_else(|| ConfigError::new(path, "missing required field"))
}

pub(crate) fn check_version(v: Option<u32>) -> Result<(), ConfigError> {
    match v {
        Some(FORMAT_VERSION) => Ok(()),
        Some(other) => Err(ConfigError::new("format_version", format!("unsupported version {other}, expected {FORMAT_VERSION}"))),
        None => Err(ConfigError::new("format_version", "missing required field")),
    }
}

/// A scalar applied to every joint, or one value per joint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    fn resolve(&self, n: usize, path: &str) -> Result<Vec<f64>, ConfigError> {
        match self {
            OneOrMany::One(v) => Ok(vec![*v; n]),
            OneOrMany::Many(v) if v.len() == n => Ok(v.clone()),
            OneOrMany::Many(v) => Err(ConfigError::new(path, format!("expected {n} values, got {}", v.len()))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum JointAxis {
    #[default]
    X,
    Y,
}

impl JointAxis {
    pub fn unit(self) -> Vec3 {
        match self {
            JointAxis::X => Vec3::x(),
            JointAxis::Y => Vec3::y(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TendonDirectionConfig {
    #[default]
    BeadAxis,
    Chord,
}

impl From<TendonDirectionConfig> for TendonDirection {
    fn from(c: TendonDirectionConfig) -> Self {
        match c {
            TendonDirectionConfig::BeadAxis => TendonDirection::BeadAxis,
            TendonDirectionConfig::Chord => TendonDirection::Chord,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub segments: usize,
    pub beads_per_segment: usize,
    /// m
    pub bead_height: f64,
    /// m; only needed when `inertia` is derived from the cuboid shape.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bead_width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bead_depth: Option<f64>,
    /// kg
    pub mass: f64,
    /// kg·m², about the centroid, row-major.
    pub inertia: [[f64; 3]; 3],
    /// m, centroid in the bead frame.
    pub com_offset: [f64; 3],
    pub first_joint_axis: JointAxis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StiffnessConfig {
    /// N·m/rad per joint.
    pub per_joint: Vec<f64>,
    /// N·m·s/rad per joint.
    pub damping: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TendonConfig {
    pub id: u32,
    /// 1-based segment at whose last bead the tendon terminates.
    pub segment: usize,
    /// m, guide position in the bead cross-section (z must be 0).
    pub offset: [f64; 3],
    /// m; geometric length of the straight chain when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rest_length: Option<f64>,
    /// m/N, tendon extensibility.
    pub compliance: f64,
}

/// Fully resolved model description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub format_version: u32,
    /// m/s²
    pub gravity: [f64; 3],
    pub tendon_direction: TendonDirectionConfig,
    pub geometry: GeometryConfig,
    pub stiffness: StiffnessConfig,
    #[serde(default)]
    pub tendons: Vec<TendonConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeometry {
    segments: Option<usize>,
    beads_per_segment: Option<usize>,
    bead_height: Option<f64>,
    bead_width: Option<f64>,
    bead_depth: Option<f64>,
    mass: Option<f64>,
    inertia: Option<[[f64; 3]; 3]>,
    com_offset: Option<[f64; 3]>,
    first_joint_axis: Option<JointAxis>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStiffness {
    per_joint: Option<OneOrMany>,
    damping: Option<OneOrMany>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTendon {
    id: Option<u32>,
    segment: Option<usize>,
    offset: Option<[f64; 3]>,
    rest_length: Option<f64>,
    compliance: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    format_version: Option<u32>,
    gravity: Option<[f64; 3]>,
    tendon_direction: Option<TendonDirectionConfig>,
    geometry: Option<RawGeometry>,
    stiffness: Option<RawStiffness>,
    tendons: Option<Vec<RawTendon>>,
}

impl ModelConfig {
    pub fn from_toml_str(text: &str) -> Result<ModelConfig, LoadError> {
        let raw: RawModel = parse_toml(text)?;
        Ok(ModelConfig::resolve(raw)?)
    }

    fn resolve(raw: RawModel) -> Result<ModelConfig, ConfigError> {
        check_version(raw.format_version)?;
        let g = require(raw.geometry, "geometry")?;
        let segments = require(g.segments, "geometry.segments")?;
        let beads_per_segment = require(g.beads_per_segment, "geometry.beads_per_segment")?;
        let bead_height = require(g.bead_height, "geometry.bead_height")?;
        let mass = require(g.mass, "geometry.mass")?;
        let inertia = match g.inertia {
            Some(i) => i,
            None => {
                let w = require(g.bead_width, "geometry.bead_width")?;
                let d = g.bead_depth.unwrap_or(w);
                if !(w > 0.0 && d > 0.0) {
                    return Err(ConfigError::new("geometry.bead_width", "must be > 0"));
                }
                let m = BeadSpec::cuboid_inertia(mass, w, d, bead_height);
                [
                    [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
                    [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
                    [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
                ]
            }
        };
        let geometry = GeometryConfig {
            segments,
            beads_per_segment,
            bead_height,
            bead_width: g.bead_width,
            bead_depth: g.bead_depth,
            mass,
            inertia,
            com_offset: g.com_offset.unwrap_or([0.0, 0.0, 0.5 * bead_height]),
            first_joint_axis: g.first_joint_axis.unwrap_or_default(),
        };

        let n = segments * beads_per_segment;
        let s = require(raw.stiffness, "stiffness")?;
        let per_joint = require(s.per_joint, "stiffness.per_joint")?.resolve(n, "stiffness.per_joint")?;
        let damping = s.damping.unwrap_or(OneOrMany::One(0.0)).resolve(n, "stiffness.damping")?;

        let mut tendons = Vec::new();
        for (i, t) in raw.tendons.unwrap_or_default().into_iter().enumerate() {
            let p = |f: &str| format!("tendons[{i}].{f}");
            tendons.push(TendonConfig {
                id: require(t.id, &p("id"))?,
                segment: require(t.segment, &p("segment"))?,
                offset: require(t.offset, &p("offset"))?,
                rest_length: t.rest_length,
                compliance: t.compliance.unwrap_or(0.0),
            });
        }

        Ok(ModelConfig {
            format_version: FORMAT_VERSION,
            gravity: raw.gravity.unwrap_or([0.0, 0.0, 0.0]),
            tendon_direction: raw.tendon_direction.unwrap_or_default(),
            geometry,
            stiffness: StiffnessConfig { per_joint, damping },
            tendons,
        })
    }

    /// Uniform chain with square 62 mm beads, no tendons and no gravity.
    pub fn uniform(segments: usize, beads_per_segment: usize, bead_height: f64, mass: f64, stiffness: f64) -> ModelConfig {
        let width = 0.062;
        let m = BeadSpec::cuboid_inertia(mass, width, width, bead_height);
        let n = segments * beads_per_segment;
        ModelConfig {
            format_version: FORMAT_VERSION,
            gravity: [0.0; 3],
            tendon_direction: TendonDirectionConfig::BeadAxis,
            geometry: GeometryConfig {
                segments,
                beads_per_segment,
                bead_height,
                bead_width: Some(width),
                bead_depth: Some(width),
                mass,
                inertia: [[m[(0, 0)], 0.0, 0.0], [0.0, m[(1, 1)], 0.0], [0.0, 0.0, m[(2, 2)]]],
                com_offset: [0.0, 0.0, 0.5 * bead_height],
                first_joint_axis: JointAxis::X,
            },
            stiffness: StiffnessConfig { per_joint: vec![stiffness; n], damping: vec![0.0; n] },
            tendons: Vec::new(),
        }
    }

    /// Adds a tendon terminating at the last bead of `segment`.
    pub fn with_tendon(mut self, id: u32, segment: usize, offset: [f64; 2]) -> ModelConfig {
        self.tendons.push(TendonConfig {
            id,
            segment,
            offset: [offset[0], offset[1], 0.0],
            rest_length: None,
            compliance: 0.0,
        });
        self
    }

    pub fn paper_platform() -> ModelConfig {
        ModelConfig::from_toml_str(PAPER_PLATFORM_TOML).expect("bundled platform file is valid")
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("model config serializes")
    }
}

/// A parsed model with its normalized configuration.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    /// Configuration with every default resolved, including tendon rest lengths.
    pub config: ModelConfig,
    pub model: ChainModel,
}

impl LoadedModel {
    pub fn from_config(config: ModelConfig) -> Result<LoadedModel, ConfigError> {
        let model = build_chain(&config)?;
        let mut config = config;
        for (t, spec) in config.tendons.iter_mut().zip(model.tendons()) {
            t.rest_length = Some(spec.rest_length);
        }
        Ok(LoadedModel { config, model })
    }

    pub fn from_toml_str(text: &str) -> Result<LoadedModel, LoadError> {
        Ok(LoadedModel::from_config(ModelConfig::from_toml_str(text)?)?)
    }

    /// Normalized TOML dump; parses back to an identical model.
    pub fn dump(&self) -> String {
        self.config.to_toml_string()
    }
}

impl fmt::Display for LoadedModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.dump())
    }
}

pub fn load_model(path: impl AsRef<Path>) -> Result<LoadedModel, LoadError> {
    LoadedModel::from_toml_str(&read_file(path.as_ref())?)
}
