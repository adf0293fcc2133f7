//! TOML configuration. Every section and key is optional; unknown keys are
//! rejected by name.
//!
//! ```toml
//! [scenario]
//! name = "square_room"
//! frames = 200
//!
//! [sensor]
//! sigma = 0.02
//! seed = 0
//!
//! [detector]
//! range_scaled = true
//!
//! [mapper]
//! sensor_model = "hessian"
//! noise_sigma = 0.05
//!
//! [association]
//! use_innovation_cov = true
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;
use wallmap_core::association::AssociationConfig;
use wallmap_core::detector::DetectorConfig;
use wallmap_core::mapper::{CovarianceUpdate, MapperConfig, MeasurementNoise};
use wallmap_core::pipeline::PipelineConfig;
use wallmap_core::sim::{Environment, Scenario, Segment, SensorSpec, SCENARIO_NAMES};
use wallmap_core::{Cov2, Pose2D, SensorModel};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {message}", path.display())]
    Syntax { path: PathBuf, message: String },
    #[error(transparent)]
    Invalid(#[from] wallmap_core::Error),
    #[error("invalid configuration `{field}`: {reason}")]
    Field { field: &'static str, reason: String },
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub scenario: ScenarioSection,
    pub environment: Option<EnvironmentSection>,
    pub sensor: SensorSection,
    pub detector: DetectorSection,
    pub mapper: MapperSection,
    pub association: AssociationSection,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    pub name: String,
    /// Cycles or truncates the trajectory; its natural length when unset.
    pub frames: Option<usize>,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            name: "square_room".into(),
            frames: None,
        }
    }
}

/// Replaces the named scenario's walls and path.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSection {
    /// `[ax, ay, bx, by]` per wall segment.
    pub segments: Vec<[f64; 4]>,
    /// `[x, y, theta]` per waypoint.
    pub waypoints: Vec<[f64; 3]>,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_turn_step")]
    pub turn_step: f64,
}

fn default_step() -> f64 {
    0.1
}

fn default_turn_step() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorSection {
    pub fov: f64,
    pub samples: usize,
    pub min_range: f64,
    pub max_range: f64,
    pub sigma: f64,
    pub dropout: f64,
    pub seed: u64,
}

impl Default for SensorSection {
    fn default() -> Self {
        let s = SensorSpec::default();
        Self {
            fov: s.fov,
            samples: s.samples,
            min_range: s.min_range,
            max_range: s.max_range,
            sigma: s.sigma,
            dropout: s.dropout,
            seed: s.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSection {
    pub ransac_iterations: u32,
    pub inlier_threshold: f64,
    pub min_inliers: usize,
    pub min_cluster_size: usize,
    pub max_lines_per_cluster: usize,
    pub rng_seed: u64,
    pub merge_angle: f64,
    pub merge_distance: f64,
    pub range_scaled: bool,
    pub max_standard_error: f64,
    pub min_density: f64,
}

impl Default for DetectorSection {
    fn default() -> Self {
        let d = DetectorConfig::default();
        Self {
            ransac_iterations: d.ransac_iterations,
            inlier_threshold: d.inlier_threshold,
            min_inliers: d.min_inliers,
            min_cluster_size: d.min_cluster_size,
            max_lines_per_cluster: d.max_lines_per_cluster,
            rng_seed: d.rng_seed,
            merge_angle: d.merge_angle,
            merge_distance: d.merge_distance,
            range_scaled: d.range_scaled,
            max_standard_error: d.max_standard_error,
            min_density: d.min_density,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelName {
    Paper,
    Hessian,
}

impl From<ModelName> for SensorModel {
    fn from(m: ModelName) -> Self {
        match m {
            ModelName::Paper => SensorModel::Paper,
            ModelName::Hessian => SensorModel::Hessian,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpdateName {
    Standard,
    Joseph,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapperSection {
    pub sensor_model: ModelName,
    /// Isotropic measurement noise standard deviation, meters.
    pub noise_sigma: Option<f64>,
    /// Full measurement covariance `[s_uu, s_uv, s_vv]`, m².
    pub noise: Option<[f64; 3]>,
    pub kappa_init: f64,
    pub covariance_update: UpdateName,
}

impl Default for MapperSection {
    fn default() -> Self {
        Self {
            sensor_model: ModelName::Paper,
            noise_sigma: None,
            noise: None,
            kappa_init: MapperConfig::default().kappa_init,
            covariance_update: UpdateName::Standard,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssociationSection {
    pub gate: f64,
    pub use_innovation_cov: bool,
}

impl Default for AssociationSection {
    fn default() -> Self {
        let a = AssociationConfig::default();
        Self {
            gate: a.gate,
            use_innovation_cov: a.use_innovation_cov,
        }
    }
}

impl Config {
    pub fn parse(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Syntax {
            path: origin.to_owned(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::parse(&text, path)
    }

    /// Loads `path` when given, defaults otherwise.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self, ConfigError> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn pipeline(&self) -> Result<PipelineConfig, ConfigError> {
        let d = &self.detector;
        let m = &self.mapper;
        let noise = match (m.noise_sigma, m.noise) {
            (Some(_), Some(_)) => {
                return Err(ConfigError::Field {
                    field: "mapper.noise",
                    reason: "set either noise or noise_sigma, not both".into(),
                })
            }
            (Some(s), None) => MeasurementNoise::isotropic(s)?,
            (None, Some([uu, uv, vv])) => MeasurementNoise::new(Cov2::from_entries(uu, uv, vv)?)?,
            (None, None) => MeasurementNoise::default(),
        };
        let cfg = PipelineConfig {
            detector: DetectorConfig {
                ransac_iterations: d.ransac_iterations,
                inlier_threshold: d.inlier_threshold,
                min_inliers: d.min_inliers,
                min_cluster_size: d.min_cluster_size,
                max_lines_per_cluster: d.max_lines_per_cluster,
                rng_seed: d.rng_seed,
                merge_angle: d.merge_angle,
                merge_distance: d.merge_distance,
                range_scaled: d.range_scaled,
                max_standard_error: d.max_standard_error,
                min_density: d.min_density,
            },
            mapper: MapperConfig {
                sensor_model: m.sensor_model.into(),
                noise,
                kappa_init: m.kappa_init,
                covariance_update: match m.covariance_update {
                    UpdateName::Standard => CovarianceUpdate::Standard,
                    UpdateName::Joseph => CovarianceUpdate::Joseph,
                },
            },
            association: AssociationConfig {
                gate: self.association.gate,
                use_innovation_cov: self.association.use_innovation_cov,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn scenario(&self) -> Result<Scenario, ConfigError> {
        let mut sc = Scenario::by_name(&self.scenario.name).ok_or_else(|| ConfigError::Field {
            field: "scenario.name",
            reason: format!("unknown scenario `{}`, expected one of {}", self.scenario.name, SCENARIO_NAMES.join(", ")),
        })?;
        if let Some(e) = &self.environment {
            sc.env = Environment::new(e.segments.iter().map(|&[ax, ay, bx, by]| Segment::new(ax, ay, bx, by)).collect())?;
            sc.waypoints = e
                .waypoints
                .iter()
                .map(|&[x, y, t]| Pose2D::new(x, y, t))
                .collect::<Result<_, _>>()?;
            sc.step = e.step;
            sc.turn_step = e.turn_step;
        }
        let s = &self.sensor;
        sc.sensor = SensorSpec {
            fov: s.fov,
            samples: s.samples,
            min_range: s.min_range,
            max_range: s.max_range,
            sigma: s.sigma,
            dropout: s.dropout,
            seed: s.seed,
        };
        sc.sensor.validate()?;
        sc.trajectory()?;
        Ok(sc)
    }
}
