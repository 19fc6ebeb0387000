//! Pipeline configuration document.
//!
//! Every key is optional in the file; missing keys take the defaults below. Any leaf can be
//! overridden from the environment as `PARTGRASP_<TABLE>_<KEY>`, e.g.
//! `PARTGRASP_DETECTOR_THRESHOLD=0.5` or `PARTGRASP_GRIPPER_MAX_OPENING=0.1`.
//!
//! ```toml
//! [backends]                 # stage implementations, by registered name
//! detector = "oracle"
//! segmenter = "oracle"
//! grasp = "analytic"
//!
//! [detector]
//! threshold = 0.3            # minimum detection confidence, [0, 1]
//!
//! [segmenter]
//! min_mask_points = 11       # valid-depth pixels the part mask must cover
//!
//! [gripper]
//! max_opening = 0.08         # meters
//! finger_depth = 0.04        # meters
//! friction_half_angle = 20.0 # degrees
//!
//! [grasp]
//! sample_budget = 400000     # candidate pairs drawn per request
//! max_points = 3000          # masked points kept before sampling
//! normal_neighbors = 10      # k for PCA normals
//! seed = 0
//!
//! [filter]
//! pixel_tolerance = 2        # pixels, Chebyshev
//! depth_tolerance = 0.02     # meters
//!
//! [endpoints]
//! detect = "http://127.0.0.1:8701"
//! segment = "http://127.0.0.1:8702"
//! grasp = "http://127.0.0.1:8703"
//! timeout_ms = 10000         # per stage call
//!
//! [classifier]
//! contact_distance = 0.02    # meters; farther contacts are off-object
//! depth_threshold = 0.015    # meters along the approach axis
//!
//! [output]
//! keep_artifacts = false     # keep crop image and crop mask in results
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grasp::{FilterTolerances, GripperModel};
use crate::sim::ClassifierThresholds;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("invalid value {value:?} for {var}: expected {expected}")]
    Env {
        var: String,
        value: String,
        expected: &'static str,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendSettings {
    pub detector: String,
    pub segmenter: String,
    pub grasp: String,
}

impl Default for BackendSettings {
    fn default() -> Self {
        Self {
            detector: "oracle".into(),
            segmenter: "oracle".into(),
            grasp: "analytic".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSettings {
    pub threshold: f64,
}

impl Default for DetectorSettings {
    fn default() -> Self {
        Self { threshold: 0.3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmenterSettings {
    pub min_mask_points: u64,
}

impl Default for SegmenterSettings {
    fn default() -> Self {
        Self { min_mask_points: 11 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraspSettings {
    pub sample_budget: usize,
    pub max_points: usize,
    pub normal_neighbors: usize,
    pub seed: u64,
}

impl Default for GraspSettings {
    fn default() -> Self {
        Self {
            sample_budget: 400_000,
            max_points: 3000,
            normal_neighbors: crate::grasp::DEFAULT_NORMAL_NEIGHBORS,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EndpointSettings {
    pub detect: String,
    pub segment: String,
    pub grasp: String,
    pub timeout_ms: u64,
}

impl Default for EndpointSettings {
    fn default() -> Self {
        Self {
            detect: "http://127.0.0.1:8701".into(),
            segment: "http://127.0.0.1:8702".into(),
            grasp: "http://127.0.0.1:8703".into(),
            timeout_ms: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSettings {
    pub keep_artifacts: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub backends: BackendSettings,
    pub detector: DetectorSettings,
    pub segmenter: SegmenterSettings,
    pub gripper: GripperModel,
    pub grasp: GraspSettings,
    pub filter: FilterTolerances,
    pub endpoints: EndpointSettings,
    pub classifier: ClassifierThresholds,
    pub output: OutputSettings,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn read(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// Defaults, then the optional file, then `PARTGRASP_*` variables from the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut config = match path {
            Some(p) => Self::read(p)?,
            None => Self::default(),
        };
        config.apply_env(std::env::vars())?;
        Ok(config)
    }

    /// Apply `PARTGRASP_<TABLE>_<KEY>` overrides. Variables naming no config key are ignored.
    pub fn apply_env<I>(&mut self, vars: I) -> Result<(), ConfigError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut doc = toml::Value::try_from(&*self).expect("config serializes");
        let tables = doc.as_table_mut().expect("config is a table");
        let mut changed = false;
        for (var, value) in vars {
            let Some(rest) = var.strip_prefix("PARTGRASP_") else {
                continue;
            };
            let rest = rest.to_ascii_lowercase();
            for (table_name, table) in tables.iter_mut() {
                let Some(key) = rest.strip_prefix(&format!("{table_name}_")) else {
                    continue;
                };
                let Some(slot) = table.as_table_mut().and_then(|t| t.get_mut(key)) else {
                    continue;
                };
                *slot = parse_like(slot, &var, &value)?;
                changed = true;
            }
        }
        if changed {
            *self = doc.try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
            self.validate()?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |msg: &str| Err(ConfigError::Invalid(msg.into()));
        if !(0.0..=1.0).contains(&self.detector.threshold) {
            return invalid("detector.threshold must be within [0, 1]");
        }
        self.gripper
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("gripper: {e}")))?;
        if self.grasp.normal_neighbors < 3 {
            return invalid("grasp.normal_neighbors must be at least 3");
        }
        if self.grasp.max_points <= self.grasp.normal_neighbors {
            return invalid("grasp.max_points must exceed grasp.normal_neighbors");
        }
        if !(self.filter.depth_tolerance >= 0.0) {
            return invalid("filter.depth_tolerance must be non-negative");
        }
        if self.endpoints.timeout_ms == 0 {
            return invalid("endpoints.timeout_ms must be positive");
        }
        if !(self.classifier.contact_distance > 0.0 && self.classifier.depth_threshold > 0.0) {
            return invalid("classifier thresholds must be positive");
        }
        Ok(())
    }
}

fn parse_like(slot: &toml::Value, var: &str, value: &str) -> Result<toml::Value, ConfigError> {
    let err = |expected| ConfigError::Env {
        var: var.to_string(),
        value: value.to_string(),
        expected,
    };
    let v = value.trim();
    Ok(match slot {
        toml::Value::Integer(_) => toml::Value::Integer(v.parse().map_err(|_| err("an integer"))?),
        toml::Value::Float(_) => toml::Value::Float(v.parse().map_err(|_| err("a number"))?),
        toml::Value::Boolean(_) => toml::Value::Boolean(v.parse().map_err(|_| err("true or false"))?),
        _ => toml::Value::String(value.to_string()),
    })
}
