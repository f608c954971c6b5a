//! TOML settings file: skeleton, descriptor geometry, model fitting and
//! tracker constants. Every section and key is optional.
//!
//! ```toml
//! [skeleton]
//! root = "head"
//! parts = [
//!     { name = "head" },
//!     { name = "neck", parent = "head" },
//! ]
//!
//! [descriptor]
//! rings = 10
//! stride = 2
//!
//! [model]
//! clusters = 6
//! epsilon = 1e-4
//!
//! [tracker]
//! lambda1 = 0.7
//! lambda2 = 0.2
//! window_radius = 15
//! reinit_interval = 60
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imaging::AnnulusGeometry;
use crate::models::{TrainConfig, DEFAULT_CLUSTERS, DEFAULT_EPSILON};
use crate::skeleton::{PartSpec, SkeletonError, SkeletonTopology};
use crate::tracker::TrackerConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {detail}")]
    Parse { path: String, detail: String },
    #[error("skeleton: {0}")]
    Skeleton(#[from] SkeletonError),
    #[error("skeleton root is `{actual}` but the config names `{declared}`")]
    RootMismatch { declared: String, actual: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub skeleton: SkeletonSection,
    pub descriptor: DescriptorSection,
    pub model: ModelSection,
    pub tracker: TrackerSection,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SkeletonSection {
    /// Checked against the parentless part when given.
    pub root: Option<String>,
    /// Defaults to the 14-joint full-body tree.
    pub parts: Option<Vec<PartSpec>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DescriptorSection {
    pub rings: usize,
    pub stride: u32,
}

impl Default for DescriptorSection {
    fn default() -> Self {
        Self { rings: 10, stride: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub clusters: usize,
    pub epsilon: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            clusters: DEFAULT_CLUSTERS,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerSection {
    pub lambda1: f64,
    pub lambda2: f64,
    pub window_radius: u32,
    pub reinit_interval: Option<usize>,
}

impl Default for TrackerSection {
    fn default() -> Self {
        let t = TrackerConfig::default();
        Self {
            lambda1: t.lambda1,
            lambda2: t.lambda2,
            window_radius: t.window_radius,
            reinit_interval: t.reinit_interval,
        }
    }
}

impl Config {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_string(),
            detail: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text, &path.display().to_string())
    }

    pub fn topology(&self) -> Result<SkeletonTopology, ConfigError> {
        let topo = match &self.skeleton.parts {
            Some(parts) => SkeletonTopology::from_specs(parts)?,
            None => SkeletonTopology::full_body(),
        };
        if let Some(declared) = &self.skeleton.root {
            let actual = topo.name(topo.root());
            if declared != actual {
                return Err(ConfigError::RootMismatch {
                    declared: declared.clone(),
                    actual: actual.to_string(),
                });
            }
        }
        Ok(topo)
    }

    pub fn geometry(&self) -> Result<AnnulusGeometry, ConfigError> {
        if self.descriptor.stride == 0 {
            return Err(ConfigError::Invalid("descriptor stride must be >= 1".into()));
        }
        AnnulusGeometry::square(self.descriptor.rings, self.descriptor.stride)
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn train_config(&self) -> Result<TrainConfig, ConfigError> {
        Ok(TrainConfig {
            geometry: self.geometry()?,
            lambda1: self.tracker.lambda1,
            lambda2: self.tracker.lambda2,
            window_radius: self.tracker.window_radius,
            clusters: self.model.clusters,
            epsilon: self.model.epsilon,
        })
    }

    pub fn tracker_config(&self) -> TrackerConfig {
        TrackerConfig {
            lambda1: self.tracker.lambda1,
            lambda2: self.tracker.lambda2,
            window_radius: self.tracker.window_radius,
            reinit_interval: self.tracker.reinit_interval,
            ..TrackerConfig::default()
        }
    }
}
