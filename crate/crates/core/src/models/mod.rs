//! Learned cost models: a displacement Gaussian per part, and per
//! child/parent edge a set of k-means cluster Gaussians over the child's
//! offset from its parent.

mod gaussian;
mod kmeans;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imaging::AnnulusGeometry;
use crate::skeleton::{PartSpec, Pose, SkeletonTopology};

pub use gaussian::{fit_gaussian, mahalanobis, spatial_cost, GaussianParams, Mat2, Vec2};
pub use kmeans::{kmeans, KMeans, MAX_ITERATIONS};

/// Version written to and required from model files.
pub const MODEL_SCHEMA_VERSION: u32 = 1;

/// Diagonal loading added to every fitted covariance, in px².
pub const DEFAULT_EPSILON: f64 = 1e-4;
pub const DEFAULT_CLUSTERS: usize = 6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("no samples to fit")]
    NoSamples,
    #[error("no spatial clusters")]
    NoClusters,
    #[error("part `{part}` is never observed in a usable frame pair")]
    PartNeverObserved { part: String },
    #[error("invalid covariance: {0}")]
    InvalidCovariance(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("clip {clip} frame {frame}: pose has {found} parts, topology has {expected}")]
    PoseLengthMismatch {
        clip: usize,
        frame: usize,
        expected: usize,
        found: usize,
    },
    #[error("model schema version {found} is not supported (expected {expected})")]
    SchemaVersionMismatch { found: u32, expected: u32 },
    #[error("corrupt model file {path}: {detail}")]
    CorruptFile { path: String, detail: String },
    #[error("cannot access {path}: {detail}")]
    Io { path: String, detail: String },
}

/// Per-part Gaussian over frame-to-frame displacement, root included.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalModel {
    pub parts: Vec<GaussianParams>,
}

/// Per-part cluster Gaussians over the offset from the parent. The root
/// entry is `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialModel {
    pub parts: Vec<Option<Vec<GaussianParams>>>,
}

impl SpatialModel {
    pub fn clusters(&self, part: usize) -> Option<&[GaussianParams]> {
        self.parts[part].as_deref()
    }
}

fn check_lengths<C: AsRef<[Pose]>>(clips: &[C], topology: &SkeletonTopology) -> Result<(), ModelError> {
    for (ci, clip) in clips.iter().enumerate() {
        for (fi, pose) in clip.as_ref().iter().enumerate() {
            if pose.len() != topology.len() {
                return Err(ModelError::PoseLengthMismatch {
                    clip: ci,
                    frame: fi,
                    expected: topology.len(),
                    found: pose.len(),
                });
            }
        }
    }
    Ok(())
}

/// Displacements `x_i^t − x_i^{t−1}` of one part over every consecutive
/// annotated pair in every clip.
pub fn temporal_samples<C: AsRef<[Pose]>>(clips: &[C], part: usize) -> Vec<Vec2> {
    let mut out = Vec::new();
    for clip in clips {
        for pair in clip.as_ref().windows(2) {
            if let (Some(a), Some(b)) = (pair[0].get(part), pair[1].get(part)) {
                out.push(b.sub(a));
            }
        }
    }
    out
}

/// Offsets `x_i − x_par(i)` over every frame where both are annotated.
pub fn spatial_samples<C: AsRef<[Pose]>>(clips: &[C], part: usize, parent: usize) -> Vec<Vec2> {
    clips
        .iter()
        .flat_map(|c| c.as_ref().iter())
        .filter_map(|pose| Some(pose.get(part)?.sub(pose.get(parent)?)))
        .collect()
}

pub fn fit_temporal<C: AsRef<[Pose]>>(
    clips: &[C],
    topology: &SkeletonTopology,
    epsilon: f64,
) -> Result<TemporalModel, ModelError> {
    check_lengths(clips, topology)?;
    let parts = (0..topology.len())
        .map(|part| {
            let samples = temporal_samples(clips, part);
            if samples.is_empty() {
                return Err(ModelError::PartNeverObserved {
                    part: topology.name(part).to_string(),
                });
            }
            fit_gaussian(&samples, epsilon)
        })
        .collect::<Result<_, _>>()?;
    Ok(TemporalModel { parts })
}

pub fn fit_spatial<C: AsRef<[Pose]>>(
    clips: &[C],
    topology: &SkeletonTopology,
    k: usize,
    epsilon: f64,
) -> Result<SpatialModel, ModelError> {
    check_lengths(clips, topology)?;
    let mut parts = Vec::with_capacity(topology.len());
    for part in 0..topology.len() {
        let Some(parent) = topology.parent(part) else {
            parts.push(None);
            continue;
        };
        let samples = spatial_samples(clips, part, parent);
        if samples.is_empty() {
            return Err(ModelError::PartNeverObserved {
                part: topology.name(part).to_string(),
            });
        }
        let km = kmeans(&samples, k)?;
        let clusters = (0..km.k())
            .map(|c| {
                let members: Vec<Vec2> = km.members(&samples, c).collect();
                fit_gaussian(&members, epsilon)
            })
            .collect::<Result<Vec<_>, _>>()?;
        parts.push(Some(clusters));
    }
    Ok(SpatialModel { parts })
}

/// Hyper-parameters used when fitting a [`PoseModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub geometry: AnnulusGeometry,
    pub lambda1: f64,
    pub lambda2: f64,
    pub window_radius: u32,
    pub clusters: usize,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            geometry: AnnulusGeometry::default(),
            lambda1: 0.7,
            lambda2: 0.2,
            window_radius: 15,
            clusters: DEFAULT_CLUSTERS,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

/// Everything the tracker needs besides the frames themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseModel {
    pub topology: SkeletonTopology,
    pub temporal: TemporalModel,
    pub spatial: SpatialModel,
    pub geometry: AnnulusGeometry,
    pub lambda1: f64,
    pub lambda2: f64,
    pub window_radius: u32,
    pub clusters: usize,
    pub epsilon: f64,
}

impl PoseModel {
    pub fn train<C: AsRef<[Pose]>>(
        clips: &[C],
        topology: SkeletonTopology,
        config: &TrainConfig,
    ) -> Result<Self, ModelError> {
        let temporal = fit_temporal(clips, &topology, config.epsilon)?;
        let spatial = fit_spatial(clips, &topology, config.clusters, config.epsilon)?;
        let model = Self {
            topology,
            temporal,
            spatial,
            geometry: config.geometry.clone(),
            lambda1: config.lambda1,
            lambda2: config.lambda2,
            window_radius: config.window_radius,
            clusters: config.clusters,
            epsilon: config.epsilon,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidParameter(m));
        if [self.lambda1, self.lambda2].iter().any(|l| l.is_nan() || *l < 0.0) {
            return bad(format!("lambdas must be >= 0 ({}, {})", self.lambda1, self.lambda2));
        }
        if self.clusters == 0 {
            return bad("cluster count must be >= 1".into());
        }
        if self.window_radius == 0 {
            return bad("window radius must be >= 1".into());
        }
        if let Err(e) = self.geometry.validate() {
            return bad(e.to_string());
        }
        let n = self.topology.len();
        if self.temporal.parts.len() != n || self.spatial.parts.len() != n {
            return bad("model arrays do not match the topology".into());
        }
        for (i, s) in self.spatial.parts.iter().enumerate() {
            match (self.topology.parent(i), s) {
                (None, None) => {}
                (Some(_), Some(c)) if !c.is_empty() => {}
                _ => return bad(format!("spatial entry for `{}` is inconsistent", self.topology.name(i))),
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ModelFile::from(self)).expect("model serializes")
    }

    pub fn from_json(text: &str, origin: &str) -> Result<Self, ModelError> {
        let corrupt = |detail: String| ModelError::CorruptFile {
            path: origin.to_string(),
            detail,
        };
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| corrupt(e.to_string()))?;
        let version = value
            .get("schema_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| corrupt("missing schema_version".into()))?;
        if version != u64::from(MODEL_SCHEMA_VERSION) {
            return Err(ModelError::SchemaVersionMismatch {
                found: u32::try_from(version).unwrap_or(u32::MAX),
                expected: MODEL_SCHEMA_VERSION,
            });
        }
        let file: ModelFile = serde_json::from_value(value).map_err(|e| corrupt(e.to_string()))?;
        file.into_model().map_err(|e| match e {
            ModelError::CorruptFile { detail, .. } => corrupt(detail),
            other => corrupt(other.to_string()),
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        fs::write(path, self.to_json()).map_err(|e| ModelError::Io {
            path: path.display().to_string(),
            detail: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = fs::read_to_string(path).map_err(|e| ModelError::Io {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        Self::from_json(&text, &path.display().to_string())
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    schema_version: u32,
    parts: Vec<PartSpec>,
    geometry: AnnulusGeometry,
    lambda1: f64,
    lambda2: f64,
    window_radius: u32,
    clusters: usize,
    epsilon: f64,
    temporal: Vec<TemporalEntry>,
    spatial: Vec<SpatialEntry>,
}

#[derive(Serialize, Deserialize)]
struct TemporalEntry {
    part: String,
    #[serde(flatten)]
    gaussian: GaussianParams,
}

#[derive(Serialize, Deserialize)]
struct SpatialEntry {
    part: String,
    parent: String,
    clusters: Vec<GaussianParams>,
}

impl From<&PoseModel> for ModelFile {
    fn from(m: &PoseModel) -> Self {
        let t = &m.topology;
        Self {
            schema_version: MODEL_SCHEMA_VERSION,
            parts: t.to_specs(),
            geometry: m.geometry.clone(),
            lambda1: m.lambda1,
            lambda2: m.lambda2,
            window_radius: m.window_radius,
            clusters: m.clusters,
            epsilon: m.epsilon,
            temporal: m
                .temporal
                .parts
                .iter()
                .enumerate()
                .map(|(i, g)| TemporalEntry {
                    part: t.name(i).to_string(),
                    gaussian: g.clone(),
                })
                .collect(),
            spatial: t
                .edges()
                .map(|(p, c)| SpatialEntry {
                    part: t.name(c).to_string(),
                    parent: t.name(p).to_string(),
                    clusters: m.spatial.parts[c].clone().unwrap_or_default(),
                })
                .collect(),
        }
    }
}

impl ModelFile {
    fn into_model(self) -> Result<PoseModel, ModelError> {
        let corrupt = |detail: String| ModelError::CorruptFile {
            path: String::new(),
            detail,
        };
        let topology = SkeletonTopology::from_specs(&self.parts).map_err(|e| corrupt(e.to_string()))?;
        let n = topology.len();
        if self.temporal.len() != n {
            return Err(corrupt(format!("{} temporal entries for {n} parts", self.temporal.len())));
        }
        let mut temporal = Vec::with_capacity(n);
        for (i, entry) in self.temporal.into_iter().enumerate() {
            if entry.part != topology.name(i) {
                return Err(corrupt(format!(
                    "temporal entry {i} is `{}`, expected `{}`",
                    entry.part,
                    topology.name(i)
                )));
            }
            temporal.push(entry.gaussian);
        }
        let mut spatial: Vec<Option<Vec<GaussianParams>>> = vec![None; n];
        for entry in self.spatial {
            let part = topology
                .index_of(&entry.part)
                .ok_or_else(|| corrupt(format!("spatial entry for unknown part `{}`", entry.part)))?;
            let parent = topology.parent(part).map(|p| topology.name(p));
            if parent != Some(entry.parent.as_str()) {
                return Err(corrupt(format!(
                    "spatial entry `{}` names parent `{}`",
                    entry.part, entry.parent
                )));
            }
            if spatial[part].replace(entry.clusters).is_some() {
                return Err(corrupt(format!("duplicate spatial entry `{}`", entry.part)));
            }
        }
        let model = PoseModel {
            topology,
            temporal: TemporalModel { parts: temporal },
            spatial: SpatialModel { parts: spatial },
            geometry: self.geometry,
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            window_radius: self.window_radius,
            clusters: self.clusters,
            epsilon: self.epsilon,
        };
        model.validate().map_err(|e| corrupt(e.to_string()))?;
        Ok(model)
    }
}
