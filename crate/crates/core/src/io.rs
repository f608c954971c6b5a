//! Clip directories, annotation and prediction files.
//!
//! A clip is a directory:
//!
//! ```text
//! <clip>/
//!   frames/000000.png, 000001.png, ...   (PNG or JPEG, zero-padded numbers)
//!   annotations.json                     (optional ground truth)
//! ```
//!
//! A dataset root holds `train/<clip>/` and `test/<clip>/` directories.
//!
//! Annotation JSON: `{"parts": [names…], "frames": [[[u, v] | null, …], …]}`.
//! Prediction JSON: `{"clip": id, "parts": [names…], "poses": [[[u, v], …], …]}`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imaging::{Image, ImagingError};
use crate::skeleton::{Point, Pose, SkeletonTopology};

pub const FRAMES_DIR: &str = "frames";
pub const ANNOTATION_FILE: &str = "annotations.json";
const FRAME_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing frame {path}")]
    MissingFrame { path: PathBuf },
    #[error("no frames found in {path}")]
    NoFrames { path: PathBuf },
    #[error("annotation mismatch in {path}: {detail}")]
    AnnotationMismatch { path: PathBuf, detail: String },
    #[error("cannot decode {path}: {detail}")]
    Decode { path: PathBuf, detail: String },
    #[error("invalid JSON in {path}: {detail}")]
    Json { path: PathBuf, detail: String },
    #[error("cannot encode {path}: {detail}")]
    Encode { path: PathBuf, detail: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn dir_name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClipManifest {
    pub id: String,
    pub frame_dir: PathBuf,
    /// Frame files in playback order.
    pub frames: Vec<PathBuf>,
    pub annotation: Option<PathBuf>,
    pub split: Split,
}

impl ClipManifest {
    /// Scans `<clip_dir>/frames` and picks up `<clip_dir>/annotations.json`
    /// when present.
    pub fn discover(clip_dir: &Path, split: Split) -> Result<Self, IoError> {
        let frame_dir = clip_dir.join(FRAMES_DIR);
        let mut frames: Vec<PathBuf> = fs::read_dir(&frame_dir)
            .map_err(io_err(&frame_dir))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| FRAME_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
            })
            .collect();
        frames.sort();
        if frames.is_empty() {
            return Err(IoError::NoFrames { path: frame_dir });
        }
        check_numbering(&frames)?;
        let annotation = clip_dir.join(ANNOTATION_FILE);
        let id = clip_dir
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| clip_dir.display().to_string());
        Ok(Self {
            id,
            frame_dir,
            frames,
            annotation: annotation.is_file().then_some(annotation),
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Numbered frames must form a gap-free run; a hole is reported as the
/// missing file it implies.
fn check_numbering(frames: &[PathBuf]) -> Result<(), IoError> {
    let numbered: Option<Vec<(u64, usize)>> = frames
        .iter()
        .map(|p| {
            let stem = p.file_stem()?.to_str()?;
            Some((stem.parse().ok()?, stem.len()))
        })
        .collect();
    let Some(numbered) = numbered else {
        return Ok(());
    };
    let mut numbers: Vec<(u64, usize, &PathBuf)> =
        numbered.iter().zip(frames).map(|((n, w), p)| (*n, *w, p)).collect();
    numbers.sort_by_key(|x| x.0);
    for pair in numbers.windows(2) {
        let (a, width, path) = pair[0];
        if pair[1].0 > a + 1 {
            let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("png");
            let missing = path.with_file_name(format!("{:0width$}.{ext}", a + 1));
            return Err(IoError::MissingFrame { path: missing });
        }
    }
    Ok(())
}

/// Every clip directory under `<root>/<split>/`, sorted by name.
pub fn discover_split(root: &Path, split: Split) -> Result<Vec<ClipManifest>, IoError> {
    let dir = root.join(split.dir_name());
    let mut clips: Vec<PathBuf> = fs::read_dir(&dir)
        .map_err(io_err(&dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    clips.sort();
    clips.iter().map(|c| ClipManifest::discover(c, split)).collect()
}

/// Per-frame joint annotations for one clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationFile {
    pub parts: Vec<String>,
    pub frames: Vec<Vec<Option<[f64; 2]>>>,
}

impl AnnotationFile {
    pub fn from_poses(topology: &SkeletonTopology, poses: &[Pose]) -> Self {
        Self {
            parts: topology.parts().to_vec(),
            frames: poses
                .iter()
                .map(|p| p.positions.iter().map(|q| q.map(Into::into)).collect())
                .collect(),
        }
    }

    pub fn to_poses(&self) -> Vec<Pose> {
        self.frames
            .iter()
            .enumerate()
            .map(|(t, f)| Pose::new(t, f.iter().map(|q| q.map(Point::from)).collect()))
            .collect()
    }

    /// Part names must match the topology exactly, in order, and every
    /// frame must list one entry per part.
    pub fn check(&self, topology: &SkeletonTopology, path: &Path) -> Result<(), IoError> {
        let mismatch = |detail: String| IoError::AnnotationMismatch {
            path: path.to_path_buf(),
            detail,
        };
        if self.parts != topology.parts() {
            let unknown: Vec<&String> = self.parts.iter().filter(|p| topology.index_of(p).is_none()).collect();
            return Err(mismatch(if unknown.is_empty() {
                format!("parts {:?} differ from topology {:?}", self.parts, topology.parts())
            } else {
                format!("unknown part name(s) {unknown:?}")
            }));
        }
        for (t, f) in self.frames.iter().enumerate() {
            if f.len() != self.parts.len() {
                return Err(mismatch(format!("frame {t} has {} entries, expected {}", f.len(), self.parts.len())));
            }
            if let Some(i) = f.iter().position(|q| q.is_some_and(|[u, v]| !u.is_finite() || !v.is_finite())) {
                return Err(mismatch(format!("frame {t} part `{}` is not finite", self.parts[i])));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, IoError> {
        read_json(path)
    }

    pub fn save(&self, path: &Path) -> Result<(), IoError> {
        write_json(path, self)
    }
}

/// Tracker output for one clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionFile {
    pub clip: String,
    #[serde(default)]
    pub parts: Vec<String>,
    pub poses: Vec<Vec<Option<[f64; 2]>>>,
}

impl PredictionFile {
    pub fn new(clip: &str, topology: &SkeletonTopology, poses: &[Pose]) -> Self {
        Self {
            clip: clip.to_string(),
            parts: topology.parts().to_vec(),
            poses: poses
                .iter()
                .map(|p| p.positions.iter().map(|q| q.map(Into::into)).collect())
                .collect(),
        }
    }

    pub fn to_poses(&self) -> Vec<Pose> {
        self.poses
            .iter()
            .enumerate()
            .map(|(t, f)| Pose::new(t, f.iter().map(|q| q.map(Point::from)).collect()))
            .collect()
    }

    pub fn load(path: &Path) -> Result<Self, IoError> {
        read_json(path)
    }

    pub fn save(&self, path: &Path) -> Result<(), IoError> {
        write_json(path, self)
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| IoError::Json {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| IoError::Json {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })?;
    fs::write(path, text).map_err(io_err(path))
}

pub fn load_frame(path: &Path) -> Result<Image, IoError> {
    if !path.is_file() {
        return Err(IoError::MissingFrame {
            path: path.to_path_buf(),
        });
    }
    Image::load(path).map_err(|e| IoError::Decode {
        path: path.to_path_buf(),
        detail: match e {
            ImagingError::Decode { source, .. } => source.to_string(),
            other => other.to_string(),
        },
    })
}

pub fn save_frame(image: &Image, path: &Path) -> Result<(), IoError> {
    image.to_rgb8().save(path).map_err(|e| IoError::Encode {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })
}

/// Lazily decoded frames of a clip, in order.
#[derive(Debug, Clone)]
pub struct FrameReader {
    paths: std::vec::IntoIter<PathBuf>,
}

impl Iterator for FrameReader {
    type Item = Result<Image, IoError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.paths.next().map(|p| load_frame(&p))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        self.paths.size_hint()
    }
}

impl ExactSizeIterator for FrameReader {}

#[derive(Debug)]
pub struct LoadedClip {
    pub manifest: ClipManifest,
    pub frames: FrameReader,
    /// Ground truth aligned with `frames`, when the clip has annotations.
    pub annotations: Option<Vec<Pose>>,
}

/// Opens a clip and validates its annotations against `topology`.
pub fn load_clip(manifest: &ClipManifest, topology: &SkeletonTopology) -> Result<LoadedClip, IoError> {
    if let Some(missing) = manifest.frames.iter().find(|p| !p.is_file()) {
        return Err(IoError::MissingFrame { path: missing.clone() });
    }
    let annotations = match &manifest.annotation {
        None => None,
        Some(path) => {
            let file = AnnotationFile::load(path)?;
            file.check(topology, path)?;
            if file.frames.len() < manifest.frames.len() {
                return Err(IoError::AnnotationMismatch {
                    path: path.clone(),
                    detail: format!(
                        "{} annotated frames for {} image frames",
                        file.frames.len(),
                        manifest.frames.len()
                    ),
                });
            }
            Some(file.to_poses())
        }
    };
    Ok(LoadedClip {
        manifest: manifest.clone(),
        frames: FrameReader {
            paths: manifest.frames.clone().into_iter(),
        },
        annotations,
    })
}

/// Writes frames as `frames/NNNNNN.png` and the annotation file.
pub fn write_clip(
    clip_dir: &Path,
    frames: &[Image],
    topology: &SkeletonTopology,
    truth: &[Pose],
    split: Split,
) -> Result<ClipManifest, IoError> {
    let frame_dir = clip_dir.join(FRAMES_DIR);
    fs::create_dir_all(&frame_dir).map_err(io_err(&frame_dir))?;
    for (t, img) in frames.iter().enumerate() {
        save_frame(img, &frame_dir.join(format!("{t:06}.png")))?;
    }
    AnnotationFile::from_poses(topology, truth).save(&clip_dir.join(ANNOTATION_FILE))?;
    ClipManifest::discover(clip_dir, split)
}
