//! Greedy per-frame pose search.
//!
//! Each frame the root is placed first by minimizing appearance plus
//! `λ₁ ·` temporal cost over a window around its previous position. Every
//! other part follows in traversal order, adding `λ₂ ·` the spatial cost
//! against its already-placed parent. Templates are refreshed once the whole
//! frame has been placed.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imaging::{
    build_integral, extract_descriptor, extract_descriptor_into, likeliness, update_template, FrameIntegrals, Image,
    ImagingError, PartDescriptor,
};
use crate::models::{mahalanobis, spatial_cost, ModelError, PoseModel};
use crate::skeleton::{Point, Pose};

/// Windows smaller than this (after clipping) trigger a warning.
const MIN_COMFORTABLE_CANDIDATES: usize = 9;

#[derive(Debug, Error)]
pub enum TrackError {
    #[error("search window for `{part}` at frame {frame} lies fully outside the image")]
    WindowFullyOutsideImage { part: String, frame: usize },
    #[error("part `{part}`")]
    Imaging {
        part: String,
        #[source]
        source: ImagingError,
    },
    #[error("part `{part}`")]
    Model {
        part: String,
        #[source]
        source: ModelError,
    },
    #[error(transparent)]
    Frame(#[from] ImagingError),
    #[error("first pose is missing part `{part}`")]
    IncompleteFirstPose { part: String },
    #[error("pose has {found} parts, model topology has {expected}")]
    PoseLengthMismatch { expected: usize, found: usize },
    #[error("re-initialization at frame {frame} needs a complete ground-truth pose")]
    MissingGroundTruthForReinit { frame: usize },
    #[error("no frames to track")]
    NoFrames,
    #[error("invalid tracker configuration: {0}")]
    InvalidConfig(String),
}

/// Order among equal-cost candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    /// Smallest displacement from the previous position, then first in
    /// row-major scan order.
    #[default]
    NearestThenRowMajor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub window_radius: u32,
    /// Reset from ground truth every this many frames.
    pub reinit_interval: Option<usize>,
    pub tie_break: TieBreak,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            lambda1: 0.7,
            lambda2: 0.2,
            window_radius: 15,
            reinit_interval: None,
            tie_break: TieBreak::default(),
        }
    }
}

impl TrackerConfig {
    /// Settings stored alongside a trained model.
    pub fn from_model(model: &PoseModel) -> Self {
        Self {
            lambda1: model.lambda1,
            lambda2: model.lambda2,
            window_radius: model.window_radius,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), TrackError> {
        if !(self.lambda1 >= 0.0 && self.lambda1.is_finite()) || !(self.lambda2 >= 0.0 && self.lambda2.is_finite()) {
            return Err(TrackError::InvalidConfig(format!(
                "lambdas must be finite and >= 0 ({}, {})",
                self.lambda1, self.lambda2
            )));
        }
        if self.window_radius == 0 {
            return Err(TrackError::InvalidConfig("window radius must be >= 1".into()));
        }
        if self.reinit_interval == Some(0) {
            return Err(TrackError::InvalidConfig("reinit interval must be >= 1".into()));
        }
        Ok(())
    }
}

/// Cost breakdown of one candidate position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub u: i64,
    pub v: i64,
    pub appearance: f64,
    pub temporal: f64,
    /// Zero for the root.
    pub spatial: f64,
    pub total: f64,
}

impl CandidateScore {
    pub fn position(&self) -> Point {
        Point::new(self.u as f64, self.v as f64)
    }
}

/// Integer candidate positions around a centre, clipped to the image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchWindow {
    pub u_min: i64,
    pub u_max: i64,
    pub v_min: i64,
    pub v_max: i64,
}

impl SearchWindow {
    /// Window of radius `radius` around `previous` rounded to the nearest
    /// pixel, or `None` when it misses the image entirely.
    pub fn around(previous: Point, radius: u32, width: usize, height: usize) -> Option<Self> {
        let (cu, cv) = (previous.u.round() as i64, previous.v.round() as i64);
        let r = i64::from(radius);
        let w = Self {
            u_min: (cu - r).max(0),
            u_max: (cu + r).min(width as i64 - 1),
            v_min: (cv - r).max(0),
            v_max: (cv + r).min(height as i64 - 1),
        };
        (w.u_min <= w.u_max && w.v_min <= w.v_max).then_some(w)
    }

    pub fn len(&self) -> usize {
        ((self.u_max - self.u_min + 1) * (self.v_max - self.v_min + 1)) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Candidates in row-major order.
    pub fn candidates(&self) -> impl Iterator<Item = (i64, i64)> {
        let s = *self;
        (s.v_min..=s.v_max).flat_map(move |v| (s.u_min..=s.u_max).map(move |u| (u, v)))
    }

    pub fn contains(&self, u: i64, v: i64) -> bool {
        u >= self.u_min && u <= self.u_max && v >= self.v_min && v <= self.v_max
    }
}

/// Positions and appearance templates carried from frame to frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackState {
    pub positions: Vec<Point>,
    pub templates: Vec<PartDescriptor>,
    pub frame_index: usize,
}

impl TrackState {
    /// Templates are the descriptors at the (rounded) annotated positions.
    pub fn initialize(
        integrals: &FrameIntegrals,
        pose: &Pose,
        model: &PoseModel,
    ) -> Result<Self, TrackError> {
        let topo = &model.topology;
        if pose.len() != topo.len() {
            return Err(TrackError::PoseLengthMismatch {
                expected: topo.len(),
                found: pose.len(),
            });
        }
        let mut positions = Vec::with_capacity(topo.len());
        let mut templates = Vec::with_capacity(topo.len());
        for part in 0..topo.len() {
            let p = pose
                .get(part)
                .filter(|p| p.is_finite())
                .ok_or_else(|| TrackError::IncompleteFirstPose {
                    part: topo.name(part).to_string(),
                })?;
            let d = extract_descriptor(integrals, p.u.round() as i64, p.v.round() as i64, &model.geometry)
                .map_err(|source| TrackError::Imaging {
                    part: topo.name(part).to_string(),
                    source,
                })?;
            positions.push(p);
            templates.push(d);
        }
        Ok(Self {
            positions,
            templates,
            frame_index: pose.frame_index,
        })
    }

    pub fn pose(&self) -> Pose {
        Pose::complete(self.frame_index, self.positions.iter().copied())
    }
}

/// Returns true when `(total, dist2)` beats the incumbent under the
/// nearest-then-row-major rule. Row-major order is implicit: the incumbent
/// was seen first.
fn improves(total: f64, dist2: f64, best: &Option<(CandidateScore, f64)>) -> bool {
    match best {
        None => true,
        Some((b, bd)) => total < b.total || (total == b.total && dist2 < *bd),
    }
}

fn search(
    part: usize,
    integrals: &FrameIntegrals,
    state: &TrackState,
    parent_position: Option<Point>,
    model: &PoseModel,
    config: &TrackerConfig,
) -> Result<CandidateScore, TrackError> {
    let name = || model.topology.name(part).to_string();
    let previous = state.positions[part];
    let template = &state.templates[part];
    if template.len() != model.geometry.descriptor_len() {
        return Err(TrackError::Imaging {
            part: name(),
            source: ImagingError::LengthMismatch {
                left: template.len(),
                right: model.geometry.descriptor_len(),
            },
        });
    }
    let window = SearchWindow::around(previous, config.window_radius, integrals.width(), integrals.height())
        .ok_or_else(|| TrackError::WindowFullyOutsideImage {
            part: name(),
            frame: state.frame_index + 1,
        })?;
    if window.len() < MIN_COMFORTABLE_CANDIDATES {
        log::warn!(
            "frame {}: `{}` window clipped to {} candidates",
            state.frame_index + 1,
            model.topology.name(part),
            window.len()
        );
    }
    let temporal_model = &model.temporal.parts[part];
    let clusters = match parent_position {
        Some(_) => Some(model.spatial.clusters(part).ok_or_else(|| TrackError::Model {
            part: name(),
            source: ModelError::NoClusters,
        })?),
        None => None,
    };

    let mut feature = PartDescriptor(vec![0.0; template.len()]);
    let mut best: Option<(CandidateScore, f64)> = None;
    for (u, v) in window.candidates() {
        extract_descriptor_into(integrals, u, v, &model.geometry, &mut feature.0);
        let appearance = likeliness(&feature, template).map_err(|source| TrackError::Imaging {
            part: name(),
            source,
        })?;
        let candidate = Point::new(u as f64, v as f64);
        let temporal = mahalanobis(candidate.sub(previous), temporal_model);
        let (spatial, total) = match (parent_position, clusters) {
            (Some(parent), Some(clusters)) => {
                let spatial = spatial_cost(candidate.sub(parent), clusters).map_err(|source| {
                    TrackError::Model {
                        part: name(),
                        source,
                    }
                })?;
                (
                    spatial,
                    appearance + config.lambda1 * temporal + config.lambda2 * spatial,
                )
            }
            _ => (0.0, appearance + config.lambda1 * temporal),
        };
        let d = candidate.sub(previous);
        let dist2 = d[0] * d[0] + d[1] * d[1];
        if improves(total, dist2, &best) {
            best = Some((
                CandidateScore {
                    u,
                    v,
                    appearance,
                    temporal,
                    spatial,
                    total,
                },
                dist2,
            ));
        }
    }
    Ok(best.expect("window is non-empty").0)
}

/// Places the root: `argmin l + λ₁·d_root` over its window.
pub fn track_root(
    integrals: &FrameIntegrals,
    state: &TrackState,
    model: &PoseModel,
    config: &TrackerConfig,
) -> Result<CandidateScore, TrackError> {
    search(model.topology.root(), integrals, state, None, model, config)
}

/// Places a non-root part given its parent's position in this frame:
/// `argmin l + λ₁·d_i + λ₂·d_{i,par(i)}` over its window.
pub fn track_part(
    part: usize,
    integrals: &FrameIntegrals,
    state: &TrackState,
    parent_position: Point,
    model: &PoseModel,
    config: &TrackerConfig,
) -> Result<CandidateScore, TrackError> {
    search(part, integrals, state, Some(parent_position), model, config)
}

/// Work done while tracking one frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FrameStats {
    /// Candidate positions scored, summed over parts.
    pub candidates: usize,
    /// Cluster Mahalanobis evaluations for the spatial term.
    pub cluster_evaluations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameResult {
    pub state: TrackState,
    /// Winning score per part, in topology order.
    pub scores: Vec<CandidateScore>,
    pub stats: FrameStats,
}

/// Tracks every part in traversal order, then updates the templates.
pub fn track_frame(
    integrals: &FrameIntegrals,
    state: &TrackState,
    model: &PoseModel,
    config: &TrackerConfig,
) -> Result<FrameResult, TrackError> {
    let topo = &model.topology;
    let n = topo.len();
    if state.positions.len() != n || state.templates.len() != n {
        return Err(TrackError::PoseLengthMismatch {
            expected: n,
            found: state.positions.len(),
        });
    }
    let mut scores: Vec<Option<CandidateScore>> = vec![None; n];
    let mut stats = FrameStats::default();
    for part in topo.traversal_order() {
        let window = SearchWindow::around(
            state.positions[part],
            config.window_radius,
            integrals.width(),
            integrals.height(),
        );
        let score = match topo.parent(part) {
            None => track_root(integrals, state, model, config)?,
            Some(parent) => {
                let parent_pos = scores[parent].expect("parent placed first").position();
                let s = track_part(part, integrals, state, parent_pos, model, config)?;
                stats.cluster_evaluations +=
                    window.map_or(0, |w| w.len()) * model.spatial.clusters(part).map_or(0, <[_]>::len);
                s
            }
        };
        stats.candidates += window.map_or(0, |w| w.len());
        scores[part] = Some(score);
    }
    let scores: Vec<CandidateScore> = scores.into_iter().map(|s| s.expect("every part placed")).collect();

    let mut templates = Vec::with_capacity(n);
    for (part, score) in scores.iter().enumerate() {
        let wrap = |source| TrackError::Imaging {
            part: topo.name(part).to_string(),
            source,
        };
        let feature = extract_descriptor(integrals, score.u, score.v, &model.geometry).map_err(wrap)?;
        templates.push(update_template(&state.templates[part], &feature, score.appearance).map_err(wrap)?);
    }
    Ok(FrameResult {
        state: TrackState {
            positions: scores.iter().map(CandidateScore::position).collect(),
            templates,
            frame_index: state.frame_index + 1,
        },
        scores,
        stats,
    })
}

/// Frame-by-frame tracking session.
#[derive(Debug, Clone)]
pub struct Tracker<'m> {
    model: &'m PoseModel,
    config: TrackerConfig,
    state: TrackState,
    last_stats: FrameStats,
}

impl<'m> Tracker<'m> {
    /// Starts from an annotated first frame. Returns the session and the
    /// first-frame pose, which is the annotation itself.
    pub fn start(
        model: &'m PoseModel,
        config: TrackerConfig,
        first_frame: &Image,
        first_pose: &Pose,
    ) -> Result<(Self, Pose), TrackError> {
        config.validate()?;
        let integrals = build_integral(first_frame)?;
        let mut state = TrackState::initialize(&integrals, first_pose, model)?;
        state.frame_index = 0;
        let mut pose = first_pose.clone();
        pose.frame_index = 0;
        Ok((
            Self {
                model,
                config,
                state,
                last_stats: FrameStats::default(),
            },
            pose,
        ))
    }

    pub fn state(&self) -> &TrackState {
        &self.state
    }

    pub fn last_stats(&self) -> FrameStats {
        self.last_stats
    }

    /// Index the next call to [`Tracker::advance`] will produce.
    pub fn next_frame_index(&self) -> usize {
        self.state.frame_index + 1
    }

    /// Tracks one more frame. On re-initialization frames the state is reset
    /// to `ground_truth`, which must then be complete.
    pub fn advance(&mut self, frame: &Image, ground_truth: Option<&Pose>) -> Result<Pose, TrackError> {
        let t = self.next_frame_index();
        let integrals = build_integral(frame)?;
        if self.config.reinit_interval.is_some_and(|n| t.is_multiple_of(n)) {
            let gt = ground_truth
                .filter(|p| p.is_complete())
                .ok_or(TrackError::MissingGroundTruthForReinit { frame: t })?;
            let mut state = TrackState::initialize(&integrals, gt, self.model)?;
            state.frame_index = t;
            self.state = state;
            self.last_stats = FrameStats::default();
            let mut pose = gt.clone();
            pose.frame_index = t;
            return Ok(pose);
        }
        let result = track_frame(&integrals, &self.state, self.model, &self.config)?;
        self.state = result.state;
        self.last_stats = result.stats;
        Ok(self.state.pose())
    }
}

/// Tracks a whole clip from an annotated first frame.
///
/// `ground_truth`, when given, is indexed by frame and used only for periodic
/// re-initialization.
pub fn track_video(
    frames: &[Image],
    first_pose: &Pose,
    model: &PoseModel,
    config: &TrackerConfig,
    ground_truth: Option<&[Pose]>,
) -> Result<Vec<Pose>, TrackError> {
    let (first, rest) = frames.split_first().ok_or(TrackError::NoFrames)?;
    let (mut tracker, pose0) = Tracker::start(model, config.clone(), first, first_pose)?;
    let mut out = Vec::with_capacity(frames.len());
    out.push(pose0);
    for frame in rest {
        let t = tracker.next_frame_index();
        let gt = ground_truth.and_then(|g| g.get(t));
        out.push(tracker.advance(frame, gt)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::AnnulusGeometry;
    use crate::models::{GaussianParams, SpatialModel, TemporalModel};
    use crate::skeleton::SkeletonTopology;

    fn zero_mean() -> GaussianParams {
        GaussianParams::new([0.0, 0.0], [[4.0, 0.0], [0.0, 4.0]]).unwrap()
    }

    fn chain_model(offsets: &[[f64; 2]]) -> PoseModel {
        let n = offsets.len();
        let topology = SkeletonTopology::new(
            (0..n).map(|i| format!("p{i}")).collect(),
            (0..n).map(|i| i.checked_sub(1)).collect(),
        )
        .unwrap();
        PoseModel {
            temporal: TemporalModel {
                parts: vec![zero_mean(); n],
            },
            spatial: SpatialModel {
                parts: (0..n)
                    .map(|i| {
                        (i > 0).then(|| {
                            let d = [offsets[i][0] - offsets[i - 1][0], offsets[i][1] - offsets[i - 1][1]];
                            vec![GaussianParams::new(d, [[4.0, 0.0], [0.0, 4.0]]).unwrap()]
                        })
                    })
                    .collect(),
            },
            topology,
            geometry: AnnulusGeometry::square(3, 2).unwrap(),
            lambda1: 0.7,
            lambda2: 0.2,
            window_radius: 4,
            clusters: 1,
            epsilon: 1e-4,
        }
    }

    fn textured(w: usize, h: usize) -> Image {
        Image::from_fn(w, h, |r, c| {
            let x = (r * 31 + c * 17) % 23;
            let y = (r * r + 3 * c) % 11;
            [x as f64 / 23.0, y as f64 / 11.0, ((r ^ c) % 7) as f64 / 7.0]
        })
        .unwrap()
    }

    #[test]
    fn window_clipping() {
        let w = SearchWindow::around(Point::new(1.0, 1.0), 3, 10, 10).unwrap();
        assert_eq!((w.u_min, w.u_max, w.v_min, w.v_max), (0, 4, 0, 4));
        assert_eq!(w.len(), 25);
        assert!(SearchWindow::around(Point::new(-20.0, 5.0), 3, 10, 10).is_none());
        let order: Vec<_> = SearchWindow::around(Point::new(0.0, 0.0), 1, 10, 10)
            .unwrap()
            .candidates()
            .collect();
        assert_eq!(order, vec![(0, 0), (1, 0), (0, 1), (1, 1)]);
    }

    #[test]
    fn identical_frames_keep_pose_and_templates() {
        let offsets = [[30.0, 20.0], [30.0, 30.0], [38.0, 36.0]];
        let model = chain_model(&offsets);
        let img = textured(64, 56);
        let pose = Pose::complete(0, offsets.iter().map(|o| Point::new(o[0], o[1])));
        let ii = build_integral(&img).unwrap();
        let state = TrackState::initialize(&ii, &pose, &model).unwrap();
        let r = track_frame(&ii, &state, &model, &TrackerConfig::from_model(&model)).unwrap();
        assert_eq!(r.state.positions, state.positions);
        assert_eq!(r.state.templates, state.templates);
        assert_eq!(r.state.frame_index, 1);
        for s in &r.scores {
            assert_eq!(s.total, 0.0);
        }
    }

    #[test]
    fn uniform_image_ties_resolve_to_previous_position() {
        let model = chain_model(&[[10.0, 10.0]]);
        let img = Image::from_gray(24, 24, vec![0.5; 576]).unwrap();
        let ii = build_integral(&img).unwrap();
        let state = TrackState::initialize(&ii, &Pose::complete(0, [Point::new(10.0, 10.0)]), &model).unwrap();
        let config = TrackerConfig {
            lambda1: 0.0,
            ..TrackerConfig::from_model(&model)
        };
        let s = track_root(&ii, &state, &model, &config).unwrap();
        assert_eq!((s.u, s.v), (10, 10));
    }

    #[test]
    fn equidistant_ties_take_row_major_first() {
        // previous position halfway between pixels: four nearest candidates tie
        let model = chain_model(&[[10.0, 10.0]]);
        let img = Image::from_gray(24, 24, vec![0.5; 576]).unwrap();
        let ii = build_integral(&img).unwrap();
        let mut state = TrackState::initialize(&ii, &Pose::complete(0, [Point::new(10.0, 10.0)]), &model).unwrap();
        state.positions[0] = Point::new(10.5, 10.5);
        let config = TrackerConfig {
            lambda1: 0.0,
            ..TrackerConfig::from_model(&model)
        };
        let s = track_root(&ii, &state, &model, &config).unwrap();
        assert_eq!((s.u, s.v), (10, 10));
    }

    #[test]
    fn window_outside_image_is_an_error() {
        let model = chain_model(&[[10.0, 10.0]]);
        let img = textured(24, 24);
        let ii = build_integral(&img).unwrap();
        let mut state = TrackState::initialize(&ii, &Pose::complete(0, [Point::new(10.0, 10.0)]), &model).unwrap();
        state.positions[0] = Point::new(100.0, 10.0);
        let err = track_root(&ii, &state, &model, &TrackerConfig::from_model(&model)).unwrap_err();
        assert!(matches!(err, TrackError::WindowFullyOutsideImage { ref part, .. } if part == "p0"));
    }

    #[test]
    fn frame_stats_match_window_sizes() {
        let offsets = [[30.0, 20.0], [30.0, 30.0], [38.0, 36.0]];
        let model = chain_model(&offsets);
        let img = textured(64, 56);
        let ii = build_integral(&img).unwrap();
        let pose = Pose::complete(0, offsets.iter().map(|o| Point::new(o[0], o[1])));
        let state = TrackState::initialize(&ii, &pose, &model).unwrap();
        let r = track_frame(&ii, &state, &model, &TrackerConfig::from_model(&model)).unwrap();
        assert_eq!(r.stats.candidates, 3 * 81);
        assert_eq!(r.stats.cluster_evaluations, 2 * 81);
    }

    #[test]
    fn single_frame_video() {
        let model = chain_model(&[[10.0, 10.0]]);
        let img = textured(24, 24);
        let pose = Pose::complete(0, [Point::new(10.2, 9.7)]);
        let out = track_video(&[img], &pose, &model, &TrackerConfig::from_model(&model), None).unwrap();
        assert_eq!(out, vec![pose]);
    }

    #[test]
    fn reinit_requires_ground_truth() {
        let model = chain_model(&[[10.0, 10.0]]);
        let frames = vec![textured(24, 24); 3];
        let pose = Pose::complete(0, [Point::new(10.0, 10.0)]);
        let config = TrackerConfig {
            reinit_interval: Some(2),
            ..TrackerConfig::from_model(&model)
        };
        let err = track_video(&frames, &pose, &model, &config, None).unwrap_err();
        assert!(matches!(err, TrackError::MissingGroundTruthForReinit { frame: 2 }));
    }

    #[test]
    fn incomplete_first_pose_rejected() {
        let model = chain_model(&[[10.0, 10.0], [10.0, 14.0]]);
        let img = textured(24, 24);
        let pose = Pose::new(0, vec![Some(Point::new(10.0, 10.0)), None]);
        let err = track_video(&[img], &pose, &model, &TrackerConfig::default(), None).unwrap_err();
        assert!(matches!(err, TrackError::IncompleteFirstPose { ref part } if part == "p1"));
    }

    #[test]
    fn invalid_config_rejected() {
        for c in [
            TrackerConfig { lambda1: -1.0, ..Default::default() },
            TrackerConfig { window_radius: 0, ..Default::default() },
            TrackerConfig { reinit_interval: Some(0), ..Default::default() },
        ] {
            assert!(c.validate().is_err());
        }
    }
}
