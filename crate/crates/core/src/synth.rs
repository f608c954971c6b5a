//! Scripted synthetic clips: a textured 14-joint stick figure over a quiet
//! background, with exact ground truth.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imaging::{Image, PLANES};
use crate::io::{self, ClipManifest, IoError, Split};
use crate::render::{pixel_box, segment_distance};
use crate::skeleton::{Point, Pose, SkeletonTopology};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid motion script: {0}")]
    InvalidScript(String),
    #[error("oscillation names unknown joint `{0}`")]
    UnknownJoint(String),
    #[error(transparent)]
    Io(#[from] IoError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Waveform {
    Sine,
    /// `+amplitude` for the first half of each period, `-amplitude` after.
    Square,
}

/// Rotation of everything below `joint` about `joint`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Oscillation {
    pub joint: String,
    pub amplitude_deg: f64,
    /// Period in frames.
    pub period: f64,
    #[serde(default = "default_waveform")]
    pub waveform: Waveform,
}

fn default_waveform() -> Waveform {
    Waveform::Sine
}

impl Oscillation {
    pub fn angle(&self, t: usize) -> f64 {
        let phase = t as f64 / self.period;
        let s = match self.waveform {
            Waveform::Sine => (2.0 * PI * phase).sin(),
            Waveform::Square => {
                if phase.rem_euclid(1.0) < 0.5 {
                    1.0
                } else {
                    -1.0
                }
            }
        };
        self.amplitude_deg.to_radians() * s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionScript {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub seed: u64,
    /// Head position in frame 0.
    pub start: [f64; 2],
    /// Whole-figure translation per frame.
    pub velocity: [f64; 2],
    /// Multiplies every bone length.
    pub scale: f64,
    pub oscillations: Vec<Oscillation>,
}

impl Default for MotionScript {
    fn default() -> Self {
        Self {
            width: 200,
            height: 150,
            frames: 30,
            seed: 0,
            start: [60.0, 20.0],
            velocity: [2.0, 0.0],
            scale: 1.0,
            oscillations: Vec::new(),
        }
    }
}

impl MotionScript {
    /// Same oscillation on both elbows.
    pub fn with_elbows(mut self, amplitude_deg: f64, period: f64, waveform: Waveform) -> Self {
        for joint in ["left_elbow", "right_elbow"] {
            self.oscillations.push(Oscillation {
                joint: joint.into(),
                amplitude_deg,
                period,
                waveform,
            });
        }
        self
    }

    fn validate(&self, topology: &SkeletonTopology) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidScript(m.into()));
        if self.width == 0 || self.height == 0 {
            return bad("image size must be non-zero");
        }
        if self.frames == 0 {
            return bad("frame count must be >= 1");
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return bad("scale must be positive");
        }
        if !self.start.iter().chain(&self.velocity).all(|x| x.is_finite()) {
            return bad("start and velocity must be finite");
        }
        for o in &self.oscillations {
            if topology.index_of(&o.joint).is_none() {
                return Err(SynthError::UnknownJoint(o.joint.clone()));
            }
            if !(o.period.is_finite() && o.period > 0.0) || !o.amplitude_deg.is_finite() {
                return bad("oscillation period must be positive and amplitude finite");
            }
        }
        Ok(())
    }
}

/// Rest offset of each full-body part from its parent, in pixels.
fn rest_offset(name: &str) -> [f64; 2] {
    match name {
        "neck" => [0.0, 14.0],
        "left_shoulder" => [-13.0, 4.0],
        "right_shoulder" => [13.0, 4.0],
        "left_elbow" => [-5.0, 17.0],
        "right_elbow" => [5.0, 17.0],
        "left_wrist" => [-2.0, 17.0],
        "right_wrist" => [2.0, 17.0],
        "left_hip" => [-8.0, 38.0],
        "right_hip" => [8.0, 38.0],
        "left_knee" => [-2.0, 21.0],
        "right_knee" => [2.0, 21.0],
        "left_foot" => [0.0, 21.0],
        "right_foot" => [0.0, 21.0],
        _ => [0.0, 0.0],
    }
}

const PALETTE: [[f64; 3]; 14] = [
    [0.95, 0.85, 0.70],
    [0.90, 0.20, 0.20],
    [0.20, 0.80, 0.25],
    [0.20, 0.35, 0.90],
    [0.95, 0.75, 0.10],
    [0.70, 0.20, 0.85],
    [0.10, 0.85, 0.85],
    [0.95, 0.45, 0.10],
    [0.55, 0.90, 0.15],
    [0.90, 0.15, 0.60],
    [0.15, 0.55, 0.55],
    [0.60, 0.40, 0.20],
    [0.95, 0.95, 0.30],
    [0.35, 0.15, 0.55],
];

const LIMB_HALF_WIDTH: f64 = 3.0;
const JOINT_RADIUS: f64 = 4.0;
const HEAD_RADIUS: f64 = 7.0;

/// Frames and ground truth held in memory. Pixel values are already
/// quantized to 8 bits, so they equal what a PNG round trip yields.
#[derive(Debug, Clone)]
pub struct SynthClip {
    pub topology: SkeletonTopology,
    pub frames: Vec<Image>,
    pub poses: Vec<Pose>,
}

/// Joint positions for every frame of the script.
pub fn script_poses(script: &MotionScript, topology: &SkeletonTopology) -> Result<Vec<Pose>, SynthError> {
    script.validate(topology)?;
    let order = topology.traversal_order();
    let poses = (0..script.frames)
        .map(|t| {
            let mut angle = vec![0.0; topology.len()];
            for o in &script.oscillations {
                let j = topology.index_of(&o.joint).expect("validated");
                angle[j] += o.angle(t);
            }
            let mut cumulative = vec![0.0; topology.len()];
            let mut pos = vec![Point::new(0.0, 0.0); topology.len()];
            for &i in &order {
                match topology.parent(i) {
                    None => {
                        pos[i] = Point::new(
                            script.start[0] + t as f64 * script.velocity[0],
                            script.start[1] + t as f64 * script.velocity[1],
                        );
                        cumulative[i] = angle[i];
                    }
                    Some(p) => {
                        let [dx, dy] = rest_offset(topology.name(i));
                        let (s, c) = cumulative[p].sin_cos();
                        pos[i] = Point::new(
                            pos[p].u + script.scale * (c * dx - s * dy),
                            pos[p].v + script.scale * (s * dx + c * dy),
                        );
                        cumulative[i] = cumulative[p] + angle[i];
                    }
                }
            }
            Pose::complete(t, pos)
        })
        .collect();
    Ok(poses)
}

fn background(script: &MotionScript) -> [Vec<f64>; PLANES] {
    let mut rng = ChaCha8Rng::seed_from_u64(script.seed);
    let base = [0.32, 0.36, 0.40];
    let mut planes: [Vec<f64>; PLANES] = Default::default();
    for r in 0..script.height {
        for c in 0..script.width {
            let wave = 0.03 * (c as f64 * 0.07).sin() * (r as f64 * 0.05).cos();
            for (p, plane) in planes.iter_mut().enumerate() {
                plane.push(base[p] + wave + rng.random_range(-0.015..0.015));
            }
        }
    }
    planes
}

fn render_frame(script: &MotionScript, topology: &SkeletonTopology, pose: &Pose, bg: &[Vec<f64>; PLANES]) -> Image {
    let (w, h) = (script.width, script.height);
    let mut planes = bg.clone();
    let texture_phase = (script.seed % 97) as f64 * 0.37;
    let pt = |i: usize| {
        let p = pose.get(i).expect("synthetic poses are complete");
        [p.u, p.v]
    };
    let half = LIMB_HALF_WIDTH * script.scale;
    for (parent, child) in topology.edges() {
        let (a, b) = (pt(parent), pt(child));
        let color = PALETTE[child % PALETTE.len()];
        let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        let Some((c0, r0, c1, r1)) = pixel_box(&[a, b], half + 1.0, w, h) else {
            continue;
        };
        for r in r0..=r1 {
            for c in c0..=c1 {
                let (d, along) = segment_distance([c as f64, r as f64], a, b);
                if d <= half {
                    // Stripes across the limb move with it.
                    let shade = 0.7 + 0.3 * (2.0 * PI * along * len / 6.0 + texture_phase).sin();
                    for p in 0..PLANES {
                        planes[p][r * w + c] = color[p] * shade;
                    }
                }
            }
        }
    }
    for i in 0..topology.len() {
        let center = pt(i);
        let color = PALETTE[i % PALETTE.len()];
        let radius = if i == topology.root() { HEAD_RADIUS } else { JOINT_RADIUS } * script.scale;
        let Some((c0, r0, c1, r1)) = pixel_box(&[center], radius + 1.0, w, h) else {
            continue;
        };
        for r in r0..=r1 {
            for c in c0..=c1 {
                let d = (c as f64 - center[0]).hypot(r as f64 - center[1]);
                if d <= radius {
                    // Bright core, darker rim.
                    let shade = if d <= radius * 0.5 { 1.0 } else { 0.6 };
                    for p in 0..PLANES {
                        planes[p][r * w + c] = color[p] * shade;
                    }
                }
            }
        }
    }
    for plane in planes.iter_mut() {
        for x in plane.iter_mut() {
            *x = (x.clamp(0.0, 1.0) * 255.0).round() as u8 as f64 / 255.0;
        }
    }
    Image::new(w, h, planes).expect("synthetic frame dimensions are consistent")
}

/// Renders the whole script in memory.
pub fn synthesize(script: &MotionScript) -> Result<SynthClip, SynthError> {
    let topology = SkeletonTopology::full_body();
    let poses = script_poses(script, &topology)?;
    let bg = background(script);
    let frames = poses.iter().map(|p| render_frame(script, &topology, p, &bg)).collect();
    Ok(SynthClip { topology, frames, poses })
}

/// Renders the script and writes it as a clip directory.
pub fn synth_generate(script: &MotionScript, out_dir: &Path, split: Split) -> Result<ClipManifest, SynthError> {
    let clip = synthesize(script)?;
    Ok(io::write_clip(out_dir, &clip.frames, &clip.topology, &clip.poses, split)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::kmeans;

    fn small(frames: usize) -> MotionScript {
        MotionScript {
            width: 120,
            height: 130,
            frames,
            start: [50.0, 12.0],
            ..MotionScript::default()
        }
    }

    #[test]
    fn zero_motion_frames_identical() {
        let script = MotionScript {
            velocity: [0.0, 0.0],
            ..small(4)
        };
        let clip = synthesize(&script).unwrap();
        for f in &clip.frames[1..] {
            assert_eq!(f, &clip.frames[0]);
        }
        assert!(clip.poses.iter().all(|p| p.positions == clip.poses[0].positions));
    }

    #[test]
    fn translation_deltas_are_exact() {
        let clip = synthesize(&small(6)).unwrap();
        for pair in clip.poses.windows(2) {
            for part in 0..clip.topology.len() {
                let d = pair[1].get(part).unwrap().sub(pair[0].get(part).unwrap());
                assert_eq!(d, [2.0, 0.0]);
            }
        }
    }

    #[test]
    fn square_elbow_forms_two_clusters() {
        let script = small(20).with_elbows(25.0, 8.0, Waveform::Square);
        let topo = SkeletonTopology::full_body();
        let poses = script_poses(&script, &topo).unwrap();
        let (e, w) = (topo.index_of("left_elbow").unwrap(), topo.index_of("left_wrist").unwrap());
        let offsets: Vec<[f64; 2]> = poses.iter().map(|p| p.get(w).unwrap().sub(p.get(e).unwrap())).collect();
        let km = kmeans(&offsets, 2).unwrap();
        assert_eq!(km.k(), 2);
        // Each cluster holds a single distinct offset.
        for (x, &a) in offsets.iter().zip(&km.assignments) {
            let c = km.centroids[a];
            assert!((x[0] - c[0]).abs() < 1e-9 && (x[1] - c[1]).abs() < 1e-9);
        }
        let sep = ((km.centroids[0][0] - km.centroids[1][0]).powi(2) + (km.centroids[0][1] - km.centroids[1][1]).powi(2)).sqrt();
        // Chord of a 17.1 px bone swung through 50 degrees.
        let bone = 17.0f64.hypot(2.0);
        assert!((sep - 2.0 * bone * 25f64.to_radians().sin()).abs() < 1e-9);
    }

    #[test]
    fn elbow_oscillation_leaves_upper_arm_alone() {
        let script = small(10).with_elbows(10.0, 10.0, Waveform::Sine);
        let topo = SkeletonTopology::full_body();
        let poses = script_poses(&script, &topo).unwrap();
        let (s, e) = (topo.index_of("right_shoulder").unwrap(), topo.index_of("right_elbow").unwrap());
        for p in &poses {
            assert_eq!(p.get(e).unwrap().sub(p.get(s).unwrap()), [5.0, 17.0]);
        }
    }

    #[test]
    fn deterministic_for_seed_and_seed_matters() {
        let a = synthesize(&small(2)).unwrap();
        let b = synthesize(&small(2)).unwrap();
        assert_eq!(a.frames, b.frames);
        let c = synthesize(&MotionScript { seed: 9, ..small(2) }).unwrap();
        assert_ne!(a.frames[0], c.frames[0]);
    }

    #[test]
    fn saved_clip_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let script = small(3).with_elbows(10.0, 6.0, Waveform::Sine);
        let clip = synthesize(&script).unwrap();
        let m = synth_generate(&script, &dir.path().join("s"), Split::Train).unwrap();
        let loaded = io::load_clip(&m, &clip.topology).unwrap();
        assert_eq!(loaded.annotations.as_deref(), Some(&clip.poses[..]));
        let frames: Vec<Image> = loaded.frames.map(Result::unwrap).collect();
        assert_eq!(frames, clip.frames);
    }

    #[test]
    fn invalid_scripts() {
        assert!(matches!(synthesize(&small(0)), Err(SynthError::InvalidScript(_))));
        let mut s = small(2);
        s.oscillations.push(Oscillation {
            joint: "tail".into(),
            amplitude_deg: 5.0,
            period: 4.0,
            waveform: Waveform::Sine,
        });
        assert!(matches!(synthesize(&s), Err(SynthError::UnknownJoint(_))));
    }
}
