//! Articulated pose tracking by greedy, parent-first minimization of an
//! appearance + temporal + spatial cost over a tree of body parts.
//!
//! The crate is organized as:
//!
//! * [`skeleton`] – part trees, traversal order, poses.
//! * [`imaging`] – frames, integral images and the annular part descriptor.
//! * [`models`] – displacement and offset Gaussians learned from annotations.
//! * [`tracker`] – the per-frame greedy search.
//! * [`eval`] – keypoint accuracy and PCP.
//! * [`io`], [`config`], [`synth`], [`render`], [`bench`] – files, settings,
//!   synthetic clips, overlays and timing.

pub mod bench;
pub mod config;
pub mod eval;
pub mod imaging;
pub mod io;
pub mod models;
pub mod render;
pub mod skeleton;
pub mod synth;
pub mod tracker;

pub use imaging::{AnnulusGeometry, FrameIntegrals, Image, PartDescriptor};
pub use models::PoseModel;
pub use skeleton::{Point, Pose, SkeletonTopology};
pub use tracker::{TrackState, TrackerConfig};
