//! Stick-figure overlays.

use std::path::Path;

use image::{Rgb, RgbImage};

use crate::imaging::Image;
use crate::io::IoError;
use crate::skeleton::{Point, Pose, SkeletonTopology};

#[derive(Debug, Clone, PartialEq)]
pub struct OverlayStyle {
    pub joint_radius: f64,
    pub limb_width: f64,
    pub joint_color: [u8; 3],
    pub limb_color: [u8; 3],
    pub root_color: [u8; 3],
}

impl Default for OverlayStyle {
    fn default() -> Self {
        Self {
            joint_radius: 3.0,
            limb_width: 2.0,
            joint_color: [255, 64, 32],
            limb_color: [32, 224, 64],
            root_color: [255, 230, 0],
        }
    }
}

/// Distance from `p` to the closed segment `a`–`b`, plus the position of the
/// foot of the perpendicular along the segment in `[0, 1]`.
pub(crate) fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> (f64, f64) {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    };
    let (qx, qy) = (a[0] + t * dx, a[1] + t * dy);
    (((p[0] - qx).powi(2) + (p[1] - qy).powi(2)).sqrt(), t)
}

/// Integer pixel box covering everything within `margin` of the points,
/// clipped to the image. `None` when the box misses the image.
pub(crate) fn pixel_box(points: &[[f64; 2]], margin: f64, width: usize, height: usize) -> Option<(usize, usize, usize, usize)> {
    let lo_u = points.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min) - margin;
    let hi_u = points.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max) + margin;
    let lo_v = points.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min) - margin;
    let hi_v = points.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max) + margin;
    if hi_u < 0.0 || hi_v < 0.0 || lo_u > (width - 1) as f64 || lo_v > (height - 1) as f64 {
        return None;
    }
    let c0 = lo_u.floor().max(0.0) as usize;
    let r0 = lo_v.floor().max(0.0) as usize;
    let c1 = (hi_u.ceil() as usize).min(width - 1);
    let r1 = (hi_v.ceil() as usize).min(height - 1);
    Some((c0, r0, c1, r1))
}

fn draw_segment(img: &mut RgbImage, a: Point, b: Point, width: f64, color: [u8; 3]) {
    let (a, b) = ([a.u, a.v], [b.u, b.v]);
    let half = width / 2.0;
    let Some((c0, r0, c1, r1)) = pixel_box(&[a, b], half + 1.0, img.width() as usize, img.height() as usize) else {
        return;
    };
    for r in r0..=r1 {
        for c in c0..=c1 {
            if segment_distance([c as f64, r as f64], a, b).0 <= half {
                img.put_pixel(c as u32, r as u32, Rgb(color));
            }
        }
    }
}

fn draw_disc(img: &mut RgbImage, p: Point, radius: f64, color: [u8; 3]) {
    let Some((c0, r0, c1, r1)) = pixel_box(&[[p.u, p.v]], radius + 1.0, img.width() as usize, img.height() as usize)
    else {
        return;
    };
    for r in r0..=r1 {
        for c in c0..=c1 {
            if (c as f64 - p.u).hypot(r as f64 - p.v) <= radius {
                img.put_pixel(c as u32, r as u32, Rgb(color));
            }
        }
    }
}

/// Draws limbs for every parent-child pair with both ends present, then the
/// joints on top. Absent joints are skipped.
pub fn render_overlay(frame: &Image, pose: &Pose, topology: &SkeletonTopology, style: &OverlayStyle) -> RgbImage {
    let mut img = frame.to_rgb8();
    if img.width() == 0 || img.height() == 0 {
        return img;
    }
    for (parent, child) in topology.edges() {
        if let (Some(a), Some(b)) = (pose.get(parent), pose.get(child)) {
            draw_segment(&mut img, a, b, style.limb_width, style.limb_color);
        }
    }
    for part in 0..topology.len().min(pose.len()) {
        if let Some(p) = pose.get(part) {
            let color = if part == topology.root() {
                style.root_color
            } else {
                style.joint_color
            };
            draw_disc(&mut img, p, style.joint_radius, color);
        }
    }
    img
}

pub fn save_overlay(
    frame: &Image,
    pose: &Pose,
    topology: &SkeletonTopology,
    style: &OverlayStyle,
    path: &Path,
) -> Result<(), IoError> {
    render_overlay(frame, pose, topology, style)
        .save(path)
        .map_err(|e| IoError::Encode {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })
}
