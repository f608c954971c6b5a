//! Descriptor-extraction timing: integral-image path against the per-pixel
//! baseline, over every candidate of a search window.

use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::imaging::{
    build_integral, extract_descriptor_into, gradient_maps, naive::extract_descriptor_naive, AnnulusGeometry, Image,
    ImagingError,
};
use crate::skeleton::Point;
use crate::tracker::SearchWindow;

pub const DEFAULT_RUNS: usize = 5;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("no frames to time")]
    NoFrames,
    #[error("frame {index} is {found:?}, expected {expected:?}")]
    SizeMismatch {
        index: usize,
        found: (usize, usize),
        expected: (usize, usize),
    },
    #[error("window around ({u}, {v}) misses the {width}x{height} image")]
    WindowOutside { u: f64, v: f64, width: usize, height: usize },
    #[error(transparent)]
    Imaging(#[from] ImagingError),
}

#[derive(Debug, Clone, Serialize)]
pub struct MachineInfo {
    pub os: &'static str,
    pub arch: &'static str,
    pub threads: usize,
    pub debug_build: bool,
}

impl MachineInfo {
    pub fn current() -> Self {
        Self {
            os: std::env::consts::OS,
            arch: std::env::consts::ARCH,
            threads: std::thread::available_parallelism().map_or(1, |n| n.get()),
            debug_build: cfg!(debug_assertions),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchResult {
    pub width: usize,
    pub height: usize,
    pub window_radius: u32,
    pub rings: usize,
    pub candidates: usize,
    pub frames: usize,
    pub runs: usize,
    /// Median over runs of wall-clock seconds per frame.
    pub integral_seconds: f64,
    pub naive_seconds: f64,
    /// `naive_seconds / integral_seconds`.
    pub speedup: f64,
    /// Largest absolute difference between the two paths' descriptors.
    pub max_abs_diff: f64,
}

pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty slice");
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Times both paths over every candidate of the window centred on `center`
/// in each frame. Both sides include their per-frame preprocessing
/// (gradients, and integral images for the fast path).
pub fn bench_window(
    frames: &[Image],
    center: Point,
    window_radius: u32,
    geometry: &AnnulusGeometry,
    runs: usize,
) -> Result<BenchResult, BenchError> {
    geometry.validate()?;
    let first = frames.first().ok_or(BenchError::NoFrames)?;
    let (w, h) = (first.width(), first.height());
    if let Some(index) = frames.iter().position(|f| f.width() != w || f.height() != h) {
        return Err(BenchError::SizeMismatch {
            index,
            found: (frames[index].width(), frames[index].height()),
            expected: (w, h),
        });
    }
    let window = SearchWindow::around(center, window_radius, w, h).ok_or(BenchError::WindowOutside {
        u: center.u,
        v: center.v,
        width: w,
        height: h,
    })?;
    let candidates: Vec<(i64, i64)> = window.candidates().collect();
    let len = geometry.descriptor_len();
    let runs = runs.max(1);

    let mut fast_out = vec![0.0; candidates.len() * len];
    let mut slow_out = vec![0.0; candidates.len() * len];
    let mut fast_times = Vec::with_capacity(runs);
    let mut slow_times = Vec::with_capacity(runs);
    for _ in 0..runs {
        let start = Instant::now();
        for frame in frames {
            let integrals = build_integral(frame)?;
            for (k, &(u, v)) in candidates.iter().enumerate() {
                extract_descriptor_into(&integrals, u, v, geometry, &mut fast_out[k * len..(k + 1) * len]);
            }
        }
        fast_times.push(start.elapsed().as_secs_f64() / frames.len() as f64);

        let start = Instant::now();
        for frame in frames {
            let gradients = gradient_maps(frame);
            for (k, &(u, v)) in candidates.iter().enumerate() {
                let d = extract_descriptor_naive(frame, &gradients, u, v, geometry)?;
                slow_out[k * len..(k + 1) * len].copy_from_slice(d.values());
            }
        }
        slow_times.push(start.elapsed().as_secs_f64() / frames.len() as f64);
    }
    let max_abs_diff = fast_out
        .iter()
        .zip(&slow_out)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let integral_seconds = median(&mut fast_times);
    let naive_seconds = median(&mut slow_times);
    Ok(BenchResult {
        width: w,
        height: h,
        window_radius,
        rings: geometry.rings(),
        candidates: candidates.len(),
        frames: frames.len(),
        runs,
        integral_seconds,
        naive_seconds,
        speedup: naive_seconds / integral_seconds.max(f64::MIN_POSITIVE),
        max_abs_diff,
    })
}

/// Tab-separated rows, one per result, with a header.
pub fn results_to_text(results: &[BenchResult]) -> String {
    let mut out = String::from("radius\tcandidates\trings\tframes\tintegral_s\tnaive_s\tspeedup\n");
    for r in results {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{:.6e}\t{:.6e}\t{:.2}\n",
            r.window_radius, r.candidates, r.rings, r.frames, r.integral_seconds, r.naive_seconds, r.speedup
        ));
    }
    out
}
