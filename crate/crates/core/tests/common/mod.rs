//! Shared scene builders and brute-force oracles for the integration tests.
#![allow(dead_code)]

use posetrack::imaging::{build_integral, extract_descriptor, likeliness, AnnulusGeometry, FrameIntegrals, Image};
use posetrack::models::{mahalanobis, GaussianParams, SpatialModel, TemporalModel};
use posetrack::tracker::CandidateScore;
use posetrack::{Point, Pose, PoseModel, SkeletonTopology, TrackState, TrackerConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `eᵀ Σ⁻¹ e` with the inverse written out as adjugate over determinant.
pub fn adjugate_mahalanobis(e: [f64; 2], mean: [f64; 2], cov: [[f64; 2]; 2]) -> f64 {
    let (a, b, c, d) = (cov[0][0], cov[0][1], cov[1][0], cov[1][1]);
    let det = a * d - b * c;
    let (x, y) = (e[0] - mean[0], e[1] - mean[1]);
    (d * x * x - (b + c) * x * y + a * y * y) / det
}

/// Direct L2 distance.
pub fn l2(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += (a[i] - b[i]).powi(2);
    }
    s.sqrt()
}

/// Evaluates the objective at every window candidate and returns the
/// minimizer under: lower total, then smaller squared displacement from the
/// previous position, then earlier in row-major order.
pub fn brute_force(
    part: usize,
    integrals: &FrameIntegrals,
    state: &TrackState,
    parent_position: Option<Point>,
    model: &PoseModel,
    config: &TrackerConfig,
) -> CandidateScore {
    let prev = state.positions[part];
    let (cu, cv) = (prev.u.round() as i64, prev.v.round() as i64);
    let r = config.window_radius as i64;
    let (w, h) = (integrals.width() as i64, integrals.height() as i64);
    let mut all = Vec::new();
    for v in (cv - r).max(0)..=(cv + r).min(h - 1) {
        for u in (cu - r).max(0)..=(cu + r).min(w - 1) {
            let feature = extract_descriptor(integrals, u, v, &model.geometry).unwrap();
            let appearance = likeliness(&feature, &state.templates[part]).unwrap();
            let e = [u as f64 - prev.u, v as f64 - prev.v];
            let temporal = mahalanobis(e, &model.temporal.parts[part]);
            let (spatial, total) = match parent_position {
                None => (0.0, appearance + config.lambda1 * temporal),
                Some(p) => {
                    let off = [u as f64 - p.u, v as f64 - p.v];
                    let spatial = model
                        .spatial
                        .clusters(part)
                        .unwrap()
                        .iter()
                        .map(|g| mahalanobis(off, g))
                        .fold(f64::INFINITY, f64::min);
                    (spatial, appearance + config.lambda1 * temporal + config.lambda2 * spatial)
                }
            };
            all.push((
                CandidateScore {
                    u,
                    v,
                    appearance,
                    temporal,
                    spatial,
                    total,
                },
                e[0] * e[0] + e[1] * e[1],
            ));
        }
    }
    // Stable sort keeps row-major order among full ties.
    all.sort_by(|a, b| a.0.total.total_cmp(&b.0.total).then(a.1.total_cmp(&b.1)));
    all[0].0
}

pub fn random_gaussian(rng: &mut ChaCha8Rng, mean: [f64; 2], isotropic: bool) -> GaussianParams {
    if isotropic {
        let s = rng.random_range(1.0..9.0);
        return GaussianParams::new(mean, [[s, 0.0], [0.0, s]]).unwrap();
    }
    let a: f64 = rng.random_range(1.0..9.0);
    let b: f64 = rng.random_range(1.0..9.0);
    let c = rng.random_range(-0.8..0.8) * (a * b).sqrt();
    GaussianParams::new(mean, [[a, c], [c, b]]).unwrap()
}

/// Blocky random texture plus per-pixel noise.
pub fn random_texture(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Image {
    let block = rng.random_range(2..6);
    let bw = w / block + 1;
    let bh = h / block + 1;
    let blocks: Vec<[f64; 3]> = (0..bw * bh)
        .map(|_| [rng.random(), rng.random(), rng.random()])
        .collect();
    let noise: Vec<[f64; 3]> = (0..w * h)
        .map(|_| [rng.random_range(0.0..0.1), rng.random_range(0.0..0.1), rng.random_range(0.0..0.1)])
        .collect();
    Image::from_fn(w, h, |r, c| {
        let b = blocks[(r / block) * bw + c / block];
        let n = noise[r * w + c];
        [b[0] * 0.9 + n[0], b[1] * 0.9 + n[1], b[2] * 0.9 + n[2]]
    })
    .unwrap()
}

/// `image` moved by `(du, dv)` with replicated borders, plus fresh noise.
pub fn shifted(rng: &mut ChaCha8Rng, image: &Image, du: i64, dv: i64, noise: f64) -> Image {
    let (w, h) = (image.width() as i64, image.height() as i64);
    Image::from_fn(image.width(), image.height(), |r, c| {
        let sr = (r as i64 - dv).clamp(0, h - 1) as usize;
        let sc = (c as i64 - du).clamp(0, w - 1) as usize;
        std::array::from_fn(|p| image.get(p, sr, sc) + if noise > 0.0 { rng.random_range(0.0..noise) } else { 0.0 })
    })
    .unwrap()
}

/// A tracking problem: previous state, the next frame and a model.
pub struct Scene {
    pub model: PoseModel,
    pub config: TrackerConfig,
    pub state: TrackState,
    pub next: FrameIntegrals,
    pub next_image: Image,
}

/// Random tree of 2–5 parts over a random textured frame pair. Every fifth
/// seed uses a flat frame, half-integer positions and no temporal weight, so
/// that exact ties occur and the tie-break order is exercised.
pub fn random_scene(seed: u64, window_radius: u32) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let flat = seed % 5 == 4;
    let n = rng.random_range(2..=5);
    let parents: Vec<Option<usize>> = (0..n).map(|i| (i > 0).then(|| rng.random_range(0..i))).collect();
    let topology = SkeletonTopology::new((0..n).map(|i| format!("p{i}")).collect(), parents.clone()).unwrap();
    let (w, h) = (rng.random_range(40..64), rng.random_range(40..64));
    let geometry = AnnulusGeometry::square(rng.random_range(2..=5), rng.random_range(1..=3)).unwrap();

    let first = if flat {
        let v = rng.random_range(1..8) as f64 / 8.0;
        Image::from_gray(w, h, vec![v; w * h]).unwrap()
    } else {
        random_texture(&mut rng, w, h)
    };
    let (du, dv) = (rng.random_range(-3..=3), rng.random_range(-3..=3));
    let next_image = if flat { first.clone() } else { shifted(&mut rng, &first, du, dv, 0.05) };

    let positions: Vec<Point> = (0..n)
        .map(|_| {
            if flat {
                // Half-integer positions make neighbours equidistant.
                Point::new(rng.random_range(0..w - 1) as f64 + 0.5, rng.random_range(0..h - 1) as f64 + 0.5)
            } else {
                Point::new(rng.random_range(0.0..(w - 1) as f64), rng.random_range(0.0..(h - 1) as f64))
            }
        })
        .collect();
    let temporal = TemporalModel {
        parts: (0..n)
            .map(|_| {
                let mean = if flat { [0.0, 0.0] } else { [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)] };
                random_gaussian(&mut rng, mean, flat)
            })
            .collect(),
    };
    let spatial = SpatialModel {
        parts: (0..n)
            .map(|i| {
                parents[i].map(|p| {
                    let k = rng.random_range(1..=3);
                    let base = [positions[i].u - positions[p].u, positions[i].v - positions[p].v];
                    (0..k)
                        .map(|_| {
                            let mean = [base[0] + rng.random_range(-4.0..4.0), base[1] + rng.random_range(-4.0..4.0)];
                            random_gaussian(&mut rng, mean, flat)
                        })
                        .collect()
                })
            })
            .collect(),
    };
    let lambda = |rng: &mut ChaCha8Rng| if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.0..1.5) };
    let lambda1 = if flat { 0.0 } else { lambda(&mut rng) };
    let lambda2 = lambda(&mut rng);
    let model = PoseModel {
        topology,
        temporal,
        spatial,
        geometry,
        lambda1,
        lambda2,
        window_radius,
        clusters: 3,
        epsilon: 1e-4,
    };
    let first_ii = build_integral(&first).unwrap();
    let state = TrackState::initialize(&first_ii, &Pose::complete(0, positions), &model).unwrap();
    let config = TrackerConfig::from_model(&model);
    Scene {
        next: build_integral(&next_image).unwrap(),
        next_image,
        model,
        config,
        state,
    }
}
