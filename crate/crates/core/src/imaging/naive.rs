//! Per-pixel descriptor path, used as the timing baseline for the integral
//! image route. It visits every pixel of every ring.

use super::{AnnulusGeometry, GradientMaps, Image, ImagingError, PartDescriptor, PLANES};

/// Same layout and clipping rules as [`super::extract_descriptor`], computed
/// by direct summation over the gradient maps and raw planes.
pub fn extract_descriptor_naive(
    image: &Image,
    gradients: &GradientMaps,
    u: i64,
    v: i64,
    geometry: &AnnulusGeometry,
) -> Result<PartDescriptor, ImagingError> {
    geometry.validate()?;
    if !image.contains(u, v) {
        return Err(ImagingError::CenterOutsideImage {
            u,
            v,
            width: image.width(),
            height: image.height(),
        });
    }
    let (w, h) = (image.width() as i64, image.height() as i64);
    let m = geometry.rings();
    let mut out = vec![0.0; geometry.descriptor_len()];
    let sources: Vec<&[f64]> = (0..PLANES)
        .flat_map(|p| [image.plane(p), &gradients.horizontal[p][..], &gradients.vertical[p][..]])
        .collect();

    for ring in 0..m {
        let outer = geometry.rect(ring, u, v);
        let inner = (ring > 0).then(|| geometry.rect(ring - 1, u, v));
        let mut sums = [0.0f64; 9];
        let mut area = 0usize;
        for r in outer.top.max(0)..=outer.bottom.min(h - 1) {
            for c in outer.left.max(0)..=outer.right.min(w - 1) {
                if let Some(inner) = inner {
                    if r >= inner.top && r <= inner.bottom && c >= inner.left && c <= inner.right {
                        continue;
                    }
                }
                let idx = (r * w + c) as usize;
                for (s, src) in sums.iter_mut().zip(&sources) {
                    *s += src[idx];
                }
                area += 1;
            }
        }
        if area > 0 {
            for (ch, s) in sums.iter().enumerate() {
                out[ch * m + ring] = s / area as f64;
            }
        }
    }
    Ok(PartDescriptor(out))
}
