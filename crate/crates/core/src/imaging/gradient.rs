use super::{Image, PLANES};

/// Per-plane gradient magnitudes, same layout as the source planes.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientMaps {
    /// |∂u|: change along columns.
    pub horizontal: [Vec<f64>; PLANES],
    /// |∂v|: change along rows.
    pub vertical: [Vec<f64>; PLANES],
}

/// Absolute central differences with stencil `[-1, 0, 1]`; out-of-range
/// neighbours replicate the border pixel.
pub fn gradient_maps(image: &Image) -> GradientMaps {
    let (w, h) = (image.width(), image.height());
    let mut horizontal: [Vec<f64>; PLANES] = Default::default();
    let mut vertical: [Vec<f64>; PLANES] = Default::default();
    for p in 0..PLANES {
        let src = image.plane(p);
        let mut du = vec![0.0; w * h];
        let mut dv = vec![0.0; w * h];
        for r in 0..h {
            let up = r.saturating_sub(1);
            let down = (r + 1).min(h - 1);
            for c in 0..w {
                let left = c.saturating_sub(1);
                let right = (c + 1).min(w - 1);
                du[r * w + c] = (src[r * w + right] - src[r * w + left]).abs();
                dv[r * w + c] = (src[down * w + c] - src[up * w + c]).abs();
            }
        }
        horizontal[p] = du;
        vertical[p] = dv;
    }
    GradientMaps {
        horizontal,
        vertical,
    }
}
