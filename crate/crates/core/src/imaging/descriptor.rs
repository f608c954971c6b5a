use serde::{Deserialize, Serialize};

use super::{FrameIntegrals, ImagingError, Rect, CHANNELS_PER_PLANE, FEATURE_CHANNELS, PLANES};

/// Concentric rectangles `R_1 ⊂ … ⊂ R_m` around a part centre, given as
/// half-extents in pixels. Ring `i` is `R_i \ R_{i-1}` with `R_0` empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnulusGeometry {
    pub half_widths: Vec<u32>,
    pub half_heights: Vec<u32>,
}

impl AnnulusGeometry {
    pub fn new(half_widths: Vec<u32>, half_heights: Vec<u32>) -> Result<Self, ImagingError> {
        let g = Self {
            half_widths,
            half_heights,
        };
        g.validate()?;
        Ok(g)
    }

    /// `rings` square rings, ring `i` (1-based) with half-extent `i * stride`.
    pub fn square(rings: usize, stride: u32) -> Result<Self, ImagingError> {
        let ext: Vec<u32> = (1..=rings as u32).map(|i| i * stride).collect();
        Self::new(ext.clone(), ext)
    }

    pub fn validate(&self) -> Result<(), ImagingError> {
        let bad = |msg: &str| Err(ImagingError::InvalidGeometry(msg.to_string()));
        if self.half_widths.is_empty() {
            return bad("at least one ring is required");
        }
        if self.half_widths.len() != self.half_heights.len() {
            return bad("half_widths and half_heights differ in length");
        }
        let ascending = |v: &[u32]| v.windows(2).all(|w| w[0] < w[1]);
        if !ascending(&self.half_widths) || !ascending(&self.half_heights) {
            return bad("ring extents must be strictly ascending");
        }
        Ok(())
    }

    /// Ring count `m`.
    pub fn rings(&self) -> usize {
        self.half_widths.len()
    }

    /// Length of a descriptor built with this geometry (`9m`).
    pub fn descriptor_len(&self) -> usize {
        FEATURE_CHANNELS * self.rings()
    }

    /// Rectangle `R_i` (0-based ring index) around `(u, v)`.
    pub fn rect(&self, ring: usize, u: i64, v: i64) -> Rect {
        Rect::centered(
            u,
            v,
            i64::from(self.half_widths[ring]),
            i64::from(self.half_heights[ring]),
        )
    }

    /// Largest half-extent over both axes.
    pub fn reach(&self) -> u32 {
        let w = self.half_widths.last().copied().unwrap_or(0);
        let h = self.half_heights.last().copied().unwrap_or(0);
        w.max(h)
    }
}

impl Default for AnnulusGeometry {
    fn default() -> Self {
        Self::square(10, 2).expect("default geometry is valid")
    }
}

/// Area-normalized ring sums, laid out as
/// `[plane][intensity, |∂u|, |∂v|][ring]`. Also used as a part template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PartDescriptor(pub Vec<f64>);

impl PartDescriptor {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn index(rings: usize, plane: usize, channel: usize, ring: usize) -> usize {
        (plane * CHANNELS_PER_PLANE + channel) * rings + ring
    }
}

/// Descriptor at integer pixel centre `(u, v)`.
///
/// Rings that run past the border are clipped and normalized by their clipped
/// area; a ring clipped to nothing contributes 0.
pub fn extract_descriptor(
    integrals: &FrameIntegrals,
    u: i64,
    v: i64,
    geometry: &AnnulusGeometry,
) -> Result<PartDescriptor, ImagingError> {
    geometry.validate()?;
    if !integrals.contains(u, v) {
        return Err(ImagingError::CenterOutsideImage {
            u,
            v,
            width: integrals.width(),
            height: integrals.height(),
        });
    }
    let mut out = vec![0.0; geometry.descriptor_len()];
    extract_descriptor_into(integrals, u, v, geometry, &mut out);
    Ok(PartDescriptor(out))
}

/// Allocation-free variant of [`extract_descriptor`] for scanning many
/// candidates. Skips geometry and centre checks.
///
/// Panics if `out.len()` is not `geometry.descriptor_len()`.
pub fn extract_descriptor_into(
    integrals: &FrameIntegrals,
    u: i64,
    v: i64,
    geometry: &AnnulusGeometry,
    out: &mut [f64],
) {
    assert_eq!(out.len(), geometry.descriptor_len(), "descriptor buffer length");
    let (w, h) = (integrals.width(), integrals.height());
    let m = geometry.rings();
    // The clipped rectangles are shared by all nine channels.
    let clipped: Vec<Option<Rect>> = (0..m).map(|i| geometry.rect(i, u, v).clip(w, h)).collect();
    let areas: Vec<usize> = clipped.iter().map(|r| r.map_or(0, |r| r.area())).collect();
    for (ch, ii) in integrals.channels().iter().enumerate() {
        let base = ch * m;
        let mut inner_sum = 0.0;
        let mut inner_area = 0usize;
        for i in 0..m {
            let outer_sum = clipped[i].map_or(0.0, |r| ii.sum_clipped(&r));
            let ring_area = areas[i] - inner_area;
            out[base + i] = if ring_area == 0 {
                0.0
            } else {
                // Cancellation can leave a tiny negative residue.
                ((outer_sum - inner_sum) / ring_area as f64).max(0.0)
            };
            inner_sum = outer_sum;
            inner_area = areas[i];
        }
    }
    debug_assert_eq!(integrals.channels().len(), PLANES * CHANNELS_PER_PLANE);
}

/// Euclidean distance between a candidate descriptor and a template.
pub fn likeliness(feature: &PartDescriptor, template: &PartDescriptor) -> Result<f64, ImagingError> {
    if feature.len() != template.len() {
        return Err(ImagingError::LengthMismatch {
            left: feature.len(),
            right: template.len(),
        });
    }
    Ok(feature
        .0
        .iter()
        .zip(&template.0)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

/// `α·feature + (1 − α)·template` with `α = exp(−l)`.
pub fn update_template(
    template: &PartDescriptor,
    feature: &PartDescriptor,
    l: f64,
) -> Result<PartDescriptor, ImagingError> {
    if feature.len() != template.len() {
        return Err(ImagingError::LengthMismatch {
            left: template.len(),
            right: feature.len(),
        });
    }
    if l.is_nan() || l < 0.0 {
        return Err(ImagingError::NegativeLikeliness(l));
    }
    let alpha = (-l).exp();
    Ok(PartDescriptor(
        template
            .0
            .iter()
            .zip(&feature.0)
            .map(|(t, f)| alpha * f + (1.0 - alpha) * t)
            .collect(),
    ))
}
