//! Frame representation and the annular part descriptor.
//!
//! Every frame is held as three planes of `f64` intensities in `[0, 1]`.
//! From each plane we derive two gradient-magnitude planes, and all nine
//! planes get an integral image so that ring sums cost four lookups.

mod descriptor;
mod gradient;
mod integral;
pub mod naive;

use std::path::Path;

use thiserror::Error;

pub use descriptor::{extract_descriptor, extract_descriptor_into, likeliness, update_template, AnnulusGeometry, PartDescriptor};
pub use gradient::{gradient_maps, GradientMaps};
pub use integral::{build_integral, FrameIntegrals, IntegralImage, Rect, RectSum};

/// Number of colour planes in every [`Image`].
pub const PLANES: usize = 3;
/// Intensity, |horizontal gradient|, |vertical gradient|.
pub const CHANNELS_PER_PLANE: usize = 3;
/// Integral images per frame.
pub const FEATURE_CHANNELS: usize = PLANES * CHANNELS_PER_PLANE;

#[derive(Debug, Error)]
pub enum ImagingError {
    #[error("image has zero size ({width}x{height})")]
    ZeroSizeImage { width: usize, height: usize },
    #[error("plane {plane} has {len} values, expected {expected}")]
    PlaneSize { plane: usize, len: usize, expected: usize },
    #[error("non-finite or negative value in plane {plane} at index {index}")]
    InvalidValue { plane: usize, index: usize },
    #[error("annulus geometry invalid: {0}")]
    InvalidGeometry(String),
    #[error("center ({u}, {v}) lies outside the {width}x{height} image")]
    CenterOutsideImage { u: i64, v: i64, width: usize, height: usize },
    #[error("descriptor lengths differ ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("negative likeliness {0}")]
    NegativeLikeliness(f64),
    #[error("failed to decode {path}")]
    Decode {
        path: String,
        #[source]
        source: image::ImageError,
    },
}

/// Three-plane image, row-major, values non-negative and finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    planes: [Vec<f64>; PLANES],
}

impl Image {
    pub fn new(width: usize, height: usize, planes: [Vec<f64>; PLANES]) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 {
            return Err(ImagingError::ZeroSizeImage { width, height });
        }
        let expected = width * height;
        for (plane, values) in planes.iter().enumerate() {
            if values.len() != expected {
                return Err(ImagingError::PlaneSize {
                    plane,
                    len: values.len(),
                    expected,
                });
            }
            if let Some(index) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
                return Err(ImagingError::InvalidValue { plane, index });
            }
        }
        Ok(Self {
            width,
            height,
            planes,
        })
    }

    /// Image whose three planes share one grey plane.
    pub fn from_gray(width: usize, height: usize, gray: Vec<f64>) -> Result<Self, ImagingError> {
        Self::new(width, height, [gray.clone(), gray.clone(), gray])
    }

    /// Builds an image by evaluating `f(row, col) -> [r, g, b]`.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [f64; PLANES],
    ) -> Result<Self, ImagingError> {
        let mut planes: [Vec<f64>; PLANES] = Default::default();
        for p in planes.iter_mut() {
            p.reserve(width * height);
        }
        for r in 0..height {
            for c in 0..width {
                let px = f(r, c);
                for (plane, value) in planes.iter_mut().zip(px) {
                    plane.push(value);
                }
            }
        }
        Self::new(width, height, planes)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn plane(&self, p: usize) -> &[f64] {
        &self.planes[p]
    }

    pub fn planes(&self) -> &[Vec<f64>; PLANES] {
        &self.planes
    }

    pub fn get(&self, plane: usize, row: usize, col: usize) -> f64 {
        self.planes[plane][row * self.width + col]
    }

    pub fn contains(&self, u: i64, v: i64) -> bool {
        u >= 0 && v >= 0 && (u as usize) < self.width && (v as usize) < self.height
    }

    /// Converts a decoded image to RGB in `[0, 1]`; grey inputs are
    /// replicated into all three planes.
    pub fn from_dynamic(img: &image::DynamicImage) -> Self {
        use image::DynamicImage as D;
        let (width, height) = (img.width() as usize, img.height() as usize);
        let mut planes: [Vec<f64>; PLANES] = Default::default();
        match img {
            D::ImageLuma16(_) | D::ImageLumaA16(_) | D::ImageRgb16(_) | D::ImageRgba16(_) => {
                for px in img.to_rgb16().pixels() {
                    for (plane, value) in planes.iter_mut().zip(px.0) {
                        plane.push(f64::from(value) / 65535.0);
                    }
                }
            }
            D::ImageRgb32F(_) | D::ImageRgba32F(_) => {
                for px in img.to_rgb32f().pixels() {
                    for (plane, value) in planes.iter_mut().zip(px.0) {
                        plane.push(f64::from(value).clamp(0.0, 1.0));
                    }
                }
            }
            _ => {
                for px in img.to_rgb8().pixels() {
                    for (plane, value) in planes.iter_mut().zip(px.0) {
                        plane.push(f64::from(value) / 255.0);
                    }
                }
            }
        }
        Self {
            width,
            height,
            planes,
        }
    }

    pub fn load(path: &Path) -> Result<Self, ImagingError> {
        let decoded = image::open(path).map_err(|source| ImagingError::Decode {
            path: path.display().to_string(),
            source,
        })?;
        let img = Self::from_dynamic(&decoded);
        if img.width == 0 || img.height == 0 {
            return Err(ImagingError::ZeroSizeImage {
                width: img.width,
                height: img.height,
            });
        }
        Ok(img)
    }

    /// Quantizes to 8-bit RGB.
    pub fn to_rgb8(&self) -> image::RgbImage {
        image::RgbImage::from_fn(self.width as u32, self.height as u32, |x, y| {
            let i = y as usize * self.width + x as usize;
            image::Rgb(std::array::from_fn(|p| {
                (self.planes[p][i].clamp(0.0, 1.0) * 255.0).round() as u8
            }))
        })
    }
}
