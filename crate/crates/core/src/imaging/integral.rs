use super::{gradient_maps, Image, ImagingError, CHANNELS_PER_PLANE, FEATURE_CHANNELS, PLANES};

/// Summed-area table with a zero first row and column.
///
/// `at(x, y)` is the sum of the source over rows `0..x` and columns `0..y`,
/// so the table is `(height + 1) x (width + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralImage {
    width: usize,
    height: usize,
    table: Vec<f64>,
}

/// Inclusive pixel rectangle. Coordinates may extend past the image and are
/// clipped when summed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub top: i64,
    pub left: i64,
    pub bottom: i64,
    pub right: i64,
}

/// Rectangle sum together with the clipped pixel count it covers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectSum {
    pub sum: f64,
    pub area: usize,
}

impl Rect {
    pub const fn new(top: i64, left: i64, bottom: i64, right: i64) -> Self {
        Self {
            top,
            left,
            bottom,
            right,
        }
    }

    /// Rectangle spanning `center ± (half_width, half_height)`.
    pub fn centered(u: i64, v: i64, half_width: i64, half_height: i64) -> Self {
        Self::new(v - half_height, u - half_width, v + half_height, u + half_width)
    }

    /// Intersection with `[0, width) x [0, height)`, or `None` when empty.
    pub fn clip(&self, width: usize, height: usize) -> Option<Rect> {
        let top = self.top.max(0);
        let left = self.left.max(0);
        let bottom = self.bottom.min(height as i64 - 1);
        let right = self.right.min(width as i64 - 1);
        (top <= bottom && left <= right).then_some(Rect::new(top, left, bottom, right))
    }

    pub fn area(&self) -> usize {
        if self.bottom < self.top || self.right < self.left {
            0
        } else {
            ((self.bottom - self.top + 1) * (self.right - self.left + 1)) as usize
        }
    }
}

impl IntegralImage {
    /// Single pass using the running row sum `S` and the recurrence
    /// `Ī(x, y) = Ī(x - 1, y) + S(x, y)`.
    pub fn new(plane: &[f64], width: usize, height: usize) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 {
            return Err(ImagingError::ZeroSizeImage { width, height });
        }
        if plane.len() != width * height {
            return Err(ImagingError::PlaneSize {
                plane: 0,
                len: plane.len(),
                expected: width * height,
            });
        }
        let stride = width + 1;
        let mut table = vec![0.0; stride * (height + 1)];
        for x in 1..=height {
            let row = &plane[(x - 1) * width..x * width];
            let mut running = 0.0;
            for y in 1..=width {
                running += row[y - 1];
                table[x * stride + y] = table[(x - 1) * stride + y] + running;
            }
        }
        Ok(Self {
            width,
            height,
            table,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Sum over the first `x` rows and first `y` columns.
    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.table[x * (self.width + 1) + y]
    }

    /// Sum over an already-clipped rectangle: `Ī(D) + Ī(A) - Ī(B) - Ī(C)`.
    #[inline]
    pub fn sum_clipped(&self, r: &Rect) -> f64 {
        let (t, l) = (r.top as usize, r.left as usize);
        let (b, rt) = (r.bottom as usize + 1, r.right as usize + 1);
        self.at(b, rt) + self.at(t, l) - self.at(t, rt) - self.at(b, l)
    }

    /// Clips `rect` to the image and sums it. Empty rectangles give zero.
    pub fn rect_sum(&self, rect: &Rect) -> RectSum {
        match rect.clip(self.width, self.height) {
            Some(r) => RectSum {
                sum: self.sum_clipped(&r),
                area: r.area(),
            },
            None => RectSum { sum: 0.0, area: 0 },
        }
    }
}

/// The nine integral images of a frame, indexed `plane * 3 + channel` with
/// channel 0 intensity, 1 |∂u|, 2 |∂v|.
#[derive(Debug, Clone)]
pub struct FrameIntegrals {
    width: usize,
    height: usize,
    channels: Vec<IntegralImage>,
}

impl FrameIntegrals {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channel(&self, plane: usize, channel: usize) -> &IntegralImage {
        &self.channels[plane * CHANNELS_PER_PLANE + channel]
    }

    pub fn channels(&self) -> &[IntegralImage] {
        &self.channels
    }

    pub fn contains(&self, u: i64, v: i64) -> bool {
        u >= 0 && v >= 0 && (u as usize) < self.width && (v as usize) < self.height
    }
}

pub fn build_integral(image: &Image) -> Result<FrameIntegrals, ImagingError> {
    let (w, h) = (image.width(), image.height());
    if w == 0 || h == 0 {
        return Err(ImagingError::ZeroSizeImage { width: w, height: h });
    }
    let grads = gradient_maps(image);
    let mut channels = Vec::with_capacity(FEATURE_CHANNELS);
    for p in 0..PLANES {
        channels.push(IntegralImage::new(image.plane(p), w, h)?);
        channels.push(IntegralImage::new(&grads.horizontal[p], w, h)?);
        channels.push(IntegralImage::new(&grads.vertical[p], w, h)?);
    }
    Ok(FrameIntegrals {
        width: w,
        height: h,
        channels,
    })
}
