use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Rec. 601 luma weights.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// Row-major, channel-interleaved intensity field with 1 or 3 channels.
///
/// Sample `(y, x, c)` lives at `(y * width + x) * channels + c`. Values are
/// nominally in `[0, 1]` but only finiteness is enforced; clamping is always
/// an explicit call to [`RasterImage::clamp01`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RasterImage<T> {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<T>,
}

impl<T: Real> RasterImage<T> {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::Format(format!(
                "expected 1 or 3 channels, got {channels}"
            )));
        }
        if height == 0 || width == 0 {
            return Err(Error::Size(format!("empty image {height}x{width}")));
        }
        if data.len() != height * width * channels {
            return Err(Error::Size(format!(
                "data length {} does not match {height}x{width}x{channels}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("non-finite sample at index {pos}")));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    /// Panics on zero dimensions or a channel count other than 1 or 3.
    pub fn filled(height: usize, width: usize, channels: usize, value: T) -> Self {
        Self::new(height, width, channels, vec![value; height * width * channels])
            .expect("valid dimensions")
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self::filled(height, width, channels, T::zero())
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> T,
    ) -> Self {
        let mut data = Vec::with_capacity(height * width * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(y, x, c));
                }
            }
        }
        Self::new(height, width, channels, data).expect("valid dimensions and finite samples")
    }

    /// Builds an image from per-channel planes of `height * width` samples.
    pub fn from_planes(height: usize, width: usize, planes: &[Vec<T>]) -> Result<Self> {
        let channels = planes.len();
        let n = height * width;
        if planes.iter().any(|p| p.len() != n) {
            return Err(Error::Size("plane length mismatch".into()));
        }
        let mut data = vec![T::zero(); n * channels];
        for (c, plane) in planes.iter().enumerate() {
            for (i, &v) in plane.iter().enumerate() {
                data[i * channels + c] = v;
            }
        }
        Self::new(height, width, channels, data)
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    /// Mutable samples; the length (and so the shape) cannot change.
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn index(&self, y: usize, x: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> T {
        self.data[self.index(y, x, c)]
    }

    #[inline]
    pub fn pixel(&self, y: usize, x: usize) -> &[T] {
        let i = self.index(y, x, 0);
        &self.data[i..i + self.channels]
    }

    pub fn same_spatial(&self, other: &Self) -> bool {
        self.height == other.height && self.width == other.width
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.dims() == other.dims()
    }

    /// Applies `f` sample-wise. The caller is responsible for keeping
    /// results finite.
    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..*self
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        if !self.same_shape(other) {
            return Err(Error::domain(format!(
                "shape mismatch {:?} vs {:?}",
                self.dims(),
                other.dims()
            )));
        }
        Ok(Self {
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            ..*self
        })
    }

    pub fn clamp01(&self) -> Self {
        self.map(|v| v.max(T::zero()).min(T::one()))
    }

    /// Extracts channel `c` as a single-channel image.
    pub fn channel(&self, c: usize) -> Self {
        assert!(c < self.channels, "channel {c} out of range");
        Self {
            height: self.height,
            width: self.width,
            channels: 1,
            data: self.data.iter().skip(c).step_by(self.channels).copied().collect(),
        }
    }

    pub fn planes(&self) -> Vec<Vec<T>> {
        (0..self.channels).map(|c| self.channel(c).data).collect()
    }

    /// Rec. 601 luminance; single-channel images are returned unchanged.
    pub fn luminance(&self) -> Self {
        if self.channels == 1 {
            return self.clone();
        }
        let [wr, wg, wb] = LUMA_WEIGHTS.map(T::lit);
        Self {
            height: self.height,
            width: self.width,
            channels: 1,
            data: self
                .data
                .chunks_exact(3)
                .map(|p| wr * p[0] + wg * p[1] + wb * p[2])
                .collect(),
        }
    }

    /// Replicates a single channel into three; 3-channel input is cloned.
    pub fn to_rgb(&self) -> Self {
        if self.channels == 3 {
            return self.clone();
        }
        Self {
            height: self.height,
            width: self.width,
            channels: 3,
            data: self.data.iter().flat_map(|&v| [v, v, v]).collect(),
        }
    }

    pub fn mean(&self) -> T {
        let s: f64 = self.data.iter().map(|v| v.as_f64()).sum();
        T::lit(s / self.data.len() as f64)
    }

    pub fn min_value(&self) -> T {
        self.data.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max_value(&self) -> T {
        self.data.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn crop(&self, y0: usize, x0: usize, height: usize, width: usize) -> Result<Self> {
        if y0 + height > self.height || x0 + width > self.width || height == 0 || width == 0 {
            return Err(Error::Size(format!(
                "crop {height}x{width}+{y0}+{x0} outside {}x{}",
                self.height, self.width
            )));
        }
        let c = self.channels;
        let mut data = Vec::with_capacity(height * width * c);
        for y in y0..y0 + height {
            let start = self.index(y, x0, 0);
            data.extend_from_slice(&self.data[start..start + width * c]);
        }
        Ok(Self {
            height,
            width,
            channels: c,
            data,
        })
    }

    /// Central crop keeping `fraction` of each spatial dimension.
    pub fn interior(&self, fraction: f64) -> Result<Self> {
        let h = ((self.height as f64 * fraction).round() as usize).max(1);
        let w = ((self.width as f64 * fraction).round() as usize).max(1);
        self.crop((self.height - h) / 2, (self.width - w) / 2, h, w)
    }

    pub fn cast<U: Real>(&self) -> RasterImage<U> {
        RasterImage {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: self.data.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }
}
