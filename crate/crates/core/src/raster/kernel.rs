use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Tolerance used by [`Kernel2D::is_normalized`].
pub const NORMALIZED_TOL: f64 = 1e-6;

/// Odd-sized 2-D filter stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Kernel2D<T> {
    height: usize,
    width: usize,
    taps: Vec<T>,
}

impl<T: Real> Kernel2D<T> {
    pub fn new(height: usize, width: usize, taps: Vec<T>) -> Result<Self> {
        if height % 2 == 0 || width % 2 == 0 {
            return Err(Error::Size(format!(
                "kernel dimensions must be odd, got {height}x{width}"
            )));
        }
        if taps.len() != height * width {
            return Err(Error::Size(format!(
                "kernel has {} taps, expected {}",
                taps.len(),
                height * width
            )));
        }
        if taps.iter().any(|t| !t.is_finite()) {
            return Err(Error::domain("non-finite kernel tap"));
        }
        Ok(Self {
            height,
            width,
            taps,
        })
    }

    pub fn identity() -> Self {
        Self {
            height: 1,
            width: 1,
            taps: vec![T::one()],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        let mut taps = Vec::with_capacity(height * width);
        for i in 0..height {
            for j in 0..width {
                taps.push(f(i, j));
            }
        }
        Self::new(height, width, taps)
    }

    /// Normalized `(2r+1)²` box.
    pub fn box_filter(radius: usize) -> Self {
        let side = 2 * radius + 1;
        let w = T::one() / T::lit((side * side) as f64);
        Self {
            height: side,
            width: side,
            taps: vec![w; side * side],
        }
    }

    /// Normalized isotropic Gaussian truncated at `ceil(3σ)`.
    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::domain(format!("gaussian sigma must be > 0, got {sigma}")));
        }
        let r = (3.0 * sigma).ceil() as usize;
        Self::gaussian_with_radius(sigma, r)
    }

    pub fn gaussian_with_radius(sigma: f64, radius: usize) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::domain(format!("gaussian sigma must be > 0, got {sigma}")));
        }
        let side = 2 * radius + 1;
        let r = radius as f64;
        let raw: Vec<f64> = (0..side * side)
            .map(|k| {
                let dy = (k / side) as f64 - r;
                let dx = (k % side) as f64 - r;
                (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp()
            })
            .collect();
        Self::from_f64_normalized(side, side, raw)
    }

    /// Linear motion blur of `length` pixels at `angle_deg` (counter-clockwise
    /// from the x axis), rasterised by bilinear splatting of sub-pixel samples.
    pub fn motion(length: usize, angle_deg: f64) -> Result<Self> {
        if length == 0 {
            return Err(Error::domain("motion length must be >= 1"));
        }
        let side = if length % 2 == 1 { length } else { length + 1 };
        let c = (side / 2) as f64;
        let (s, co) = angle_deg.to_radians().sin_cos();
        let half = (length as f64 - 1.0) / 2.0;
        let steps = (length * 8).max(1);
        let mut raw = vec![0.0f64; side * side];
        for k in 0..=steps {
            let t = if steps == 0 { 0.0 } else { -half + 2.0 * half * k as f64 / steps as f64 };
            let x = c + t * co;
            let y = c - t * s;
            let (x0, y0) = (x.floor(), y.floor());
            let (fx, fy) = (x - x0, y - y0);
            for (dy, wy) in [(0.0, 1.0 - fy), (1.0, fy)] {
                for (dx, wx) in [(0.0, 1.0 - fx), (1.0, fx)] {
                    let (yy, xx) = (y0 + dy, x0 + dx);
                    if yy >= 0.0 && xx >= 0.0 && (yy as usize) < side && (xx as usize) < side {
                        raw[yy as usize * side + xx as usize] += wy * wx;
                    }
                }
            }
        }
        Self::from_f64_normalized(side, side, raw)
    }

    fn from_f64_normalized(height: usize, width: usize, raw: Vec<f64>) -> Result<Self> {
        let sum: f64 = raw.iter().sum();
        if sum <= 0.0 {
            return Err(Error::domain("kernel has zero mass"));
        }
        Self::new(height, width, raw.into_iter().map(|v| T::lit(v / sum)).collect())
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
    pub fn radius_y(&self) -> usize {
        self.height / 2
    }

    #[inline]
    pub fn radius_x(&self) -> usize {
        self.width / 2
    }

    #[inline]
    pub fn taps(&self) -> &[T] {
        &self.taps
    }

    #[inline]
    pub fn tap(&self, i: usize, j: usize) -> T {
        self.taps[i * self.width + j]
    }

    pub fn area(&self) -> usize {
        self.taps.len()
    }

    pub fn sum(&self) -> f64 {
        self.taps.iter().map(|t| t.as_f64()).sum()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.taps.iter().all(|&t| t >= T::zero())
    }

    /// Non-negative taps summing to one within [`NORMALIZED_TOL`].
    pub fn is_normalized(&self) -> bool {
        self.is_nonnegative() && (self.sum() - 1.0).abs() <= NORMALIZED_TOL
    }

    pub fn normalized(&self) -> Result<Self> {
        let s = self.sum();
        if s == 0.0 {
            return Err(Error::domain("cannot normalize a zero-sum kernel"));
        }
        Self::new(
            self.height,
            self.width,
            self.taps.iter().map(|&t| T::lit(t.as_f64() / s)).collect(),
        )
    }

    pub fn cast<U: Real>(&self) -> Kernel2D<U> {
        Kernel2D {
            height: self.height,
            width: self.width,
            taps: self.taps.iter().map(|t| U::lit(t.as_f64())).collect(),
        }
    }
}
