//! Feature maps and the small set of layer primitives the toy network uses.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::RasterImage;
use crate::scalar::Real;

/// Dense tensor with a row-major shape, as stored in a weight archive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor<T> {
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Size(format!("tensor shape {shape:?} needs {n} values, got {}", data.len())));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![T::zero(); n],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|v| *v == T::zero())
    }

    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }

    fn expect_shape(&self, what: &str, shape: &[usize]) -> Result<()> {
        if self.shape != shape {
            return Err(Error::Size(format!("{what}: expected shape {shape:?}, got {:?}", self.shape)));
        }
        Ok(())
    }
}

/// `height × width × channels` activations, channel-interleaved. `level`
/// is the number of 2× reductions applied relative to the input image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap<T> {
    pub level: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<T>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl<T: Real> FeatureMap<T> {
    pub fn new(level: usize, height: usize, width: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        if height * width * channels != data.len() || height == 0 || width == 0 || channels == 0 {
            return Err(Error::Size(format!(
                "feature map {height}x{width}x{channels} cannot hold {} values",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("feature map contains non-finite values"));
        }
        Ok(Self {
            level,
            height,
            width,
            channels,
            data,
        })
    }

    pub fn zeros(level: usize, height: usize, width: usize, channels: usize) -> Self {
        Self {
            level,
            height,
            width,
            channels,
            data: vec![T::zero(); height * width * channels],
        }
    }

    /// Level-0 map from an image; single-channel images are replicated to RGB.
    pub fn from_image(img: &RasterImage<T>) -> Self {
        let rgb = img.to_rgb();
        Self {
            level: 0,
            height: rgb.height(),
            width: rgb.width(),
            channels: 3,
            data: rgb.into_data(),
        }
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize, c: usize) -> T {
        self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        (self.height, self.width, self.channels) == (other.height, other.width, other.channels)
    }

    pub fn with_level(mut self, level: usize) -> Self {
        self.level = level;
        self
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        if !self.same_shape(other) {
            return Err(Error::domain(format!(
                "feature shapes differ: {}x{}x{} vs {}x{}x{}",
                self.height, self.width, self.channels, other.height, other.width, other.channels
            )));
        }
        Ok(Self {
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
            ..self.clone()
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn stats(&self) -> FeatureStats {
        let n = self.data.len() as f64;
        let mean = self.data.iter().map(|v| v.as_f64()).sum::<f64>() / n;
        let var = self.data.iter().map(|v| (v.as_f64() - mean).powi(2)).sum::<f64>() / n;
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in &self.data {
            min = min.min(v.as_f64());
            max = max.max(v.as_f64());
        }
        FeatureStats {
            mean,
            std: var.sqrt(),
            min,
            max,
        }
    }
}

/// Square-kernel convolution (cross-correlation, as in CNN layers) with
/// zero padding `k/2`. Weight shape `[out, in, k, k]`; output size is
/// `ceil(h / stride) × ceil(w / stride)`.
pub fn conv2d<T: Real>(
    x: &FeatureMap<T>,
    weight: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    stride: usize,
) -> Result<FeatureMap<T>> {
    let [co, ci, k, k2] = weight.shape[..] else {
        return Err(Error::Size(format!("conv weight must be 4-D, got {:?}", weight.shape)));
    };
    if k != k2 || k % 2 == 0 {
        return Err(Error::Size(format!("conv kernel must be square and odd, got {k}x{k2}")));
    }
    if ci != x.channels {
        return Err(Error::Size(format!("conv expects {ci} input channels, got {}", x.channels)));
    }
    if let Some(b) = bias {
        b.expect_shape("conv bias", &[co])?;
    }
    let stride = stride.max(1);
    let (h, w) = (x.height, x.width);
    let (oh, ow) = (h.div_ceil(stride), w.div_ceil(stride));
    let pad = (k / 2) as isize;
    let patch_len = ci * k * k;
    let mut out = vec![T::zero(); oh * ow * co];
    out.par_chunks_mut(ow * co).enumerate().for_each(|(oy, row)| {
        let mut patch = vec![T::zero(); patch_len];
        for ox in 0..ow {
            // gather the zero-padded receptive field in [in][ky][kx] order
            for ky in 0..k {
                let yy = (oy * stride) as isize + ky as isize - pad;
                for kx in 0..k {
                    let xx = (ox * stride) as isize + kx as isize - pad;
                    let inside = yy >= 0 && xx >= 0 && (yy as usize) < h && (xx as usize) < w;
                    for c in 0..ci {
                        patch[(c * k + ky) * k + kx] = if inside {
                            x.data[((yy as usize) * w + xx as usize) * ci + c]
                        } else {
                            T::zero()
                        };
                    }
                }
            }
            for o in 0..co {
                let wrow = &weight.data[o * patch_len..(o + 1) * patch_len];
                let mut acc = bias.map_or(T::zero(), |b| b.data[o]);
                for (a, b) in wrow.iter().zip(&patch) {
                    acc += *a * *b;
                }
                row[ox * co + o] = acc;
            }
        }
    });
    FeatureMap::new(x.level + stride.trailing_zeros() as usize, oh, ow, co, out)
}

/// Per-channel 3×3 convolution, weight shape `[c, 1, 3, 3]`.
pub fn depthwise3x3<T: Real>(x: &FeatureMap<T>, weight: &Tensor<T>, bias: &Tensor<T>) -> Result<FeatureMap<T>> {
    let c = x.channels;
    weight.expect_shape("depthwise weight", &[c, 1, 3, 3])?;
    bias.expect_shape("depthwise bias", &[c])?;
    let (h, w) = (x.height, x.width);
    let mut out = vec![T::zero(); h * w * c];
    for y in 0..h {
        for xx in 0..w {
            for ch in 0..c {
                let mut acc = bias.data[ch];
                for ky in 0..3 {
                    let yy = y as isize + ky as isize - 1;
                    if yy < 0 || yy as usize >= h {
                        continue;
                    }
                    for kx in 0..3 {
                        let xs = xx as isize + kx as isize - 1;
                        if xs < 0 || xs as usize >= w {
                            continue;
                        }
                        acc += weight.data[ch * 9 + ky * 3 + kx] * x.at(yy as usize, xs as usize, ch);
                    }
                }
                out[(y * w + xx) * c + ch] = acc;
            }
        }
    }
    FeatureMap::new(x.level, h, w, c, out)
}

pub const GN_EPS: f64 = 1e-5;

/// Group normalization with per-channel affine `gamma`, `beta`.
pub fn group_norm<T: Real>(
    x: &FeatureMap<T>,
    groups: usize,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
) -> Result<FeatureMap<T>> {
    let c = x.channels;
    if groups == 0 || c % groups != 0 {
        return Err(Error::config(format!("{c} channels cannot be split into {groups} groups")));
    }
    gamma.expect_shape("group norm gamma", &[c])?;
    beta.expect_shape("group norm beta", &[c])?;
    let per = c / groups;
    let n = (x.height * x.width * per) as f64;
    let mut out = x.data.clone();
    for g in 0..groups {
        let chans = g * per..(g + 1) * per;
        let (mut s, mut s2) = (0.0f64, 0.0f64);
        for px in x.data.chunks_exact(c) {
            for v in &px[chans.clone()] {
                let v = v.as_f64();
                s += v;
                s2 += v * v;
            }
        }
        let mean = s / n;
        let var = (s2 / n - mean * mean).max(0.0);
        let inv = 1.0 / (var + GN_EPS).sqrt();
        for px in out.chunks_exact_mut(c) {
            for ch in chans.clone() {
                let z = (px[ch].as_f64() - mean) * inv;
                px[ch] = T::lit(z) * gamma.data[ch] + beta.data[ch];
            }
        }
    }
    FeatureMap::new(x.level, x.height, x.width, c, out)
}

pub fn silu<T: Real>(x: &FeatureMap<T>) -> FeatureMap<T> {
    x.map(|v| v / (T::one() + (-v).exp()))
}

/// Splits channels in half and multiplies the halves.
pub fn simple_gate<T: Real>(x: &FeatureMap<T>) -> Result<FeatureMap<T>> {
    if x.channels % 2 != 0 {
        return Err(Error::Size(format!("gate needs an even channel count, got {}", x.channels)));
    }
    let half = x.channels / 2;
    let data = x
        .data
        .chunks_exact(x.channels)
        .flat_map(|px| (0..half).map(move |c| px[c] * px[c + half]))
        .collect();
    FeatureMap::new(x.level, x.height, x.width, half, data)
}

/// Per-channel spatial mean, length `channels`.
pub fn spatial_mean<T: Real>(x: &FeatureMap<T>) -> Vec<T> {
    let mut acc = vec![0.0f64; x.channels];
    for px in x.data.chunks_exact(x.channels) {
        for (a, v) in acc.iter_mut().zip(px) {
            *a += v.as_f64();
        }
    }
    let n = (x.height * x.width) as f64;
    acc.into_iter().map(|a| T::lit(a / n)).collect()
}

/// Per-pixel channel mean, length `height × width`.
pub fn channel_mean<T: Real>(x: &FeatureMap<T>) -> Vec<T> {
    let inv = T::one() / T::lit(x.channels as f64);
    x.data.chunks_exact(x.channels).map(|px| px.iter().copied().sum::<T>() * inv).collect()
}

/// `y = W·v + b` with `W` of shape `[out, in]`.
pub fn affine<T: Real>(weight: &Tensor<T>, v: &[T], bias: Option<&Tensor<T>>) -> Result<Vec<T>> {
    let [o, i] = weight.shape[..] else {
        return Err(Error::Size(format!("affine weight must be 2-D, got {:?}", weight.shape)));
    };
    if v.len() != i {
        return Err(Error::Size(format!("affine expects {i} inputs, got {}", v.len())));
    }
    if let Some(b) = bias {
        b.expect_shape("affine bias", &[o])?;
    }
    Ok((0..o)
        .map(|r| {
            let mut acc = bias.map_or(T::zero(), |b| b.data[r]);
            for (a, b) in weight.data[r * i..(r + 1) * i].iter().zip(v) {
                acc += *a * *b;
            }
            acc
        })
        .collect())
}

/// Simplified channel attention: `x ⊙ (W · mean_hw(x) + b)`.
pub fn channel_attention<T: Real>(x: &FeatureMap<T>, weight: &Tensor<T>, bias: &Tensor<T>) -> Result<FeatureMap<T>> {
    weight.expect_shape("attention weight", &[x.channels, x.channels])?;
    let scale = affine(weight, &spatial_mean(x), Some(bias))?;
    Ok(scale_channels(x, &scale))
}

pub fn scale_channels<T: Real>(x: &FeatureMap<T>, scale: &[T]) -> FeatureMap<T> {
    let mut out = x.clone();
    for px in out.data.chunks_exact_mut(x.channels) {
        for (v, s) in px.iter_mut().zip(scale) {
            *v *= *s;
        }
    }
    out
}

pub fn add_channel_bias<T: Real>(x: &FeatureMap<T>, bias: &[T]) -> FeatureMap<T> {
    let mut out = x.clone();
    for px in out.data.chunks_exact_mut(x.channels) {
        for (v, b) in px.iter_mut().zip(bias) {
            *v += *b;
        }
    }
    out
}

/// 2×2 average pooling; odd extents replicate their last row/column.
pub fn pool2<T: Real>(x: &FeatureMap<T>) -> FeatureMap<T> {
    let (h, w, c) = (x.height, x.width, x.channels);
    let (oh, ow) = (h.div_ceil(2), w.div_ceil(2));
    let quarter = T::lit(0.25);
    let mut data = Vec::with_capacity(oh * ow * c);
    for y in 0..oh {
        let (y0, y1) = (2 * y, (2 * y + 1).min(h - 1));
        for xx in 0..ow {
            let (x0, x1) = (2 * xx, (2 * xx + 1).min(w - 1));
            for ch in 0..c {
                data.push((x.at(y0, x0, ch) + x.at(y0, x1, ch) + x.at(y1, x0, ch) + x.at(y1, x1, ch)) * quarter);
            }
        }
    }
    FeatureMap {
        level: x.level + 1,
        height: oh,
        width: ow,
        channels: c,
        data,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fm(h: usize, w: usize, c: usize, f: impl Fn(usize, usize, usize) -> f64) -> FeatureMap<f64> {
        let mut data = Vec::new();
        for y in 0..h {
            for x in 0..w {
                for ch in 0..c {
                    data.push(f(y, x, ch));
                }
            }
        }
        FeatureMap::new(0, h, w, c, data).unwrap()
    }

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64 / (1u64 << 53) as f64) - 0.5
    }

    #[test]
    fn conv_matches_naive_loop() {
        let mut s = 7u64;
        let vals: Vec<f64> = (0..60).map(|_| lcg(&mut s)).collect();
        let x = FeatureMap::new(0, 5, 6, 2, vals).unwrap();
        let w = Tensor::new(vec![3, 2, 3, 3], (0..54).map(|_| lcg(&mut s)).collect()).unwrap();
        let b = Tensor::new(vec![3], vec![0.1, -0.2, 0.3]).unwrap();
        for stride in [1, 2] {
            let out = conv2d(&x, &w, Some(&b), stride).unwrap();
            assert_eq!((out.height, out.width, out.channels), (5usize.div_ceil(stride), 6usize.div_ceil(stride), 3));
            for oy in 0..out.height {
                for ox in 0..out.width {
                    for o in 0..3 {
                        let mut acc = b.data[o];
                        for c in 0..2 {
                            for ky in 0..3 {
                                for kx in 0..3 {
                                    let yy = (oy * stride + ky) as isize - 1;
                                    let xx = (ox * stride + kx) as isize - 1;
                                    if yy < 0 || xx < 0 || yy >= 5 || xx >= 6 {
                                        continue;
                                    }
                                    acc += w.data[((o * 2 + c) * 3 + ky) * 3 + kx] * x.at(yy as usize, xx as usize, c);
                                }
                            }
                        }
                        assert!((acc - out.at(oy, ox, o)).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn group_norm_normalizes_each_group() {
        let x = fm(4, 4, 4, |y, x, c| (y * 4 + x) as f64 * (c + 1) as f64);
        let ones = Tensor::new(vec![4], vec![1.0; 4]).unwrap();
        let zeros = Tensor::zeros(vec![4]);
        let out = group_norm(&x, 2, &ones, &zeros).unwrap();
        for g in 0..2 {
            let vals: Vec<f64> = out.data.chunks(4).flat_map(|p| p[g * 2..g * 2 + 2].to_vec()).collect();
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            let v = vals.iter().map(|a| (a - m).powi(2)).sum::<f64>() / vals.len() as f64;
            assert!(m.abs() < 1e-12);
            assert!((v - 1.0).abs() < 1e-3);
        }
        assert!(group_norm(&x, 3, &ones, &zeros).is_err());
    }

    #[test]
    fn gate_pool_and_means() {
        let x = fm(3, 3, 4, |y, x, c| (y + x + c) as f64);
        let g = simple_gate(&x).unwrap();
        assert_eq!(g.channels, 2);
        assert_eq!(g.at(1, 1, 0), 2.0 * 4.0);
        let p = pool2(&x);
        assert_eq!((p.height, p.width, p.level), (2, 2, 1));
        assert_eq!(p.at(1, 1, 0), 4.0);
        assert_eq!(spatial_mean(&x), vec![2.0, 3.0, 4.0, 5.0]);
        assert_eq!(channel_mean(&x)[0], 1.5);
        assert_eq!(silu(&x).at(0, 0, 0), 0.0);
    }
}
