//! Chromaticity map and contrast-limited adaptive histogram equalization.

use crate::error::{Error, Result};
use crate::raster::RasterImage;
use crate::scalar::Real;

/// `3·I_c / (Σ_c I_c + eps)` clamped to `[0, 3]`.
pub fn color_map_raw<T: Real>(img: &RasterImage<T>, eps: f64) -> Result<RasterImage<T>> {
    if img.channels() != 3 {
        return Err(Error::domain("color map needs a 3-channel image"));
    }
    if !(eps >= 0.0) {
        return Err(Error::domain("color map eps must be >= 0"));
    }
    let (three, e) = (T::lit(3.0), T::lit(eps));
    let mut data = Vec::with_capacity(img.data().len());
    for p in img.data().chunks_exact(3) {
        let denom = p[0] + p[1] + p[2] + e;
        for &v in p {
            let m = if denom > T::zero() { three * v / denom } else { T::zero() };
            data.push(m.max(T::zero()).min(three));
        }
    }
    RasterImage::new(img.height(), img.width(), 3, data)
}

/// [`color_map_raw`] divided by 3 so the map lives in `[0, 1]`.
pub fn color_map<T: Real>(img: &RasterImage<T>, eps: f64) -> Result<RasterImage<T>> {
    let third = T::one() / T::lit(3.0);
    Ok(color_map_raw(img, eps)?.map(|v| v * third))
}

/// Number of histogram bins used for equalization.
pub const CLAHE_BINS: usize = 256;

/// Piecewise-linear clipped CDF of one region.
struct ToneCurve {
    /// `cum[k]` = normalized mass below bin `k`; `cum[bins]` = 1.
    cum: Vec<f64>,
    identity: bool,
}

impl ToneCurve {
    fn build(values: impl Iterator<Item = f64>, clip_limit: f64) -> Self {
        let mut hist = vec![0.0f64; CLAHE_BINS];
        let mut n = 0usize;
        for v in values {
            hist[bin_of(v)] += 1.0;
            n += 1;
        }
        // no contrast to redistribute
        if hist.iter().filter(|&&c| c > 0.0).count() <= 1 {
            return Self {
                cum: Vec::new(),
                identity: true,
            };
        }
        let clip = clip_limit * n as f64 / CLAHE_BINS as f64;
        let mut excess = 0.0;
        for c in hist.iter_mut() {
            if *c > clip {
                excess += *c - clip;
                *c = clip;
            }
        }
        let share = excess / CLAHE_BINS as f64;
        let mut cum = Vec::with_capacity(CLAHE_BINS + 1);
        let mut acc = 0.0;
        cum.push(0.0);
        for c in &hist {
            acc += c + share;
            cum.push(acc / n as f64);
        }
        Self {
            cum,
            identity: false,
        }
    }

    fn apply(&self, v: f64) -> f64 {
        if self.identity {
            return v;
        }
        let v = v.clamp(0.0, 1.0);
        let pos = v * CLAHE_BINS as f64;
        let b = (pos.floor() as usize).min(CLAHE_BINS - 1);
        let frac = pos - b as f64;
        self.cum[b] + (self.cum[b + 1] - self.cum[b]) * frac
    }
}

#[inline]
fn bin_of(v: f64) -> usize {
    ((v.clamp(0.0, 1.0) * CLAHE_BINS as f64).floor() as usize).min(CLAHE_BINS - 1)
}

/// Replaces luminance `Y` by `Y'` and rescales colour channels by `Y'/Y`
/// (pure gray `Y'` where `Y = 0`).
fn remap_luminance<T: Real>(img: &RasterImage<T>, y_old: &[f64], y_new: &[f64]) -> Result<RasterImage<T>> {
    let c = img.channels();
    let mut data = Vec::with_capacity(img.data().len());
    for (i, p) in img.data().chunks_exact(c).enumerate() {
        if c == 1 {
            data.push(T::lit(y_new[i].clamp(0.0, 1.0)));
            continue;
        }
        let (yo, yn) = (y_old[i], y_new[i]);
        for &v in p {
            let out = if yo > 1e-12 { v.as_f64() * yn / yo } else { yn };
            data.push(T::lit(out.clamp(0.0, 1.0)));
        }
    }
    RasterImage::new(img.height(), img.width(), c, data)
}

fn luminance_f64<T: Real>(img: &RasterImage<T>) -> Vec<f64> {
    img.luminance().data().iter().map(|v| v.as_f64().clamp(0.0, 1.0)).collect()
}

/// Whole-image contrast-limited equalization of the luminance.
pub fn equalize_global<T: Real>(img: &RasterImage<T>, clip_limit: f64) -> Result<RasterImage<T>> {
    if !(clip_limit >= 1.0) {
        return Err(Error::domain(format!("clip limit must be >= 1, got {clip_limit}")));
    }
    let y = luminance_f64(img);
    let curve = ToneCurve::build(y.iter().copied(), clip_limit);
    let y_new: Vec<f64> = y.iter().map(|&v| curve.apply(v)).collect();
    remap_luminance(img, &y, &y_new)
}

/// Contrast-limited adaptive histogram equalization over a `tiles × tiles`
/// grid with bilinear blending of neighbouring tile curves. Images with
/// fewer pixels than tiles along either axis are equalized globally.
pub fn clahe<T: Real>(img: &RasterImage<T>, tiles: usize, clip_limit: f64) -> Result<RasterImage<T>> {
    if tiles < 2 {
        return Err(Error::domain(format!("tile grid must be >= 2, got {tiles}")));
    }
    if !(clip_limit >= 1.0) {
        return Err(Error::domain(format!("clip limit must be >= 1, got {clip_limit}")));
    }
    let (h, w, _) = img.dims();
    if h < tiles || w < tiles {
        return equalize_global(img, clip_limit);
    }
    let y = luminance_f64(img);
    let bounds = |n: usize, i: usize| (i * n / tiles, (i + 1) * n / tiles);
    let mut curves = Vec::with_capacity(tiles * tiles);
    for ty in 0..tiles {
        let (y0, y1) = bounds(h, ty);
        for tx in 0..tiles {
            let (x0, x1) = bounds(w, tx);
            let vals = (y0..y1).flat_map(|yy| (x0..x1).map(move |xx| (yy, xx)));
            curves.push(ToneCurve::build(vals.map(|(yy, xx)| y[yy * w + xx]), clip_limit));
        }
    }
    let (th, tw) = (h as f64 / tiles as f64, w as f64 / tiles as f64);
    let locate = |p: usize, size: f64| -> (usize, usize, f64) {
        let t = (p as f64 + 0.5) / size - 0.5;
        if t <= 0.0 {
            return (0, 0, 0.0);
        }
        let i0 = (t.floor() as usize).min(tiles - 1);
        let i1 = (i0 + 1).min(tiles - 1);
        (i0, i1, if i0 == i1 { 0.0 } else { t - i0 as f64 })
    };
    let mut y_new = vec![0.0; h * w];
    for yy in 0..h {
        let (r0, r1, wy) = locate(yy, th);
        for xx in 0..w {
            let (c0, c1, wx) = locate(xx, tw);
            let v = y[yy * w + xx];
            let f = |r: usize, c: usize| curves[r * tiles + c].apply(v);
            let top = f(r0, c0) * (1.0 - wx) + f(r0, c1) * wx;
            let bot = f(r1, c0) * (1.0 - wx) + f(r1, c1) * wx;
            y_new[yy * w + xx] = top * (1.0 - wy) + bot * wy;
        }
    }
    remap_luminance(img, &y, &y_new)
}
