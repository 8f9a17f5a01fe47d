//! Full-reference quality metrics: MSE, PSNR and SSIM.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::RasterImage;
use crate::scalar::Real;

/// Reported PSNR for identical images.
pub const PSNR_CAP: f64 = 99.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SsimParams {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub peak: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            peak: 1.0,
        }
    }
}

fn check_shapes<T: Real>(a: &RasterImage<T>, b: &RasterImage<T>) -> Result<()> {
    if !a.same_shape(b) {
        return Err(Error::domain(format!("shape mismatch: {:?} vs {:?}", a.dims(), b.dims())));
    }
    Ok(())
}

pub fn mse<T: Real>(a: &RasterImage<T>, b: &RasterImage<T>) -> Result<f64> {
    check_shapes(a, b)?;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = x.as_f64() - y.as_f64();
            d * d
        })
        .sum();
    Ok(sum / a.data().len() as f64)
}

/// `10·log10(peak² / MSE)`, or [`PSNR_CAP`] when the images are identical.
pub fn psnr<T: Real>(a: &RasterImage<T>, b: &RasterImage<T>, peak: f64) -> Result<f64> {
    if !(peak > 0.0) {
        return Err(Error::domain(format!("peak must be > 0, got {peak}")));
    }
    Ok(psnr_from_mse(mse(a, b)?, peak))
}

pub fn psnr_from_mse(mse: f64, peak: f64) -> f64 {
    if mse <= 0.0 {
        PSNR_CAP
    } else {
        (10.0 * (peak * peak / mse).log10()).min(PSNR_CAP)
    }
}

fn gaussian_taps(window: usize, sigma: f64) -> Vec<f64> {
    let r = (window / 2) as f64;
    let taps: Vec<f64> = (0..window)
        .map(|i| {
            let d = i as f64 - r;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / s).collect()
}

/// Separable correlation restricted to positions where the window fits.
fn filter_valid(plane: &[f64], h: usize, w: usize, taps: &[f64]) -> Vec<f64> {
    let n = taps.len();
    let (oh, ow) = (h + 1 - n, w + 1 - n);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = taps.iter().enumerate().map(|(k, t)| t * plane[y * w + x + k]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = taps.iter().enumerate().map(|(k, t)| t * rows[(y + k) * ow + x]).sum();
        }
    }
    out
}

fn luma_f64<T: Real>(img: &RasterImage<T>) -> Vec<f64> {
    let g = if img.channels() == 3 { img.luminance() } else { img.clone() };
    g.data().iter().map(|v| v.as_f64()).collect()
}

/// Local SSIM values over the valid region (no padding) of the luminance.
pub fn ssim_map<T: Real>(a: &RasterImage<T>, b: &RasterImage<T>, p: &SsimParams) -> Result<Vec<f64>> {
    check_shapes(a, b)?;
    if p.window % 2 == 0 || p.window == 0 {
        return Err(Error::domain(format!("SSIM window must be odd, got {}", p.window)));
    }
    if !(p.sigma > 0.0) {
        return Err(Error::domain("SSIM window sigma must be > 0"));
    }
    let (h, w, _) = a.dims();
    if p.window > h.min(w) {
        return Err(Error::domain(format!("SSIM window {} exceeds image {h}x{w}", p.window)));
    }
    let taps = gaussian_taps(p.window, p.sigma);
    let (x, y) = (luma_f64(a), luma_f64(b));
    let prod = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(p, q)| p * q).collect::<Vec<_>>();
    let mx = filter_valid(&x, h, w, &taps);
    let my = filter_valid(&y, h, w, &taps);
    let sxx = filter_valid(&prod(&x, &x), h, w, &taps);
    let syy = filter_valid(&prod(&y, &y), h, w, &taps);
    let sxy = filter_valid(&prod(&x, &y), h, w, &taps);
    let c1 = (p.k1 * p.peak).powi(2);
    let c2 = (p.k2 * p.peak).powi(2);
    Ok((0..mx.len())
        .map(|i| {
            let (ux, uy) = (mx[i], my[i]);
            let vx = sxx[i] - ux * ux;
            let vy = syy[i] - uy * uy;
            let cov = sxy[i] - ux * uy;
            ((2.0 * ux * uy + c1) * (2.0 * cov + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2))
        })
        .collect())
}

/// Mean of [`ssim_map`].
pub fn ssim<T: Real>(a: &RasterImage<T>, b: &RasterImage<T>, p: &SsimParams) -> Result<f64> {
    let map = ssim_map(a, b, p)?;
    Ok(map.iter().sum::<f64>() / map.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityRecord {
    pub id: String,
    /// Capped at [`PSNR_CAP`].
    pub psnr: f64,
    pub ssim: f64,
    pub mse: f64,
}

impl QualityRecord {
    pub fn evaluate<T: Real>(id: &str, restored: &RasterImage<T>, reference: &RasterImage<T>) -> Result<Self> {
        let m = mse(restored, reference)?;
        Ok(Self {
            id: id.to_string(),
            psnr: psnr_from_mse(m, 1.0),
            ssim: ssim(restored, reference, &SsimParams::default())?,
            mse: m,
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub median: f64,
}

impl Aggregate {
    fn of(mut values: Vec<f64>) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        values.sort_by(f64::total_cmp);
        let n = values.len();
        let median = if n % 2 == 1 {
            values[n / 2]
        } else {
            0.5 * (values[n / 2 - 1] + values[n / 2])
        };
        Self { mean, median }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QualitySummary {
    pub count: usize,
    pub psnr: Aggregate,
    pub ssim: Aggregate,
    pub mse: Aggregate,
}

impl QualitySummary {
    pub fn of(records: &[QualityRecord]) -> Self {
        Self {
            count: records.len(),
            psnr: Aggregate::of(records.iter().map(|r| r.psnr).collect()),
            ssim: Aggregate::of(records.iter().map(|r| r.ssim).collect()),
            mse: Aggregate::of(records.iter().map(|r| r.mse).collect()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub psnr_cap: f64,
    pub records: Vec<QualityRecord>,
    pub summary: QualitySummary,
}

impl QualityReport {
    pub fn new(records: Vec<QualityRecord>) -> Self {
        let summary = QualitySummary::of(&records);
        Self {
            psnr_cap: PSNR_CAP,
            records,
            summary,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        for r in &self.records {
            wtr.serialize(r).map_err(|e| Error::Format(e.to_string()))?;
        }
        wtr.flush().map_err(|e| Error::Format(e.to_string()))
    }
}
