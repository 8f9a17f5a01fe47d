//! Local-linear-model (guided) filter on truncated square windows.

use crate::error::{Error, Result};
use crate::raster::RasterImage;
use crate::scalar::Real;

/// Mean over the `(2r+1)²` window clipped to the image, via an integral
/// image. Accumulates in `f64`.
pub(crate) fn box_mean(plane: &[f64], h: usize, w: usize, r: usize) -> Vec<f64> {
    let stride = w + 1;
    let mut sat = vec![0.0f64; (h + 1) * stride];
    for y in 0..h {
        let mut row = 0.0;
        for x in 0..w {
            row += plane[y * w + x];
            sat[(y + 1) * stride + x + 1] = sat[y * stride + x + 1] + row;
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        let (y0, y1) = (y.saturating_sub(r), (y + r + 1).min(h));
        for x in 0..w {
            let (x0, x1) = (x.saturating_sub(r), (x + r + 1).min(w));
            let s = sat[y1 * stride + x1] - sat[y0 * stride + x1] - sat[y1 * stride + x0]
                + sat[y0 * stride + x0];
            out[y * w + x] = s / ((y1 - y0) * (x1 - x0)) as f64;
        }
    }
    out
}

/// Edge-preserving filter of `src` steered by `guide`.
///
/// Per window: `a = cov(I, p) / (var(I) + eps)`, `b = mean(p) − a·mean(I)`;
/// the output is `mean(a)·I + mean(b)`. A 3-channel guide is reduced to its
/// luminance; each `src` channel is filtered independently.
pub fn guided_filter<T: Real>(
    guide: &RasterImage<T>,
    src: &RasterImage<T>,
    radius: usize,
    eps: f64,
) -> Result<RasterImage<T>> {
    if !guide.same_spatial(src) {
        return Err(Error::domain(format!(
            "guide {:?} and source {:?} differ in size",
            guide.dims(),
            src.dims()
        )));
    }
    if radius < 1 {
        return Err(Error::domain("guided filter radius must be >= 1"));
    }
    if !(eps > 0.0) {
        return Err(Error::domain(format!("guided filter eps must be > 0, got {eps}")));
    }
    let (h, w, _) = src.dims();
    let gi: Vec<f64> = guide.luminance().data().iter().map(|v| v.as_f64()).collect();
    let mean_i = box_mean(&gi, h, w, radius);
    let ii: Vec<f64> = gi.iter().map(|v| v * v).collect();
    let corr_ii = box_mean(&ii, h, w, radius);

    let planes: Vec<Vec<T>> = src
        .planes()
        .iter()
        .map(|plane| {
            let p: Vec<f64> = plane.iter().map(|v| v.as_f64()).collect();
            let mean_p = box_mean(&p, h, w, radius);
            let ip: Vec<f64> = gi.iter().zip(&p).map(|(a, b)| a * b).collect();
            let corr_ip = box_mean(&ip, h, w, radius);
            let mut a = vec![0.0; h * w];
            let mut b = vec![0.0; h * w];
            for k in 0..h * w {
                let var = corr_ii[k] - mean_i[k] * mean_i[k];
                let cov = corr_ip[k] - mean_i[k] * mean_p[k];
                a[k] = cov / (var + eps);
                b[k] = mean_p[k] - a[k] * mean_i[k];
            }
            let mean_a = box_mean(&a, h, w, radius);
            let mean_b = box_mean(&b, h, w, radius);
            (0..h * w)
                .map(|k| T::lit(mean_a[k] * gi[k] + mean_b[k]))
                .collect()
        })
        .collect();
    RasterImage::from_planes(h, w, &planes)
}
