//! Perona–Malik anisotropic diffusion and the two-coefficient edge map.

use crate::error::{Error, Result};
use crate::raster::RasterImage;
use crate::scalar::Real;

/// Largest stable time step for the explicit 4-neighbour scheme.
pub const PM_MAX_DT: f64 = 0.25;

/// `g(s) = exp(−(s/K)²)`.
#[inline]
pub fn conduction<T: Real>(s: T, k: T) -> T {
    let r = s / k;
    (-(r * r)).exp()
}

fn diffuse_plane<T: Real>(plane: &mut [T], h: usize, w: usize, k: T, dt: T) {
    let mut delta = vec![T::zero(); h * w];
    // Each flux is computed once and applied with opposite signs to the two
    // pixels it joins; no flux crosses the image border.
    for y in 0..h {
        for x in 0..w.saturating_sub(1) {
            let (p, q) = (y * w + x, y * w + x + 1);
            let d = plane[q] - plane[p];
            let f = conduction(d.abs(), k) * d;
            delta[p] += f;
            delta[q] -= f;
        }
    }
    for y in 0..h.saturating_sub(1) {
        for x in 0..w {
            let (p, q) = (y * w + x, (y + 1) * w + x);
            let d = plane[q] - plane[p];
            let f = conduction(d.abs(), k) * d;
            delta[p] += f;
            delta[q] -= f;
        }
    }
    for (v, d) in plane.iter_mut().zip(delta) {
        *v += dt * d;
    }
}

/// Explicit Perona–Malik diffusion, each channel independently.
pub fn perona_malik<T: Real>(img: &RasterImage<T>, k: f64, dt: f64, iters: usize) -> Result<RasterImage<T>> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::domain(format!("conduction constant K must be > 0, got {k}")));
    }
    if !(dt > 0.0) {
        return Err(Error::domain(format!("dt must be > 0, got {dt}")));
    }
    if dt > PM_MAX_DT {
        return Err(Error::Stability(format!(
            "dt = {dt} exceeds the explicit-scheme limit {PM_MAX_DT}"
        )));
    }
    if iters == 0 {
        return Err(Error::domain("perona-malik needs at least one iteration"));
    }
    let (h, w, _) = img.dims();
    let (kk, dtt) = (T::lit(k), T::lit(dt));
    let planes: Vec<Vec<T>> = img
        .planes()
        .into_iter()
        .map(|mut p| {
            for _ in 0..iters {
                diffuse_plane(&mut p, h, w, kk, dtt);
            }
            p
        })
        .collect();
    RasterImage::from_planes(h, w, &planes)
}

/// `|PM(K_large) − PM(K_small)|` on the luminance, divided by its maximum
/// (all zeros when the two diffusions agree everywhere).
pub fn pm_edge_map<T: Real>(
    img: &RasterImage<T>,
    k_small: f64,
    k_large: f64,
    dt: f64,
    iters: usize,
) -> Result<RasterImage<T>> {
    if !(k_small < k_large) {
        return Err(Error::domain(format!(
            "K_small ({k_small}) must be below K_large ({k_large})"
        )));
    }
    let gray = img.luminance();
    let strong = perona_malik(&gray, k_large, dt, iters)?;
    let weak = perona_malik(&gray, k_small, dt, iters)?;
    let diff = strong.zip_map(&weak, |a, b| (a - b).abs())?;
    let m = diff.max_value();
    if m > T::zero() {
        Ok(diff.map(|v| v / m))
    } else {
        Ok(diff.map(|_| T::zero()))
    }
}
