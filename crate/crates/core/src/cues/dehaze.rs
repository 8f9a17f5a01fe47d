//! Dark-channel-prior haze cues: dark channel, airlight, transmission and
//! the haze-removal estimate.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::raster::{Boundary, RasterImage};
use crate::scalar::Real;

use super::guided::guided_filter;

/// Sliding-window minimum over a `(2r+1)` window with reflect boundary.
fn min_filter_1d<T: Real>(line: &[T], radius: usize, out: &mut [T]) {
    let n = line.len();
    let padded: Vec<T> = (-(radius as isize)..(n + radius) as isize)
        .map(|i| line[Boundary::Reflect.index(i, n)])
        .collect();
    let window = 2 * radius + 1;
    let mut dq: VecDeque<usize> = VecDeque::with_capacity(window);
    for (i, &v) in padded.iter().enumerate() {
        while dq.back().is_some_and(|&j| padded[j] >= v) {
            dq.pop_back();
        }
        dq.push_back(i);
        if dq[0] + window <= i {
            dq.pop_front();
        }
        if i + 1 >= window {
            out[i + 1 - window] = padded[dq[0]];
        }
    }
}

/// Square min filter on a single plane (separable).
pub(crate) fn min_filter<T: Real>(plane: &[T], h: usize, w: usize, radius: usize) -> Vec<T> {
    if radius == 0 {
        return plane.to_vec();
    }
    let mut rows = vec![T::zero(); h * w];
    for y in 0..h {
        min_filter_1d(&plane[y * w..(y + 1) * w], radius, &mut rows[y * w..(y + 1) * w]);
    }
    let mut out = vec![T::zero(); h * w];
    let mut col = vec![T::zero(); h];
    let mut col_out = vec![T::zero(); h];
    for x in 0..w {
        for y in 0..h {
            col[y] = rows[y * w + x];
        }
        min_filter_1d(&col, radius, &mut col_out);
        for y in 0..h {
            out[y * w + x] = col_out[y];
        }
    }
    out
}

/// Per pixel: minimum over channels, then over the `(2r+1)²` neighbourhood.
pub fn dark_channel<T: Real>(img: &RasterImage<T>, patch_radius: usize) -> Result<RasterImage<T>> {
    if img.channels() != 3 {
        return Err(Error::domain("dark channel needs a 3-channel image"));
    }
    let (h, w, _) = img.dims();
    let channel_min: Vec<T> = img
        .data()
        .chunks_exact(3)
        .map(|p| p[0].min(p[1]).min(p[2]))
        .collect();
    RasterImage::new(h, w, 1, min_filter(&channel_min, h, w, patch_radius))
}

/// Mean colour of the pixels whose dark-channel value is in the top
/// `top_fraction` (ties broken by raster order). If the fraction selects no
/// pixel, the brightest pixel (largest channel sum) is used.
pub fn estimate_atmospheric_light<T: Real>(
    img: &RasterImage<T>,
    dark: &RasterImage<T>,
    top_fraction: f64,
) -> Result<[T; 3]> {
    if img.channels() != 3 {
        return Err(Error::domain("atmospheric light needs a 3-channel image"));
    }
    if dark.channels() != 1 || !img.same_spatial(dark) {
        return Err(Error::domain("dark channel must be single-channel with the image's size"));
    }
    if !(top_fraction > 0.0 && top_fraction <= 1.0) {
        return Err(Error::domain(format!("top_fraction must be in (0, 1], got {top_fraction}")));
    }
    let n = dark.data().len();
    let count = (n as f64 * top_fraction).floor() as usize;
    if count == 0 {
        let best = (0..n)
            .max_by(|&a, &b| {
                let sa: T = img.data()[a * 3..a * 3 + 3].iter().copied().sum();
                let sb: T = img.data()[b * 3..b * 3 + 3].iter().copied().sum();
                // reverse index order on ties so the first brightest wins
                sa.partial_cmp(&sb).unwrap().then(b.cmp(&a))
            })
            .expect("non-empty image");
        let p = &img.data()[best * 3..best * 3 + 3];
        return Ok([p[0], p[1], p[2]]);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        dark.data()[b]
            .partial_cmp(&dark.data()[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut acc = [0.0f64; 3];
    for &i in &order[..count] {
        for (c, a) in acc.iter_mut().enumerate() {
            *a += img.data()[i * 3 + c].as_f64();
        }
    }
    Ok(acc.map(|a| T::lit(a / count as f64)))
}

/// Single-channel transmission estimate with values in `[floor, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransmissionMap<T> {
    map: RasterImage<T>,
    floor: T,
}

impl<T: Real> TransmissionMap<T> {
    pub fn new(map: RasterImage<T>, floor: T) -> Result<Self> {
        if map.channels() != 1 {
            return Err(Error::domain("transmission map must be single-channel"));
        }
        if !(floor >= T::zero() && floor < T::one()) {
            return Err(Error::domain(format!("transmission floor must be in [0, 1), got {floor}")));
        }
        if map.data().iter().any(|&t| t < floor || t > T::one()) {
            return Err(Error::domain("transmission values outside [floor, 1]"));
        }
        Ok(Self { map, floor })
    }

    pub fn constant(height: usize, width: usize, t: T) -> Result<Self> {
        Self::new(RasterImage::filled(height, width, 1, t), T::zero())
    }

    pub fn floor(&self) -> T {
        self.floor
    }

    pub fn as_image(&self) -> &RasterImage<T> {
        &self.map
    }

    pub fn into_image(self) -> RasterImage<T> {
        self.map
    }
}

fn check_airlight<T: Real>(a: &[T; 3]) -> Result<()> {
    if a.iter().any(|&v| !(v > T::zero())) {
        return Err(Error::domain(format!("atmospheric light channels must be > 0, got {a:?}")));
    }
    Ok(())
}

/// `clamp(1 − ω · dark_channel(img / A), floor, 1)`.
pub fn transmission_map<T: Real>(
    img: &RasterImage<T>,
    airlight: [T; 3],
    omega: f64,
    patch_radius: usize,
    floor: f64,
) -> Result<TransmissionMap<T>> {
    check_airlight(&airlight)?;
    if !(omega > 0.0 && omega <= 1.0) {
        return Err(Error::domain(format!("omega must be in (0, 1], got {omega}")));
    }
    if img.channels() != 3 {
        return Err(Error::domain("transmission map needs a 3-channel image"));
    }
    let (h, w, _) = img.dims();
    let normalized = RasterImage::new(
        h,
        w,
        3,
        img.data()
            .iter()
            .enumerate()
            .map(|(i, &v)| v / airlight[i % 3])
            .collect(),
    )?;
    let dark = dark_channel(&normalized, patch_radius)?;
    let (om, fl) = (T::lit(omega), T::lit(floor));
    TransmissionMap::new(dark.map(|d| (T::one() - om * d).max(fl).min(T::one())), fl)
}

/// Edge-aware refinement of a raw transmission map with the image
/// luminance as guide, re-clamped to `[floor, 1]`.
pub fn refine_transmission<T: Real>(
    img: &RasterImage<T>,
    raw: &TransmissionMap<T>,
    radius: usize,
    eps: f64,
) -> Result<TransmissionMap<T>> {
    let refined = guided_filter(&img.luminance(), raw.as_image(), radius, eps)?;
    let fl = raw.floor();
    TransmissionMap::new(refined.map(|t| t.max(fl).min(T::one())), fl)
}

/// Inverts the scattering model: `(img − A) / max(t, floor) + A`, clamped
/// to `[0, 1]`.
pub fn dehaze_estimate<T: Real>(
    img: &RasterImage<T>,
    transmission: &TransmissionMap<T>,
    airlight: [T; 3],
    floor: f64,
) -> Result<RasterImage<T>> {
    check_airlight(&airlight)?;
    let t = transmission.as_image();
    if !img.same_spatial(t) {
        return Err(Error::domain("transmission map size does not match image"));
    }
    let c = img.channels();
    let fl = T::lit(floor);
    let data = img
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let a = airlight[(i % c).min(2)];
            let tt = t.data()[i / c].max(fl);
            ((v - a) / tt + a).max(T::zero()).min(T::one())
        })
        .collect();
    RasterImage::new(img.height(), img.width(), c, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pseudo_random(h: usize, w: usize, c: usize, seed: u64) -> RasterImage<f64> {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        RasterImage::from_fn(h, w, c, |_, _, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 33) as f64) / (1u64 << 31) as f64
        })
    }

    #[test]
    fn dark_channel_constant_and_single_pixel() {
        let img = RasterImage::<f64>::filled(5, 5, 3, 0.4);
        assert!(dark_channel(&img, 2).unwrap().data().iter().all(|&v| v == 0.4));
        let px = RasterImage::<f64>::new(1, 1, 3, vec![0.2, 0.7, 0.9]).unwrap();
        assert_eq!(dark_channel(&px, 0).unwrap().data(), &[0.2]);
    }

    #[test]
    fn dark_channel_matches_brute_force() {
        let img = pseudo_random(5, 5, 3, 11);
        let got = dark_channel(&img, 1).unwrap();
        for y in 0..5isize {
            for x in 0..5isize {
                let mut m = f64::INFINITY;
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let sy = Boundary::Reflect.index(y + dy, 5);
                        let sx = Boundary::Reflect.index(x + dx, 5);
                        for c in 0..3 {
                            m = m.min(img.get(sy, sx, c));
                        }
                    }
                }
                assert_eq!(got.get(y as usize, x as usize, 0), m);
            }
        }
    }

    #[test]
    fn dark_channel_rejects_gray() {
        assert!(dark_channel(&RasterImage::<f32>::zeros(4, 4, 1), 1).is_err());
    }

    #[test]
    fn airlight_examples() {
        let img = RasterImage::<f64>::filled(10, 10, 3, 0.6);
        let dark = dark_channel(&img, 1).unwrap();
        assert_eq!(estimate_atmospheric_light(&img, &dark, 0.001).unwrap(), [0.6; 3]);

        let img = RasterImage::<f64>::from_fn(20, 20, 3, |y, x, _| if (y, x) == (7, 13) { 1.0 } else { 0.0 });
        let dark = dark_channel(&img, 0).unwrap();
        assert_eq!(estimate_atmospheric_light(&img, &dark, 0.001).unwrap(), [1.0; 3]);
        assert_eq!(estimate_atmospheric_light(&img, &dark, 0.0025).unwrap(), [1.0; 3]);
        assert!(estimate_atmospheric_light(&img, &dark, 0.0).is_err());
    }

    #[test]
    fn transmission_examples() {
        let a = [0.8, 0.9, 0.7];
        let img = RasterImage::<f64>::from_fn(6, 6, 3, |_, _, c| a[c]);
        let t = transmission_map(&img, a, 0.95, 2, 0.01).unwrap();
        assert!(t.as_image().data().iter().all(|&v| (v - 0.05).abs() < 1e-12));
        let t = transmission_map(&img, a, 0.95, 2, 0.1).unwrap();
        assert!(t.as_image().data().iter().all(|&v| v == 0.1));

        let black = RasterImage::<f64>::zeros(6, 6, 3);
        let t = transmission_map(&black, a, 0.95, 2, 0.1).unwrap();
        assert!(t.as_image().data().iter().all(|&v| v == 1.0));

        assert!(transmission_map(&black, [0.0, 1.0, 1.0], 0.95, 2, 0.1).is_err());
    }

    #[test]
    fn dehaze_identity_and_floor() {
        let img = pseudo_random(8, 8, 3, 3);
        let t1 = TransmissionMap::constant(8, 8, 1.0).unwrap();
        let out = dehaze_estimate(&img, &t1, [0.9; 3], 0.05).unwrap();
        for (a, b) in out.data().iter().zip(img.data()) {
            assert!((a - b).abs() < 1e-15);
        }
        let tiny = TransmissionMap::constant(8, 8, 0.001).unwrap();
        let out = dehaze_estimate(&img, &tiny, [0.9; 3], 0.05).unwrap();
        assert!(out.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn transmission_map_rejects_values_below_floor() {
        let img = RasterImage::<f64>::filled(2, 2, 1, 0.05);
        assert!(TransmissionMap::new(img, 0.1).is_err());
    }
}
