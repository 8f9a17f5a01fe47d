//! Frequency-domain Wiener deconvolution with a known PSF.

use rustfft::num_complex::Complex;

use crate::error::{Error, Result};
use crate::raster::fft::Fft2d;
use crate::raster::{Kernel2D, RasterImage};
use crate::scalar::Real;

/// `Ŝ = conj(H)·G / (|H|² + k)` per channel.
///
/// Each plane is mirrored to a `2h × 2w` periodic tile before the transform.
/// For a symmetric PSF this makes reflect-boundary blur exactly circular, so
/// there is no wrap-around discontinuity to ring. Non-normalized PSFs are
/// rescaled to unit sum.
pub fn wiener_deconvolve<T: Real>(img: &RasterImage<T>, psf: &Kernel2D<T>, k: f64) -> Result<RasterImage<T>> {
    if psf.taps().iter().all(|&t| t == T::zero()) {
        return Err(Error::domain("PSF is all zeros"));
    }
    if !(k >= 0.0 && k.is_finite()) {
        return Err(Error::domain(format!("Wiener k must be >= 0, got {k}")));
    }
    let psf = if psf.is_normalized() { psf.clone() } else { psf.normalized()? };
    let (h, w, _) = img.dims();
    if psf.height() > h || psf.width() > w {
        return Err(Error::Size(format!(
            "PSF {}x{} larger than image {h}x{w}",
            psf.height(),
            psf.width()
        )));
    }
    let (eh, ew) = (2 * h, 2 * w);
    let fft = Fft2d::<T>::new(eh, ew);
    let zero = Complex::new(T::zero(), T::zero());

    let mut spectrum = vec![zero; eh * ew];
    let (ry, rx) = (psf.radius_y() as isize, psf.radius_x() as isize);
    for i in 0..psf.height() {
        for j in 0..psf.width() {
            let yy = (i as isize - ry).rem_euclid(eh as isize) as usize;
            let xx = (j as isize - rx).rem_euclid(ew as isize) as usize;
            spectrum[yy * ew + xx].re += psf.tap(i, j);
        }
    }
    fft.forward(&mut spectrum);
    let kk = T::lit(k);
    let filter: Vec<Complex<T>> = spectrum
        .iter()
        .map(|hf| {
            let denom = hf.norm_sqr() + kk;
            if denom > T::zero() {
                hf.conj() / denom
            } else {
                zero
            }
        })
        .collect();

    let mirror = |i: usize, n: usize| if i < n { i } else { 2 * n - 1 - i };
    let planes: Vec<Vec<T>> = img
        .planes()
        .iter()
        .map(|plane| {
            let mut buf: Vec<Complex<T>> = (0..eh * ew)
                .map(|p| Complex::new(plane[mirror(p / ew, h) * w + mirror(p % ew, w)], T::zero()))
                .collect();
            fft.forward(&mut buf);
            for (b, f) in buf.iter_mut().zip(&filter) {
                *b = *b * *f;
            }
            fft.inverse(&mut buf);
            (0..h * w).map(|p| buf[(p / w) * ew + p % w].re).collect()
        })
        .collect();
    RasterImage::from_planes(h, w, &planes)
}
