use rustfft::num_complex::Complex;

use super::boundary::Boundary;
use super::fft::Fft2d;
use super::image::RasterImage;
use super::kernel::Kernel2D;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Kernels with more taps than this go through the FFT path.
pub const FFT_TAP_THRESHOLD: usize = 49;

/// Per-channel 2-D convolution (kernel flipped) with the given boundary
/// extension. Output has the input's shape.
pub fn convolve2d<T: Real>(
    img: &RasterImage<T>,
    kernel: &Kernel2D<T>,
    boundary: Boundary,
) -> Result<RasterImage<T>> {
    if kernel.area() > FFT_TAP_THRESHOLD {
        convolve2d_fft(img, kernel, boundary)
    } else {
        convolve2d_direct(img, kernel, boundary)
    }
}

fn check_size<T: Real>(img: &RasterImage<T>, kernel: &Kernel2D<T>) -> Result<()> {
    if kernel.height() > img.height() || kernel.width() > img.width() {
        return Err(Error::Size(format!(
            "kernel {}x{} larger than image {}x{}",
            kernel.height(),
            kernel.width(),
            img.height(),
            img.width()
        )));
    }
    Ok(())
}

pub fn convolve2d_direct<T: Real>(
    img: &RasterImage<T>,
    kernel: &Kernel2D<T>,
    boundary: Boundary,
) -> Result<RasterImage<T>> {
    check_size(img, kernel)?;
    let (h, w, _) = img.dims();
    let (ry, rx) = (kernel.radius_y(), kernel.radius_x());
    let rows = boundary.table(h, ry);
    let cols = boundary.table(w, rx);
    let planes = img.planes();
    let out: Vec<Vec<T>> = planes
        .iter()
        .map(|plane| {
            let mut o = vec![T::zero(); h * w];
            for y in 0..h {
                for x in 0..w {
                    let mut acc = T::zero();
                    for i in 0..kernel.height() {
                        // padded row index of y + ry - i is y + 2ry - i
                        let sy = rows[y + 2 * ry - i];
                        let base = sy * w;
                        for j in 0..kernel.width() {
                            let sx = cols[x + 2 * rx - j];
                            acc += kernel.tap(i, j) * plane[base + sx];
                        }
                    }
                    o[y * w + x] = acc;
                }
            }
            o
        })
        .collect();
    RasterImage::from_planes(h, w, &out)
}

/// Same result as [`convolve2d_direct`], computed by circular convolution of
/// the boundary-padded plane. Padding by the kernel radius means no output
/// sample sees wrapped data.
pub fn convolve2d_fft<T: Real>(
    img: &RasterImage<T>,
    kernel: &Kernel2D<T>,
    boundary: Boundary,
) -> Result<RasterImage<T>> {
    check_size(img, kernel)?;
    let (h, w, _) = img.dims();
    let (ry, rx) = (kernel.radius_y(), kernel.radius_x());
    let (ph, pw) = (h + 2 * ry, w + 2 * rx);
    let rows = boundary.table(h, ry);
    let cols = boundary.table(w, rx);
    let fft = Fft2d::<T>::new(ph, pw);

    let mut kspec = vec![Complex::new(T::zero(), T::zero()); ph * pw];
    for i in 0..kernel.height() {
        for j in 0..kernel.width() {
            let yy = (i as isize - ry as isize).rem_euclid(ph as isize) as usize;
            let xx = (j as isize - rx as isize).rem_euclid(pw as isize) as usize;
            kspec[yy * pw + xx].re = kernel.tap(i, j);
        }
    }
    fft.forward(&mut kspec);

    let out: Vec<Vec<T>> = img
        .planes()
        .iter()
        .map(|plane| {
            let mut buf: Vec<Complex<T>> = (0..ph * pw)
                .map(|k| Complex::new(plane[rows[k / pw] * w + cols[k % pw]], T::zero()))
                .collect();
            fft.forward(&mut buf);
            for (b, k) in buf.iter_mut().zip(&kspec) {
                *b = *b * *k;
            }
            fft.inverse(&mut buf);
            let mut o = Vec::with_capacity(h * w);
            for y in 0..h {
                for x in 0..w {
                    o.push(buf[(y + ry) * pw + x + rx].re);
                }
            }
            o
        })
        .collect();
    RasterImage::from_planes(h, w, &out)
}
