//! Image and kernel representations plus shared numerical primitives.

mod boundary;
mod convolve;
pub(crate) mod fft;
mod image;
mod io;
mod kernel;

pub use boundary::Boundary;
pub use convolve::{convolve2d, convolve2d_direct, convolve2d_fft, FFT_TAP_THRESHOLD};
pub use image::{RasterImage, LUMA_WEIGHTS};
pub use io::{decode_image, encode_image, load_image, save_image, BitDepth, FileFormat};
pub use kernel::{Kernel2D, NORMALIZED_TOL};

use crate::scalar::Real;

/// 2×2 average pooling. Odd dimensions are first extended by replicating
/// the last row/column, so the output is `ceil(h/2) × ceil(w/2)`.
pub fn downsample2<T: Real>(img: &RasterImage<T>) -> RasterImage<T> {
    let (h, w, c) = img.dims();
    let (oh, ow) = (h.div_ceil(2), w.div_ceil(2));
    let quarter = T::lit(0.25);
    RasterImage::from_fn(oh, ow, c, |y, x, ch| {
        let (y0, x0) = (2 * y, 2 * x);
        let (y1, x1) = ((y0 + 1).min(h - 1), (x0 + 1).min(w - 1));
        (img.get(y0, x0, ch) + img.get(y0, x1, ch) + img.get(y1, x0, ch) + img.get(y1, x1, ch))
            * quarter
    })
}
