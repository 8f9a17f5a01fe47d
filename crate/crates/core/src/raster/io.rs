//! PNG and binary PNM reading/writing.
//!
//! Intensities are stored as `value / (2^bits - 1)`; on write they are
//! clamped to `[0, 1]` and rounded to the nearest code. 8-bit data therefore
//! round-trips exactly.

use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, ImageBuffer, ImageFormat, Luma, Rgb};

use super::image::RasterImage;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BitDepth {
    #[default]
    Eight,
    Sixteen,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FileFormat {
    Png,
    Pnm,
}

impl FileFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .unwrap_or_default();
        match ext.as_str() {
            "png" => Ok(FileFormat::Png),
            "ppm" | "pgm" | "pnm" => Ok(FileFormat::Pnm),
            other => Err(Error::Format(format!("unsupported extension {other:?}"))),
        }
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn load_image<T: Real>(path: &Path) -> Result<RasterImage<T>> {
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    decode_image(&bytes).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn decode_image<T: Real>(bytes: &[u8]) -> Result<RasterImage<T>> {
    let dynamic = image::load_from_memory(bytes).map_err(|e| Error::Format(e.to_string()))?;
    let (w, h) = (dynamic.width() as usize, dynamic.height() as usize);
    let scale8 = 1.0 / 255.0;
    let scale16 = 1.0 / 65535.0;
    let (channels, data): (usize, Vec<T>) = match dynamic {
        DynamicImage::ImageLuma8(b) => (1, b.into_raw().iter().map(|&v| T::lit(v as f64 * scale8)).collect()),
        DynamicImage::ImageRgb8(b) => (3, b.into_raw().iter().map(|&v| T::lit(v as f64 * scale8)).collect()),
        DynamicImage::ImageLuma16(b) => (1, b.into_raw().iter().map(|&v| T::lit(v as f64 * scale16)).collect()),
        DynamicImage::ImageRgb16(b) => (3, b.into_raw().iter().map(|&v| T::lit(v as f64 * scale16)).collect()),
        other => {
            return Err(Error::Format(format!(
                "unsupported channel layout {:?}",
                other.color()
            )))
        }
    };
    RasterImage::new(h, w, channels, data)
}

#[inline]
fn quantize(v: f64, max: f64) -> f64 {
    (v.clamp(0.0, 1.0) * max).round()
}

pub fn encode_image<T: Real>(img: &RasterImage<T>, format: FileFormat, depth: BitDepth) -> Result<Vec<u8>> {
    match format {
        FileFormat::Png => encode_png(img, depth),
        FileFormat::Pnm => Ok(encode_pnm(img, depth)),
    }
}

fn encode_png<T: Real>(img: &RasterImage<T>, depth: BitDepth) -> Result<Vec<u8>> {
    let (h, w, c) = img.dims();
    let (w32, h32) = (w as u32, h as u32);
    let dynamic = match depth {
        BitDepth::Eight => {
            let raw: Vec<u8> = img.data().iter().map(|v| quantize(v.as_f64(), 255.0) as u8).collect();
            if c == 1 {
                DynamicImage::ImageLuma8(ImageBuffer::<Luma<u8>, _>::from_raw(w32, h32, raw).expect("buffer size"))
            } else {
                DynamicImage::ImageRgb8(ImageBuffer::<Rgb<u8>, _>::from_raw(w32, h32, raw).expect("buffer size"))
            }
        }
        BitDepth::Sixteen => {
            let raw: Vec<u16> = img.data().iter().map(|v| quantize(v.as_f64(), 65535.0) as u16).collect();
            if c == 1 {
                DynamicImage::ImageLuma16(ImageBuffer::<Luma<u16>, _>::from_raw(w32, h32, raw).expect("buffer size"))
            } else {
                DynamicImage::ImageRgb16(ImageBuffer::<Rgb<u16>, _>::from_raw(w32, h32, raw).expect("buffer size"))
            }
        }
    };
    let mut out = Cursor::new(Vec::new());
    dynamic
        .write_to(&mut out, ImageFormat::Png)
        .map_err(|e| Error::Format(e.to_string()))?;
    Ok(out.into_inner())
}

/// Binary P5 (gray) / P6 (RGB); 16-bit samples are big-endian.
fn encode_pnm<T: Real>(img: &RasterImage<T>, depth: BitDepth) -> Vec<u8> {
    let (h, w, c) = img.dims();
    let magic = if c == 1 { "P5" } else { "P6" };
    let maxval = match depth {
        BitDepth::Eight => 255u32,
        BitDepth::Sixteen => 65535,
    };
    let mut out = format!("{magic}\n{w} {h}\n{maxval}\n").into_bytes();
    for v in img.data() {
        let q = quantize(v.as_f64(), maxval as f64);
        match depth {
            BitDepth::Eight => out.push(q as u8),
            BitDepth::Sixteen => out.extend_from_slice(&(q as u16).to_be_bytes()),
        }
    }
    out
}

/// Writes `img` in the format implied by the file extension.
pub fn save_image<T: Real>(img: &RasterImage<T>, path: &Path, depth: BitDepth) -> Result<()> {
    let bytes = encode_image(img, FileFormat::from_path(path)?, depth)?;
    std::fs::write(path, bytes).map_err(|e| io_err(path, e))
}
