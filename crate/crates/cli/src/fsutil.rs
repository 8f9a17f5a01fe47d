//! Directory listing and atomic writes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use restorekit::raster::{encode_image, BitDepth, FileFormat, RasterImage};
use restorekit::Real;
use serde::Serialize;

use crate::error::{CliError, CliResult};

pub const IMAGE_EXTENSIONS: [&str; 4] = ["png", "ppm", "pgm", "pnm"];

pub fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

/// A single image file, or every image in a directory sorted by name.
pub fn list_images(input: &Path) -> CliResult<Vec<PathBuf>> {
    let meta = fs::metadata(input).map_err(CliError::io(input))?;
    if meta.is_file() {
        return if is_image(input) {
            Ok(vec![input.to_path_buf()])
        } else {
            Err(CliError::usage(format!("{} is not a png/ppm/pgm/pnm image", input.display())))
        };
    }
    let mut out = Vec::new();
    for entry in fs::read_dir(input).map_err(CliError::io(input))? {
        let path = entry.map_err(CliError::io(input))?.path();
        if path.is_file() && is_image(&path) {
            out.push(path);
        }
    }
    out.sort();
    if out.is_empty() {
        return Err(CliError::usage(format!("no images found in {}", input.display())));
    }
    Ok(out)
}

pub fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(CliError::io(dir))
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    ensure_dir(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(CliError::io(dir))?;
    tmp.write_all(bytes).map_err(CliError::io(path))?;
    tmp.as_file().sync_all().map_err(CliError::io(path))?;
    tmp.persist(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

/// Pretty JSON with keys in a stable order, newline-terminated.
pub fn to_json<S: Serialize>(value: &S) -> CliResult<String> {
    // round-trip through Value so map keys come out sorted
    let v = serde_json::to_value(value).map_err(|e| restorekit::Error::Format(e.to_string()))?;
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| restorekit::Error::Format(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> CliResult<()> {
    write_atomic(path, to_json(value)?.as_bytes())
}

pub fn write_png16<T: Real>(path: &Path, img: &RasterImage<T>) -> CliResult<()> {
    let bytes = encode_image(img, FileFormat::Png, BitDepth::Sixteen)?;
    write_atomic(path, &bytes)
}

/// Replaces `dest` with a directory filled by `fill`, built in a sibling
/// temporary directory so readers never see a half-written bundle.
pub fn replace_dir(dest: &Path, fill: impl FnOnce(&Path) -> CliResult<()>) -> CliResult<()> {
    let parent = dest.parent().unwrap_or(Path::new("."));
    ensure_dir(parent)?;
    let tmp = tempfile::Builder::new()
        .prefix(".partial-")
        .tempdir_in(parent)
        .map_err(CliError::io(parent))?;
    fill(tmp.path())?;
    if dest.exists() {
        fs::remove_dir_all(dest).map_err(CliError::io(dest))?;
    }
    let kept = tmp.keep();
    fs::rename(&kept, dest).map_err(CliError::io(dest))
}
