//! Side-by-side comparison grid: one row per input image, one column per
//! method, captions drawn with an 8×8 bitmap font.

use std::path::{Path, PathBuf};

use font8x8::UnicodeFonts;
use restorekit::raster::{encode_image, load_image, BitDepth, FileFormat, RasterImage};
use serde::Serialize;

use super::check_unique_stems;
use crate::config::{file_name, PipelineConfig};
use crate::error::{CliError, CliResult};
use crate::fsutil::{ensure_dir, list_images, stem, write_atomic, write_json};

pub const GAP: usize = 4;
pub const GLYPH: usize = 8;
pub const CAPTION_HEIGHT: usize = GLYPH + 4;
pub const BACKGROUND: f64 = 1.0;
pub const LETTERBOX: f64 = 0.0;
pub const INK: f64 = 0.0;
pub const NO_GT_NOTE: &str = "ground truth not supplied";

#[derive(Clone, Debug, Serialize)]
pub struct GridLayout {
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    pub tile_height: usize,
    pub tile_width: usize,
    pub gap: usize,
    pub caption_height: usize,
    pub height: usize,
    pub width: usize,
    pub note: Option<String>,
}

pub fn parse_method(s: &str) -> CliResult<(String, PathBuf)> {
    match s.split_once('=') {
        Some((label, dir)) if !label.is_empty() && !dir.is_empty() => Ok((label.to_string(), PathBuf::from(dir))),
        _ => Err(CliError::usage(format!("--method expects LABEL=DIR, got {s:?}"))),
    }
}

fn same_stem(dir: &Path, s: &str, label: &str) -> CliResult<PathBuf> {
    list_images(dir)?.into_iter().find(|p| stem(p) == s).ok_or_else(|| {
        restorekit::Error::Domain(format!("column `{label}` has no image named {s}.*")).into()
    })
}

/// Draws `text` in the strip starting at `(y0, x0)`, clipped to `max_w`.
pub fn draw_text(canvas: &mut RasterImage<f64>, y0: usize, x0: usize, max_w: usize, text: &str) {
    let (h, w, c) = canvas.dims();
    let data = canvas.data_mut();
    for (i, ch) in text.chars().take(max_w / GLYPH).enumerate() {
        let glyph = font8x8::BASIC_FONTS.get(ch).or_else(|| font8x8::BASIC_FONTS.get('?')).unwrap_or([0; 8]);
        for (gy, row) in glyph.iter().enumerate() {
            for gx in 0..GLYPH {
                if row >> gx & 1 == 1 {
                    let (y, x) = (y0 + gy, x0 + i * GLYPH + gx);
                    if y < h && x < w {
                        for k in 0..c {
                            data[(y * w + x) * c + k] = INK;
                        }
                    }
                }
            }
        }
    }
}

fn paste(canvas: &mut RasterImage<f64>, tile: &RasterImage<f64>, y0: usize, x0: usize, th: usize, tw: usize) {
    let (_, w, c) = canvas.dims();
    let tile = tile.to_rgb();
    let (oy, ox) = (y0 + (th - tile.height()) / 2, x0 + (tw - tile.width()) / 2);
    let data = canvas.data_mut();
    for y in y0..y0 + th {
        for x in x0..x0 + tw {
            let inside = y >= oy && y < oy + tile.height() && x >= ox && x < ox + tile.width();
            for k in 0..c {
                data[(y * w + x) * c + k] = if inside { tile.get(y - oy, x - ox, k) } else { LETTERBOX };
            }
        }
    }
}

/// Assembles the grid. `columns` pairs a label with one image per row.
pub fn compose(rows: &[String], columns: &[(String, Vec<RasterImage<f64>>)], note: Option<&str>) -> (RasterImage<f64>, GridLayout) {
    let all = columns.iter().flat_map(|(_, imgs)| imgs);
    let th = all.clone().map(|i| i.height()).max().unwrap_or(1);
    let tw = all.map(|i| i.width()).max().unwrap_or(1);
    let cell_h = CAPTION_HEIGHT + th;
    let height = GAP + rows.len() * (cell_h + GAP) + if note.is_some() { CAPTION_HEIGHT + GAP } else { 0 };
    let width = GAP + columns.len() * (tw + GAP);
    let mut canvas = RasterImage::filled(height, width, 3, BACKGROUND);
    for (r, row) in rows.iter().enumerate() {
        let y = GAP + r * (cell_h + GAP);
        for (c, (label, imgs)) in columns.iter().enumerate() {
            let x = GAP + c * (tw + GAP);
            let caption = if c == 0 { format!("{label}: {row}") } else { label.clone() };
            draw_text(&mut canvas, y + (CAPTION_HEIGHT - GLYPH) / 2, x, tw, &caption);
            paste(&mut canvas, &imgs[r], y + CAPTION_HEIGHT, x, th, tw);
        }
    }
    if let Some(n) = note {
        let y = height - CAPTION_HEIGHT - GAP + (CAPTION_HEIGHT - GLYPH) / 2;
        draw_text(&mut canvas, y, GAP, width - GAP, n);
    }
    let layout = GridLayout {
        rows: rows.to_vec(),
        columns: columns.iter().map(|(l, _)| l.clone()).collect(),
        tile_height: th,
        tile_width: tw,
        gap: GAP,
        caption_height: CAPTION_HEIGHT,
        height,
        width,
        note: note.map(str::to_string),
    };
    (canvas, layout)
}

pub fn run(cfg: &PipelineConfig, methods: &[String]) -> CliResult<GridLayout> {
    let paths = list_images(cfg.input()?)?;
    check_unique_stems(&paths)?;
    let out = cfg.output()?;
    let methods = methods.iter().map(|m| parse_method(m)).collect::<CliResult<Vec<_>>>()?;
    let rows: Vec<String> = paths.iter().map(|p| stem(p)).collect();

    let load = |p: &Path| -> CliResult<RasterImage<f64>> { Ok(load_image::<f64>(p)?) };
    let mut columns = vec![("input".to_string(), paths.iter().map(|p| load(p)).collect::<CliResult<Vec<_>>>()?)];
    let mut sources: Vec<(String, Vec<String>)> = vec![("input".into(), paths.iter().map(|p| file_name(p)).collect())];
    let mut add = |label: &str, dir: &Path| -> CliResult<()> {
        let files = rows.iter().map(|s| same_stem(dir, s, label)).collect::<CliResult<Vec<_>>>()?;
        let imgs = files.iter().map(|p| load(p)).collect::<CliResult<Vec<_>>>()?;
        for (s, (a, b)) in rows.iter().zip(columns[0].1.iter().zip(&imgs)) {
            if !a.same_spatial(b) {
                return Err(restorekit::Error::Domain(format!(
                    "{s}: column `{label}` is {}×{}, input is {}×{}",
                    b.height(),
                    b.width(),
                    a.height(),
                    a.width()
                ))
                .into());
            }
        }
        sources.push((label.to_string(), files.iter().map(|p| file_name(p)).collect()));
        columns.push((label.to_string(), imgs));
        Ok(())
    };
    for (label, dir) in &methods {
        add(label, dir)?;
    }
    let note = match &cfg.ground_truth {
        Some(dir) => {
            add("ground truth", dir)?;
            None
        }
        None => Some(NO_GT_NOTE),
    };

    let (canvas, layout) = compose(&rows, &columns, note);
    ensure_dir(out)?;
    write_atomic(&out.join("grid.png"), &encode_image(&canvas, FileFormat::Png, BitDepth::Eight)?)?;
    #[derive(Serialize)]
    struct GridManifest<'a> {
        layout: &'a GridLayout,
        sources: &'a [(String, Vec<String>)],
    }
    write_json(&out.join("grid.json"), &GridManifest { layout: &layout, sources: &sources })?;
    Ok(layout)
}
