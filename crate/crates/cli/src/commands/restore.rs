//! Classical restoration chain: contrast, deconvolution, dehazing, diffusion.

use std::path::Path;

use restorekit::cues::{clahe, dehaze, perona_malik, wiener_deconvolve, CueParams, TaskKind};
use restorekit::degrade::BlurSpec;
use restorekit::metrics::{QualityRecord, QualityReport};
use restorekit::raster::{load_image, RasterImage};
use serde::Serialize;

use super::{check_unique_stems, par_map, psf_for, psf_source};
use crate::config::{file_name, PipelineConfig};
use crate::error::{CliError, CliResult};
use crate::fsutil::{ensure_dir, list_images, stem, write_atomic, write_json, write_png16};
use crate::manifest::{version, MANIFEST};

/// Application order of the single-task restorers.
pub const RESTORE_ORDER: [TaskKind; 4] = [TaskKind::Dark, TaskKind::Blur, TaskKind::Haze, TaskKind::Noise];

/// Applies the restorer of every selected task, in [`RESTORE_ORDER`].
pub fn restore_image(
    img: &RasterImage<f64>,
    tasks: &[TaskKind],
    params: &CueParams,
    psf: Option<&BlurSpec>,
) -> restorekit::Result<RasterImage<f64>> {
    let mut out = img.clone();
    for task in RESTORE_ORDER.into_iter().filter(|t| tasks.contains(t)) {
        out = match task {
            TaskKind::Dark => clahe(&out, params.contrast.tiles, params.contrast.clip_limit)?,
            TaskKind::Blur => {
                let spec = psf.ok_or_else(|| restorekit::Error::Config("blur restoration needs a PSF".into()))?;
                wiener_deconvolve(&out, &spec.kernel()?, params.wiener_k.0)?.clamp01()
            }
            TaskKind::Haze => {
                let r = dehaze(&out.to_rgb(), &params.dehaze)?.estimate;
                if out.channels() == 1 {
                    r.luminance()
                } else {
                    r
                }
            }
            TaskKind::Noise => {
                let d = &params.diffusion;
                perona_malik(&out, d.k, d.dt, d.iters)?.clamp01()
            }
        };
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct RestoreItem {
    pub input: String,
    pub output: String,
    pub psf: Option<BlurSpec>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RestoreManifest {
    pub command: String,
    pub version: String,
    pub config_hash: String,
    pub order: Vec<TaskKind>,
    pub items: Vec<RestoreItem>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RestoreMetrics {
    pub restored: QualityReport,
    pub baseline: QualityReport,
}

/// Reference image with the same stem as `path`, any supported extension.
pub fn find_reference(dir: &Path, path: &Path) -> CliResult<std::path::PathBuf> {
    let s = stem(path);
    list_images(dir)?
        .into_iter()
        .find(|p| stem(p) == s)
        .ok_or_else(|| CliError::usage(format!("no ground truth for {} in {}", file_name(path), dir.display())))
}

pub fn run(cfg: &PipelineConfig) -> CliResult<RestoreManifest> {
    let tasks = cfg.tasks_or_default();
    let paths = list_images(cfg.input()?)?;
    check_unique_stems(&paths)?;
    let out = cfg.output()?;
    ensure_dir(out)?;
    let psf = if tasks.contains(&TaskKind::Blur) {
        let src = psf_source(cfg)?;
        if src.is_none() {
            return Err(restorekit::Error::Config("blur restoration needs --psf".into()).into());
        }
        src
    } else {
        None
    };
    let gt = cfg.ground_truth.as_deref();

    let results = par_map(cfg, &paths, |path| {
        let spec = psf_for(cfg, psf.as_ref(), path)?;
        let img = load_image::<f64>(path)?;
        let restored = restore_image(&img, &tasks, &cfg.cue_params, spec.as_ref())?;
        let output = format!("{}.png", stem(path));
        write_png16(&out.join(&output), &restored)?;
        let records = match gt {
            Some(dir) => {
                let reference = load_image::<f64>(&find_reference(dir, path)?)?;
                let id = stem(path);
                Some((
                    QualityRecord::evaluate(&id, &restored, &reference)?,
                    QualityRecord::evaluate(&id, &img, &reference)?,
                ))
            }
            None => None,
        };
        Ok((
            RestoreItem {
                input: file_name(path),
                output,
                psf: spec,
            },
            records,
        ))
    })?;

    let mut items = Vec::new();
    let (mut restored, mut baseline) = (Vec::new(), Vec::new());
    for (item, rec) in results {
        items.push(item);
        if let Some((r, b)) = rec {
            restored.push(r);
            baseline.push(b);
        }
    }
    if gt.is_some() {
        let metrics = RestoreMetrics {
            restored: QualityReport::new(restored),
            baseline: QualityReport::new(baseline),
        };
        let mut csv = Vec::new();
        metrics.restored.write_csv(&mut csv)?;
        write_atomic(&out.join("metrics.csv"), &csv)?;
        write_json(&out.join("metrics.json"), &metrics)?;
    }
    let manifest = RestoreManifest {
        command: "restore".into(),
        version: version(),
        config_hash: cfg.hash("restore"),
        order: RESTORE_ORDER.into_iter().filter(|t| tasks.contains(t)).collect(),
        items,
    };
    write_json(&out.join(MANIFEST), &manifest)?;
    Ok(manifest)
}
