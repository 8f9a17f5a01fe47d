use restorekit::metrics::{QualityRecord, QualityReport};
use restorekit::raster::load_image;

use super::{check_unique_stems, par_map};
use super::restore::find_reference;
use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult};
use crate::fsutil::{ensure_dir, list_images, stem, write_atomic, write_json};

/// Scores every image under `--input` against the same-stem image in
/// `--ground-truth`; writes `metrics.csv` and `metrics.json`.
pub fn run(cfg: &PipelineConfig) -> CliResult<QualityReport> {
    let gt = cfg
        .ground_truth
        .as_deref()
        .ok_or_else(|| CliError::usage("evaluate needs --ground-truth"))?;
    let paths = list_images(cfg.input()?)?;
    check_unique_stems(&paths)?;
    let out = cfg.output()?;
    ensure_dir(out)?;
    let records = par_map(cfg, &paths, |path| {
        let restored = load_image::<f64>(path)?;
        let reference = load_image::<f64>(&find_reference(gt, path)?)?;
        Ok(QualityRecord::evaluate(&stem(path), &restored, &reference)?)
    })?;
    let report = QualityReport::new(records);
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    write_atomic(&out.join("metrics.csv"), &csv)?;
    write_json(&out.join("metrics.json"), &report)?;
    for r in &report.records {
        println!("{}\tpsnr {:.3}\tssim {:.4}", r.id, r.psnr, r.ssim);
    }
    println!(
        "mean\tpsnr {:.3}\tssim {:.4}",
        report.summary.psnr.mean, report.summary.ssim.mean
    );
    Ok(report)
}
