use restorekit::cues::{extract_cues, TaskKind};
use restorekit::raster::load_image;
use serde::Serialize;

use super::{check_unique_stems, par_map, psf_for, psf_source};
use crate::config::{file_name, PipelineConfig};
use crate::error::{CliError, CliResult};
use crate::fsutil::{ensure_dir, list_images, replace_dir, stem, write_json};
use crate::manifest::{version, MANIFEST};
use restorekit::degrade::BlurSpec;

#[derive(Clone, Debug, Serialize)]
pub struct CueItem {
    pub input: String,
    pub dir: String,
    pub tasks: Vec<TaskKind>,
    pub psf: Option<BlurSpec>,
    pub primary: usize,
    pub secondary: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct CuesManifest {
    pub command: String,
    pub version: String,
    pub config_hash: String,
    pub items: Vec<CueItem>,
}

pub fn run(cfg: &PipelineConfig) -> CliResult<CuesManifest> {
    let tasks = cfg.tasks_or_default();
    if tasks.is_empty() {
        return Err(CliError::usage("cue extraction needs at least one task"));
    }
    let paths = list_images(cfg.input()?)?;
    check_unique_stems(&paths)?;
    let out = cfg.output()?;
    ensure_dir(out)?;
    let psf = if tasks.contains(&TaskKind::Blur) {
        let src = psf_source(cfg)?;
        if src.is_none() {
            return Err(restorekit::Error::Config("blur cues need --psf".into()).into());
        }
        src
    } else {
        None
    };

    let items = par_map(cfg, &paths, |path| {
        let spec = psf_for(cfg, psf.as_ref(), path)?;
        let kernel = spec.as_ref().map(|s| s.kernel::<f64>()).transpose()?;
        let img = load_image::<f64>(path)?;
        let set = extract_cues(&img, &tasks, &cfg.cue_params, kernel.as_ref())?;
        let dir = stem(path);
        replace_dir(&out.join(&dir), |d| Ok(set.save_dir(d, Some(&cfg.cue_params))?))?;
        Ok(CueItem {
            input: file_name(path),
            dir,
            tasks: set.tasks().collect(),
            psf: spec,
            primary: set.primary_count(),
            secondary: set.secondary_count(),
        })
    })?;

    let manifest = CuesManifest {
        command: "cues".into(),
        version: version(),
        config_hash: cfg.hash("cues"),
        items,
    };
    write_json(&out.join(MANIFEST), &manifest)?;
    Ok(manifest)
}
