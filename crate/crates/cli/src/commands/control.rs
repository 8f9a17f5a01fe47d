use restorekit::control::{control_forward, BlockWeights, ControlReport};
use restorekit::cues::{extract_cues, TaskKind};
use restorekit::raster::load_image;
use serde::Serialize;

use super::{check_unique_stems, par_map, psf_for, psf_source};
use crate::args::ControlArgs;
use crate::config::{file_name, PipelineConfig};
use crate::error::{CliError, CliResult};
use crate::fsutil::{ensure_dir, list_images, stem, write_json};
use crate::manifest::{version, MANIFEST};

#[derive(Clone, Debug, Serialize)]
pub struct ControlItem {
    pub input: String,
    pub report: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ControlManifest {
    pub command: String,
    pub version: String,
    pub config_hash: String,
    pub params: usize,
    pub items: Vec<ControlItem>,
}

pub fn run(cfg: &PipelineConfig, args: &ControlArgs) -> CliResult<ControlManifest> {
    let tasks = cfg.tasks_or_default();
    if tasks.is_empty() {
        return Err(CliError::usage("control-forward needs at least one task"));
    }
    let weights = match &args.weights {
        Some(dir) => BlockWeights::<f32>::load(dir)?,
        None => BlockWeights::<f32>::init(cfg.control.clone(), cfg.seed())?,
    };
    if let Some(dir) = &args.save_weights {
        weights.save(dir)?;
    }
    let timestep = cfg.timestep.unwrap_or(0);
    let paths = list_images(cfg.input()?)?;
    check_unique_stems(&paths)?;
    let out = cfg.output()?;
    ensure_dir(out)?;
    let psf = if tasks.contains(&TaskKind::Blur) {
        Some(psf_source(cfg)?.ok_or_else(|| restorekit::Error::Config("blur cues need --psf".into()))?)
    } else {
        None
    };

    let items = par_map(cfg, &paths, |path| {
        let kernel = psf_for(cfg, psf.as_ref(), path)?
            .map(|s| s.kernel::<f32>())
            .transpose()?;
        let img = load_image::<f32>(path)?;
        let cues = extract_cues(&img, &tasks, &cfg.cue_params, kernel.as_ref())?;
        let fwd = control_forward(&img, &cues, &weights, timestep, &cfg.switches)?;
        let report: ControlReport = fwd.report(&weights.init)?;
        let name = format!("{}.json", stem(path));
        write_json(&out.join(&name), &report)?;
        Ok(ControlItem {
            input: file_name(path),
            report: name,
        })
    })?;

    let manifest = ControlManifest {
        command: "control-forward".into(),
        version: version(),
        config_hash: cfg.hash("control-forward"),
        params: weights.param_count(),
        items,
    };
    write_json(&out.join(MANIFEST), &manifest)?;
    Ok(manifest)
}
