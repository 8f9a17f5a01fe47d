use restorekit::degrade::{degrade, random_sigma, NoiseParams};
use restorekit::raster::load_image;

use super::{check_unique_stems, item_rng, par_map, psf_for, psf_source};
use crate::config::{file_name, item_seed, PipelineConfig, SigmaSpec};
use crate::error::CliResult;
use crate::fsutil::{ensure_dir, list_images, stem, write_json, write_png16};
use crate::manifest::{version, DegradeItem, DegradeManifest, MANIFEST};

pub fn run(cfg: &PipelineConfig) -> CliResult<DegradeManifest> {
    let paths = list_images(cfg.input()?)?;
    check_unique_stems(&paths)?;
    let out = cfg.output()?;
    let psf = psf_source(cfg)?;
    let base = cfg.recipe.clone().unwrap_or_default();
    if base.is_empty() && psf.is_none() && cfg.sigma.is_none() {
        return Err(restorekit::Error::Config("nothing to apply: give a recipe, --sigma or --psf".into()).into());
    }
    if !base.is_empty() {
        base.validate()?;
    }
    ensure_dir(out)?;

    let items = par_map(cfg, &paths, |path| {
        let name = file_name(path);
        let mut recipe = base.clone();
        if let Some(b) = psf_for(cfg, psf.as_ref(), path)? {
            recipe.blur = Some(b);
        }
        let sigma = match &cfg.sigma {
            Some(SigmaSpec::Fixed(s)) => Some(*s),
            Some(s) if s.is_random() => Some(random_sigma(&mut item_rng(cfg.seed(), "sigma", path))),
            _ => None,
        };
        if let Some(sigma) = sigma {
            let poisson = recipe.noise.is_some_and(|n| n.poisson);
            recipe.noise = Some(NoiseParams { sigma, poisson, seed: 0 });
        }
        let seed = item_seed(cfg.seed(), &name);
        if let Some(n) = recipe.noise.as_mut() {
            n.seed = seed;
        }
        let img = load_image::<f64>(path)?;
        let degraded = degrade(&img, &recipe)?;
        let output = format!("{}.png", stem(path));
        write_png16(&out.join(&output), &degraded)?;
        Ok(DegradeItem {
            input: name,
            output,
            seed,
            recipe,
        })
    })?;

    let manifest = DegradeManifest {
        command: "degrade".into(),
        version: version(),
        config_hash: cfg.hash("degrade"),
        seed: cfg.seed(),
        items,
    };
    write_json(&out.join(MANIFEST), &manifest)?;
    Ok(manifest)
}
