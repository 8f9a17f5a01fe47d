pub mod control;
pub mod cues;
pub mod degrade;
pub mod evaluate;
pub mod grid;
pub mod restore;
pub mod schedule;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use restorekit::degrade::BlurSpec;

use crate::config::{file_name, item_seed, PipelineConfig, PsfSource};
use crate::error::{CliError, CliResult};
use crate::fsutil::stem;

/// Runs `f` on every path inside the configured pool; results keep input
/// order and the first failure (in input order) wins.
pub(crate) fn par_map<R: Send>(
    cfg: &PipelineConfig,
    paths: &[PathBuf],
    f: impl Fn(&Path) -> CliResult<R> + Sync,
) -> CliResult<Vec<R>> {
    let pool = cfg.pool()?;
    let results: Vec<CliResult<R>> = pool.install(|| paths.par_iter().map(|p| f(p)).collect());
    results.into_iter().collect()
}

/// Output names are derived from stems, so two inputs may not share one.
pub(crate) fn check_unique_stems(paths: &[PathBuf]) -> CliResult<()> {
    let mut seen = BTreeMap::new();
    for p in paths {
        if let Some(prev) = seen.insert(stem(p), p) {
            return Err(CliError::usage(format!(
                "{} and {} map to the same output name",
                prev.display(),
                p.display()
            )));
        }
    }
    Ok(())
}

/// Deterministic per-item RNG for random draws (PSFs, noise levels).
pub(crate) fn item_rng(seed: u64, purpose: &str, path: &Path) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(item_seed(seed, &format!("{purpose}:{}", file_name(path))))
}

/// PSF for one image under the configured source, if any.
pub(crate) fn psf_for(cfg: &PipelineConfig, source: Option<&PsfSource>, path: &Path) -> CliResult<Option<BlurSpec>> {
    let Some(source) = source else { return Ok(None) };
    Ok(match source {
        PsfSource::Random => Some(BlurSpec::random(&mut item_rng(cfg.seed(), "psf", path))),
        other => {
            let name = file_name(path);
            let spec = other.lookup(&name);
            if spec.is_none() {
                return Err(restorekit::Error::Config(format!("PSF manifest has no blur entry for {name}")).into());
            }
            spec
        }
    })
}

pub(crate) fn psf_source(cfg: &PipelineConfig) -> CliResult<Option<PsfSource>> {
    cfg.psf.as_deref().map(PsfSource::parse).transpose()
}
