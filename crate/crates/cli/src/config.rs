//! Effective run configuration: config file merged with flags, plus the
//! derived seeds and hashes recorded in manifests.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use restorekit::control::ControlConfig;
use restorekit::cues::{parse_tasks, CueParams, TaskKind};
use restorekit::degrade::{BlurSpec, DegradationRecipe};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::args::CommonArgs;
use crate::error::{CliError, CliResult};

pub const DEFAULT_SEED: u64 = 0;

/// Noise level for `degrade`: fixed, or drawn per image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SigmaSpec {
    Fixed(f64),
    Named(String),
}

impl SigmaSpec {
    pub fn parse(s: &str) -> CliResult<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("random") {
            return Ok(SigmaSpec::Named("random".into()));
        }
        s.parse::<f64>()
            .map(SigmaSpec::Fixed)
            .map_err(|_| CliError::Core(restorekit::Error::Config(format!("--sigma expects a number or `random`, got {s:?}"))))
    }

    pub fn is_random(&self) -> bool {
        matches!(self, SigmaSpec::Named(n) if n == "random")
    }
}

/// Everything a run can be configured with. Paths and worker count never
/// affect output bytes and are excluded from the config hash.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub ground_truth: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub tasks: Option<Vec<TaskKind>>,
    pub sigma: Option<SigmaSpec>,
    pub psf: Option<String>,
    pub recipe: Option<DegradationRecipe>,
    pub recipe_file: Option<PathBuf>,
    pub cue_params: CueParams,
    pub control: ControlConfig,
    pub timestep: Option<u64>,
    pub switches: BTreeMap<TaskKind, bool>,
}

impl PipelineConfig {
    /// Reads `--config` (if any) and applies every flag on top.
    pub fn resolve(args: &CommonArgs) -> CliResult<Self> {
        let mut cfg = match &args.config {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(CliError::io(p))?;
                serde_json::from_str::<PipelineConfig>(&text).map_err(|e| {
                    CliError::Core(restorekit::Error::Config(format!("{}: {e}", p.display())))
                })?
            }
            None => PipelineConfig::default(),
        };
        if let Some(v) = &args.input {
            cfg.input = Some(v.clone());
        }
        if let Some(v) = &args.output {
            cfg.output = Some(v.clone());
        }
        if let Some(v) = &args.ground_truth {
            cfg.ground_truth = Some(v.clone());
        }
        if let Some(v) = args.seed {
            cfg.seed = Some(v);
        }
        if let Some(v) = args.workers {
            cfg.workers = Some(v);
        }
        if let Some(v) = &args.tasks {
            cfg.tasks = Some(if v.trim().eq_ignore_ascii_case("none") {
                Vec::new()
            } else {
                parse_tasks(v)?
            });
        }
        if let Some(v) = &args.sigma {
            cfg.sigma = Some(SigmaSpec::parse(v)?);
        }
        if let Some(v) = &args.psf {
            cfg.psf = Some(v.to_string_lossy().into_owned());
        }
        if let Some(v) = &args.recipe {
            cfg.recipe_file = Some(v.clone());
            cfg.recipe = None;
        }
        if let Some(p) = cfg.recipe_file.clone() {
            cfg.recipe = Some(load_recipe(&p)?);
        }
        if let Some(s) = &cfg.sigma {
            if !s.is_random() && !matches!(s, SigmaSpec::Fixed(_)) {
                return Err(restorekit::Error::Config("sigma must be a number or `random`".into()).into());
            }
        }
        Ok(cfg)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn input(&self) -> CliResult<&Path> {
        self.input.as_deref().ok_or_else(|| CliError::usage("--input is required"))
    }

    pub fn output(&self) -> CliResult<&Path> {
        self.output.as_deref().ok_or_else(|| CliError::usage("--output is required"))
    }

    /// Requested tasks; defaults to every task whose inputs are available
    /// (blur only when a PSF source is configured).
    pub fn tasks_or_default(&self) -> Vec<TaskKind> {
        match &self.tasks {
            Some(t) => t.clone(),
            None => TaskKind::ALL
                .into_iter()
                .filter(|t| *t != TaskKind::Blur || self.psf.is_some())
                .collect(),
        }
    }

    /// SHA-256 of the configuration minus paths and worker count.
    pub fn hash(&self, command: &str) -> String {
        let mut c = self.clone();
        c.input = None;
        c.output = None;
        c.ground_truth = None;
        c.workers = None;
        c.recipe_file = None;
        if let Some(p) = &c.psf {
            if PsfSource::looks_like_path(p) {
                c.psf = Some(file_name(Path::new(p)));
            }
        }
        let mut h = Sha256::new();
        h.update(command.as_bytes());
        h.update(serde_json::to_vec(&c).expect("config serializes"));
        hex(&h.finalize())
    }

    /// Bounded pool; `0` or unset means one thread per core.
    pub fn pool(&self) -> CliResult<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers.unwrap_or(0))
            .build()
            .map_err(|e| CliError::usage(format!("cannot start worker pool: {e}")))
    }
}

pub fn load_recipe(path: &Path) -> CliResult<DegradationRecipe> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    Ok(if is_json {
        DegradationRecipe::from_json(&text)?
    } else {
        DegradationRecipe::from_kv(&text)?
    })
}

/// Where blur kernels come from.
#[derive(Clone, Debug)]
pub enum PsfSource {
    Spec(BlurSpec),
    Random,
    /// Per-file PSFs from a degrade manifest, keyed by output file name.
    Manifest(BTreeMap<String, Option<BlurSpec>>),
}

impl PsfSource {
    fn looks_like_path(s: &str) -> bool {
        s.ends_with(".json") || s.contains('/') || Path::new(s).exists()
    }

    pub fn parse(s: &str) -> CliResult<Self> {
        if s.trim().eq_ignore_ascii_case("random") {
            return Ok(PsfSource::Random);
        }
        if Self::looks_like_path(s) {
            let path = Path::new(s);
            let text = fs::read_to_string(path).map_err(CliError::io(path))?;
            let manifest: crate::manifest::DegradeManifest = serde_json::from_str(&text).map_err(|e| {
                CliError::Core(restorekit::Error::Config(format!("{s}: not a degrade manifest: {e}")))
            })?;
            return Ok(PsfSource::Manifest(
                manifest.items.into_iter().map(|i| (i.output, i.recipe.blur)).collect(),
            ));
        }
        Ok(PsfSource::Spec(s.parse()?))
    }

    /// Kernel for `name`, or `None` when the source has no entry for it.
    pub fn lookup(&self, name: &str) -> Option<BlurSpec> {
        match self {
            PsfSource::Spec(b) => Some(b.clone()),
            PsfSource::Random => None,
            PsfSource::Manifest(m) => m.get(name).cloned().flatten(),
        }
    }
}

/// Per-item seed: SHA-256 of the run seed and the file name.
pub fn item_seed(seed: u64, name: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(b"item");
    h.update(seed.to_le_bytes());
    h.update(name.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

pub fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigma_parsing() {
        assert_eq!(SigmaSpec::parse("0.1").unwrap(), SigmaSpec::Fixed(0.1));
        assert!(SigmaSpec::parse("Random").unwrap().is_random());
        assert!(SigmaSpec::parse("lots").is_err());
    }

    #[test]
    fn partial_nested_config_fills_defaults() {
        let cfg: PipelineConfig = serde_json::from_str(
            r#"{"seed": 7, "tasks": ["haze", "noise"], "sigma": 0.02,
                "cue_params": {"dehaze": {"omega": 0.9}},
                "control": {"widths": [16, 32, 64], "levels": 2},
                "switches": {"dark": false}}"#,
        )
        .unwrap();
        assert_eq!(cfg.cue_params.dehaze.omega, 0.9);
        assert_eq!(cfg.cue_params.dehaze.patch_radius, CueParams::default().dehaze.patch_radius);
        assert_eq!(cfg.control.control_levels, ControlConfig::default().control_levels);
        assert_eq!(cfg.sigma, Some(SigmaSpec::Fixed(0.02)));
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"sede": 1}"#).is_err());
    }

    #[test]
    fn item_seeds_differ_by_name_and_seed() {
        assert_eq!(item_seed(1, "a.png"), item_seed(1, "a.png"));
        assert_ne!(item_seed(1, "a.png"), item_seed(1, "b.png"));
        assert_ne!(item_seed(1, "a.png"), item_seed(2, "a.png"));
    }

    #[test]
    fn hash_ignores_paths_and_workers() {
        let a = PipelineConfig {
            input: Some("x".into()),
            workers: Some(1),
            seed: Some(3),
            ..Default::default()
        };
        let b = PipelineConfig {
            input: Some("y".into()),
            workers: Some(8),
            seed: Some(3),
            ..Default::default()
        };
        assert_eq!(a.hash("degrade"), b.hash("degrade"));
        assert_ne!(a.hash("degrade"), a.hash("restore"));
        let c = PipelineConfig { seed: Some(4), ..b };
        assert_ne!(a.hash("degrade"), c.hash("degrade"));
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        fs::write(&path, r#"{"seed": 5, "tasks": ["haze"], "workers": 2}"#).unwrap();
        let args = CommonArgs {
            config: Some(path.clone()),
            seed: Some(9),
            ..Default::default()
        };
        let cfg = PipelineConfig::resolve(&args).unwrap();
        assert_eq!(cfg.seed(), 9);
        assert_eq!(cfg.tasks_or_default(), vec![TaskKind::Haze]);
        assert_eq!(cfg.workers, Some(2));
        fs::write(&path, r#"{"bogus": 1}"#).unwrap();
        let err = PipelineConfig::resolve(&args).unwrap_err();
        assert_eq!(err.exit_code(), crate::error::EXIT_CONFIG);
    }

    #[test]
    fn default_tasks_need_psf_for_blur() {
        let mut cfg = PipelineConfig::default();
        assert!(!cfg.tasks_or_default().contains(&TaskKind::Blur));
        cfg.psf = Some("gaussian:1".into());
        assert!(cfg.tasks_or_default().contains(&TaskKind::Blur));
    }
}
