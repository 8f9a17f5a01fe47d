//! Low-level restoration cues: one primary estimate and a few structural
//! guidance maps per degradation task.

mod color;
mod dehaze;
mod diffusion;
mod guided;
mod shock;
mod wiener;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{load_image, save_image, BitDepth, Kernel2D, RasterImage};
use crate::scalar::Real;

pub use color::{clahe, color_map, color_map_raw, equalize_global, CLAHE_BINS};
pub use dehaze::{
    dark_channel, dehaze_estimate, estimate_atmospheric_light, refine_transmission, transmission_map,
    TransmissionMap,
};
pub use diffusion::{conduction, perona_malik, pm_edge_map, PM_MAX_DT};
pub use guided::guided_filter;
pub use shock::{shock_filter, ShockOutput};
pub use wiener::wiener_deconvolve;

/// Degradation task a cue bundle targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Haze,
    Blur,
    Dark,
    Noise,
}

impl TaskKind {
    pub const ALL: [TaskKind; 4] = [TaskKind::Haze, TaskKind::Blur, TaskKind::Dark, TaskKind::Noise];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Haze => "haze",
            TaskKind::Blur => "blur",
            TaskKind::Dark => "dark",
            TaskKind::Noise => "noise",
        }
    }

    /// Upper bound on secondary cues for this task.
    pub fn max_secondaries(self) -> usize {
        match self {
            TaskKind::Blur => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "haze" | "h" => Ok(TaskKind::Haze),
            "blur" | "b" => Ok(TaskKind::Blur),
            "dark" | "d" | "lowlight" | "low-light" => Ok(TaskKind::Dark),
            "noise" | "eta" | "η" | "n" => Ok(TaskKind::Noise),
            other => Err(Error::config(format!("unknown task `{other}`"))),
        }
    }
}

/// Parses a comma-separated task list; `all` expands to every task.
pub fn parse_tasks(s: &str) -> Result<Vec<TaskKind>> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(TaskKind::ALL.to_vec());
    }
    let mut out: Vec<TaskKind> = s
        .split(',')
        .filter(|p| !p.trim().is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    out.sort();
    out.dedup();
    if out.is_empty() {
        return Err(Error::config("task list is empty"));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DehazeParams {
    pub omega: f64,
    pub patch_radius: usize,
    pub t_floor: f64,
    pub top_fraction: f64,
    pub guided_radius: usize,
    pub guided_eps: f64,
}

impl Default for DehazeParams {
    fn default() -> Self {
        Self {
            omega: 0.95,
            patch_radius: 7,
            t_floor: 0.1,
            top_fraction: 0.001,
            guided_radius: 15,
            guided_eps: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShockParams {
    pub dt: f64,
    pub iters: usize,
    pub edge_threshold: f64,
}

impl Default for ShockParams {
    fn default() -> Self {
        Self {
            dt: 0.25,
            iters: 10,
            edge_threshold: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiffusionParams {
    pub k: f64,
    pub dt: f64,
    pub iters: usize,
    pub k_small: f64,
    pub k_large: f64,
}

impl Default for DiffusionParams {
    fn default() -> Self {
        Self {
            k: 0.1,
            dt: 0.2,
            iters: 10,
            k_small: 0.03,
            k_large: 0.3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContrastParams {
    pub tiles: usize,
    pub clip_limit: f64,
    pub color_eps: f64,
}

impl Default for ContrastParams {
    fn default() -> Self {
        Self {
            tiles: 8,
            clip_limit: 2.0,
            color_eps: 1e-6,
        }
    }
}

/// Every tunable used by [`extract_cues`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CueParams {
    pub dehaze: DehazeParams,
    pub shock: ShockParams,
    pub diffusion: DiffusionParams,
    pub contrast: ContrastParams,
    pub wiener_k: WienerK,
}

/// Wiener regularizer, wrapped so it can carry its own default.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WienerK(pub f64);

impl Default for WienerK {
    fn default() -> Self {
        WienerK(1e-3)
    }
}

/// Airlight, refined transmission and haze-free estimate.
pub struct DehazeResult<T> {
    pub airlight: [T; 3],
    pub transmission: TransmissionMap<T>,
    pub estimate: RasterImage<T>,
}

/// Lower bound applied to each estimated airlight channel, so scenes whose
/// haziest pixels have a black channel do not divide by zero.
pub const AIRLIGHT_FLOOR: f64 = 1e-3;

/// Full dark-channel pipeline on a 3-channel image.
pub fn dehaze<T: Real>(img: &RasterImage<T>, p: &DehazeParams) -> Result<DehazeResult<T>> {
    let dark = dark_channel(img, p.patch_radius)?;
    let airlight = estimate_atmospheric_light(img, &dark, p.top_fraction)?.map(|a| a.max(T::lit(AIRLIGHT_FLOOR)));
    let raw = transmission_map(img, airlight, p.omega, p.patch_radius, p.t_floor)?;
    let transmission = refine_transmission(img, &raw, p.guided_radius, p.guided_eps)?;
    let estimate = dehaze_estimate(img, &transmission, airlight, p.t_floor)?;
    Ok(DehazeResult {
        airlight,
        transmission,
        estimate,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cue<T> {
    pub name: String,
    pub image: RasterImage<T>,
}

impl<T> Cue<T> {
    fn new(name: &str, image: RasterImage<T>) -> Self {
        Self {
            name: name.to_string(),
            image,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskCues<T> {
    pub primary: Cue<T>,
    pub secondaries: Vec<Cue<T>>,
}

/// Cue bundles keyed by task, all sharing the source image's size.
#[derive(Clone, Debug, PartialEq)]
pub struct CueSet<T> {
    height: usize,
    width: usize,
    tasks: BTreeMap<TaskKind, TaskCues<T>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    task: TaskKind,
    rank: usize,
    name: String,
    file: String,
    channels: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct CueManifest {
    height: usize,
    width: usize,
    #[serde(default)]
    params: Option<CueParams>,
    entries: Vec<ManifestEntry>,
}

pub const CUE_MANIFEST: &str = "manifest.json";

impl<T: Real> CueSet<T> {
    pub fn new(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            tasks: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, task: TaskKind, cues: TaskCues<T>) -> Result<()> {
        if cues.secondaries.len() > task.max_secondaries() {
            return Err(Error::domain(format!(
                "{task} allows at most {} secondary cues, got {}",
                task.max_secondaries(),
                cues.secondaries.len()
            )));
        }
        for cue in std::iter::once(&cues.primary).chain(&cues.secondaries) {
            if cue.image.height() != self.height || cue.image.width() != self.width {
                return Err(Error::domain(format!(
                    "cue `{}` is {}x{}, expected {}x{}",
                    cue.name,
                    cue.image.height(),
                    cue.image.width(),
                    self.height,
                    self.width
                )));
            }
        }
        self.tasks.insert(task, cues);
        Ok(())
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, task: TaskKind) -> Option<&TaskCues<T>> {
        self.tasks.get(&task)
    }

    pub fn tasks(&self) -> impl Iterator<Item = TaskKind> + '_ {
        self.tasks.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (TaskKind, &TaskCues<T>)> {
        self.tasks.iter().map(|(k, v)| (*k, v))
    }

    pub fn primary_count(&self) -> usize {
        self.tasks.len()
    }

    pub fn secondary_count(&self) -> usize {
        self.tasks.values().map(|t| t.secondaries.len()).sum()
    }

    /// Writes one 16-bit PNG per cue plus a JSON manifest.
    pub fn save_dir(&self, dir: &Path, params: Option<&CueParams>) -> Result<()> {
        fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let mut entries = Vec::new();
        for (task, cues) in &self.tasks {
            for (rank, cue) in std::iter::once(&cues.primary).chain(&cues.secondaries).enumerate() {
                let file = format!("{task}_{rank}_{}.png", cue.name);
                save_image(&cue.image, &dir.join(&file), BitDepth::Sixteen)?;
                entries.push(ManifestEntry {
                    task: *task,
                    rank,
                    name: cue.name.clone(),
                    file,
                    channels: cue.image.channels(),
                });
            }
        }
        let manifest = CueManifest {
            height: self.height,
            width: self.width,
            params: params.cloned(),
            entries,
        };
        let path = dir.join(CUE_MANIFEST);
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))?;
        fs::write(&path, text).map_err(|source| Error::Io { path, source })
    }

    /// Reads a directory written by [`CueSet::save_dir`].
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let path = dir.join(CUE_MANIFEST);
        let text = fs::read_to_string(&path).map_err(|source| Error::Io { path, source })?;
        let manifest: CueManifest =
            serde_json::from_str(&text).map_err(|e| Error::Format(format!("cue manifest: {e}")))?;
        let mut grouped: BTreeMap<TaskKind, Vec<(usize, Cue<T>)>> = BTreeMap::new();
        for e in manifest.entries {
            let mut image = load_image::<T>(&dir.join(&e.file))?;
            if image.channels() != e.channels {
                image = if e.channels == 1 { image.luminance() } else { image.to_rgb() };
            }
            grouped.entry(e.task).or_default().push((e.rank, Cue::new(&e.name, image)));
        }
        let mut set = CueSet::new(manifest.height, manifest.width);
        for (task, mut cues) in grouped {
            cues.sort_by_key(|(r, _)| *r);
            let mut it = cues.into_iter().map(|(_, c)| c);
            let primary = it
                .next()
                .ok_or_else(|| Error::Format(format!("task {task} has no cues")))?;
            set.insert(
                task,
                TaskCues {
                    primary,
                    secondaries: it.collect(),
                },
            )?;
        }
        Ok(set)
    }
}

fn extract_one<T: Real>(
    img: &RasterImage<T>,
    task: TaskKind,
    p: &CueParams,
    psf: Option<&Kernel2D<T>>,
) -> Result<TaskCues<T>> {
    Ok(match task {
        TaskKind::Haze => {
            let r = dehaze(&img.to_rgb(), &p.dehaze)?;
            TaskCues {
                primary: Cue::new("dehaze", r.estimate),
                secondaries: vec![Cue::new("transmission", r.transmission.into_image())],
            }
        }
        TaskKind::Blur => {
            let psf = psf.ok_or_else(|| Error::config("blur cues need a PSF"))?;
            let deconv = wiener_deconvolve(img, psf, p.wiener_k.0)?.clamp01();
            let s = shock_filter(img, p.shock.dt, p.shock.iters, p.shock.edge_threshold)?;
            TaskCues {
                primary: Cue::new("wiener", deconv),
                secondaries: vec![
                    Cue::new("edge_map", s.edge_map),
                    Cue::new("shock_image", s.shock_image.clamp01()),
                ],
            }
        }
        TaskKind::Dark => {
            let rgb = img.to_rgb();
            let c = &p.contrast;
            TaskCues {
                primary: Cue::new("clahe", clahe(&rgb, c.tiles, c.clip_limit)?),
                secondaries: vec![Cue::new("color_map", color_map(&rgb, c.color_eps)?)],
            }
        }
        TaskKind::Noise => {
            let d = &p.diffusion;
            TaskCues {
                primary: Cue::new("perona_malik", perona_malik(img, d.k, d.dt, d.iters)?),
                secondaries: vec![Cue::new(
                    "pm_edge_map",
                    pm_edge_map(img, d.k_small, d.k_large, d.dt, d.iters)?,
                )],
            }
        }
    })
}

/// Extracts the cue bundle of every requested task. Tasks run in parallel;
/// the result does not depend on evaluation order.
pub fn extract_cues<T: Real>(
    img: &RasterImage<T>,
    tasks: &[TaskKind],
    params: &CueParams,
    psf: Option<&Kernel2D<T>>,
) -> Result<CueSet<T>> {
    if tasks.is_empty() {
        return Err(Error::config("no tasks requested"));
    }
    if tasks.contains(&TaskKind::Blur) && psf.is_none() {
        return Err(Error::config("blur cues need a PSF"));
    }
    let mut unique = tasks.to_vec();
    unique.sort();
    unique.dedup();
    let results: Vec<(TaskKind, Result<TaskCues<T>>)> = unique
        .par_iter()
        .map(|&t| (t, extract_one(img, t, params, psf)))
        .collect();
    let mut set = CueSet::new(img.height(), img.width());
    for (task, cues) in results {
        set.insert(task, cues?)?;
    }
    Ok(set)
}
