//! Multi-level condition network: one gated primary branch plus residual
//! secondary branches that merge into it at their terminal level.

use crate::cues::{TaskCues, TaskKind};
use crate::error::{Error, Result};
use crate::raster::RasterImage;
use crate::scalar::Real;

use super::tensor::{channel_attention, conv2d, simple_gate, silu, FeatureMap};
use super::weights::BlockWeights;

fn stem<T: Real>(x: &RasterImage<T>, prefix: &str, w: &BlockWeights<T>) -> Result<FeatureMap<T>> {
    conv2d(
        &FeatureMap::from_image(x),
        w.get(&format!("{prefix}.stem.w"))?,
        Some(w.get(&format!("{prefix}.stem.b"))?),
        1,
    )
}

/// Gated primary block: stride-2 conv to twice the width, channel-split
/// gate, channel attention, 1×1 projection.
pub fn primary_block<T: Real>(x: &FeatureMap<T>, prefix: &str, w: &BlockWeights<T>) -> Result<FeatureMap<T>> {
    let t = |s: &str| w.get(&format!("{prefix}.{s}"));
    let y = conv2d(x, t("conv.w")?, Some(t("conv.b")?), 2)?;
    let y = simple_gate(&y)?;
    let y = channel_attention(&y, t("sca.w")?, t("sca.b")?)?;
    conv2d(&y, t("proj.w")?, Some(t("proj.b")?), 1)
}

/// Residual block with a stride-2 entry conv: `d + conv(silu(conv(d)))`.
pub fn residual_block<T: Real>(x: &FeatureMap<T>, prefix: &str, w: &BlockWeights<T>) -> Result<FeatureMap<T>> {
    let t = |s: &str| w.get(&format!("{prefix}.{s}"));
    let d = conv2d(x, t("down.w")?, Some(t("down.b")?), 2)?;
    let r = conv2d(&d, t("res1.w")?, Some(t("res1.b")?), 1)?;
    let r = conv2d(&silu(&r), t("res2.w")?, Some(t("res2.b")?), 1)?;
    d.add(&r)
}

/// Runs the condition network for `task` on a primary cue and its
/// secondaries, returning the level-`L` primary features `C⁰`.
pub fn mlcn_forward_images<T: Real>(
    task: TaskKind,
    primary: &RasterImage<T>,
    secondaries: &[&RasterImage<T>],
    w: &BlockWeights<T>,
) -> Result<FeatureMap<T>> {
    let cfg = &w.config;
    if secondaries.len() > task.max_secondaries() {
        return Err(Error::config(format!(
            "{task} takes at most {} secondary cues, got {}",
            task.max_secondaries(),
            secondaries.len()
        )));
    }
    if secondaries.iter().any(|s| !s.same_spatial(primary)) {
        return Err(Error::domain("secondary cues must match the primary's size"));
    }
    let terminals: Vec<usize> = (1..=secondaries.len()).map(|r| cfg.terminal(r)).collect::<Result<_>>()?;

    let base = format!("mlcn.{task}");
    let mut x0 = stem(primary, &format!("{base}.b0"), w)?;
    let mut xs: Vec<FeatureMap<T>> = secondaries
        .iter()
        .enumerate()
        .map(|(i, s)| stem(s, &format!("{base}.b{}", i + 1), w))
        .collect::<Result<_>>()?;

    for j in 1..=cfg.levels {
        let next = primary_block(&x0, &format!("{base}.b0.l{j}"), w)?;
        let mut merged: Option<FeatureMap<T>> = None;
        for (i, x) in xs.iter_mut().enumerate() {
            if terminals[i] < j {
                continue;
            }
            let y = residual_block(x, &format!("{base}.b{}.l{j}", i + 1), w)?;
            if terminals[i] == j {
                merged = Some(match merged {
                    None => y.clone(),
                    Some(m) => m.add(&y)?,
                });
            }
            *x = y;
        }
        x0 = match merged {
            None => next,
            Some(m) => next.add(&m)?,
        };
    }
    Ok(x0)
}

/// [`mlcn_forward_images`] on a cue bundle.
pub fn mlcn_forward<T: Real>(task: TaskKind, cues: &TaskCues<T>, w: &BlockWeights<T>) -> Result<FeatureMap<T>> {
    let secs: Vec<&RasterImage<T>> = cues.secondaries.iter().map(|c| &c.image).collect();
    mlcn_forward_images(task, &cues.primary.image, &secs, w)
}
