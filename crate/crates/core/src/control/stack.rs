//! Shared control stepping: task stabilizer, per-task blocks and the shared
//! conditioned encoder.

use std::collections::BTreeMap;

use crate::cues::TaskKind;
use crate::error::{Error, Result};
use crate::scalar::Real;

use super::embed::timestep_encoding;
use super::tensor::{add_channel_bias, affine, channel_attention, conv2d, depthwise3x3, group_norm, pool2, silu, FeatureMap};
use super::weights::BlockWeights;

/// Per-task control tensors `C_h^0..C_h^j` plus conditioning inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlStack<T> {
    pub controls: BTreeMap<TaskKind, Vec<FeatureMap<T>>>,
    pub task_embeddings: BTreeMap<TaskKind, Vec<T>>,
    pub image_embedding: Option<Vec<T>>,
    pub timestep: u64,
    pub switches: BTreeMap<TaskKind, bool>,
}

impl<T: Real> ControlStack<T> {
    /// Stack seeded with level-0 controls; every task starts switched on.
    pub fn new(initial: BTreeMap<TaskKind, FeatureMap<T>>, timestep: u64) -> Self {
        let switches = initial.keys().map(|k| (*k, true)).collect();
        Self {
            controls: initial.into_iter().map(|(k, v)| (k, vec![v])).collect(),
            task_embeddings: BTreeMap::new(),
            image_embedding: None,
            timestep,
            switches,
        }
    }

    /// Number of levels computed for every task.
    pub fn depth(&self) -> usize {
        self.controls.values().map(Vec::len).min().unwrap_or(0)
    }

    pub fn level(&self, j: usize) -> Result<Vec<(TaskKind, &FeatureMap<T>)>> {
        let mut out = Vec::with_capacity(self.controls.len());
        for (task, levels) in &self.controls {
            let c = levels
                .get(j)
                .ok_or_else(|| Error::domain(format!("level {j} not computed for {task}")))?;
            out.push((*task, c));
        }
        if let Some((_, first)) = out.first() {
            if out.iter().any(|(_, c)| !c.same_shape(first)) {
                return Err(Error::domain(format!("tasks disagree on the shape of level {j}")));
            }
        }
        Ok(out)
    }
}

/// `ZC(CAT(Conv(GN(mean_h C_h))))`: shared across tasks at level `j`.
pub fn tsu<T: Real>(controls: &[&FeatureMap<T>], j: usize, w: &BlockWeights<T>) -> Result<FeatureMap<T>> {
    let first = controls.first().ok_or_else(|| Error::domain("task stabilizer needs at least one task"))?;
    let mut avg = (*first).clone();
    for c in &controls[1..] {
        avg = avg.add(c)?;
    }
    if controls.len() > 1 {
        let inv = T::one() / T::lit(controls.len() as f64);
        avg = avg.map(|v| v * inv);
    }
    tsu_on_average(&avg, j, w)
}

/// The stabilizer applied to an already averaged control.
pub fn tsu_on_average<T: Real>(avg: &FeatureMap<T>, j: usize, w: &BlockWeights<T>) -> Result<FeatureMap<T>> {
    let t = |s: &str| w.get(&format!("tsu.l{j}.{s}"));
    let y = group_norm(avg, w.config.groups, t("gn.gamma")?, t("gn.beta")?)?;
    let y = conv2d(&y, t("conv.w")?, Some(t("conv.b")?), 1)?;
    let y = channel_attention(&y, t("sca.w")?, t("sca.b")?)?;
    conv2d(&y, t("zc.w")?, Some(t("zc.b")?), 1)
}

/// `ZC_point(Conv_depth(SiLU(GN(C))))` with per-task weights.
pub fn task_block<T: Real>(c: &FeatureMap<T>, task: TaskKind, j: usize, w: &BlockWeights<T>) -> Result<FeatureMap<T>> {
    let t = |s: &str| w.get(&format!("task.{task}.l{j}.{s}"));
    let y = group_norm(c, w.config.groups, t("gn.gamma")?, t("gn.beta")?)?;
    let y = depthwise3x3(&silu(&y), t("dw.w")?, t("dw.b")?)?;
    conv2d(&y, t("zc.w")?, Some(t("zc.b")?), 1)
}

/// `c_h = C_h + TSU({C}) + TaskBlock_h(C_h)` for every task at level `j`.
pub fn residual_controls<T: Real>(
    stack: &ControlStack<T>,
    j: usize,
    w: &BlockWeights<T>,
) -> Result<BTreeMap<TaskKind, FeatureMap<T>>> {
    let level = stack.level(j)?;
    let all: Vec<&FeatureMap<T>> = level.iter().map(|(_, c)| *c).collect();
    let shared = tsu(&all, j, w)?;
    level
        .into_iter()
        .map(|(task, c)| {
            let tb = task_block(c, task, j, w)?;
            Ok((task, c.add(&shared)?.add(&tb)?))
        })
        .collect()
}

/// Shared encoder `E^j`: conv, additive image-embedding and timestep
/// conditioning per channel, SiLU, 2× pooling.
pub fn control_encoder<T: Real>(
    c: &FeatureMap<T>,
    j: usize,
    image_embedding: &[T],
    timestep: u64,
    w: &BlockWeights<T>,
) -> Result<FeatureMap<T>> {
    let t = |s: &str| w.get(&format!("enc.l{j}.{s}"));
    if image_embedding.len() != w.config.embed_dim {
        return Err(Error::config(format!(
            "image embedding has {} values, expected {}",
            image_embedding.len(),
            w.config.embed_dim
        )));
    }
    let y = conv2d(c, t("conv.w")?, Some(t("conv.b")?), 1)?;
    let e = affine(t("img.w")?, image_embedding, Some(t("cond.b")?))?;
    let te = affine(t("time.w")?, &timestep_encoding(timestep, w.config.time_dim), None)?;
    let cond: Vec<T> = e.iter().zip(&te).map(|(a, b)| *a + *b).collect();
    Ok(pool2(&silu(&add_channel_bias(&y, &cond))))
}

/// Appends level `j + 1` to every task. Level `j` must be the top level.
pub fn control_step<T: Real>(stack: &mut ControlStack<T>, j: usize, w: &BlockWeights<T>) -> Result<()> {
    if j >= w.config.control_levels {
        return Err(Error::config(format!(
            "control level {j} exceeds the configured {} steps",
            w.config.control_levels
        )));
    }
    if stack.depth() != j + 1 {
        return Err(Error::domain(format!("stack holds {} levels, cannot step from {j}", stack.depth())));
    }
    let emb = stack
        .image_embedding
        .clone()
        .ok_or_else(|| Error::config("control step needs an image embedding"))?;
    let residual = residual_controls(stack, j, w)?;
    for (task, c) in residual {
        let next = control_encoder(&c, j, &emb, stack.timestep, w)?;
        stack.controls.get_mut(&task).expect("task present").push(next);
    }
    Ok(())
}
