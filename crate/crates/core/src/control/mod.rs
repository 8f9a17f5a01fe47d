//! Forward-only toy control network: condition encoders per task, shared
//! control stepping and a switch-gated mixture of task controls.

mod embed;
mod mlcn;
mod moe;
mod stack;
mod tensor;
mod weights;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cues::{CueSet, TaskKind};
use crate::error::{Error, Result};
use crate::raster::RasterImage;
use crate::scalar::Real;

pub use embed::{image_embedding, pseudo_embedding, task_embedding, timestep_encoding};
pub use mlcn::{mlcn_forward, mlcn_forward_images, primary_block, residual_block};
pub use moe::{mod_conv, mod_conv_with_style, moe_adapter, moe_weight, separable_gate, MoeInput, MoeOutput, DEMOD_EPS};
pub use stack::{control_encoder, control_step, residual_controls, task_block, tsu, tsu_on_average, ControlStack};
pub use tensor::{
    add_channel_bias, affine, channel_attention, channel_mean, conv2d, depthwise3x3, group_norm, pool2, scale_channels,
    silu, simple_gate, spatial_mean, FeatureMap, FeatureStats, Tensor, GN_EPS,
};
pub use weights::{
    is_zero_conv, orthogonal, BlockWeights, ControlConfig, InitDescriptor, EMBED_DIM, INIT_SCHEME, TIME_DIM,
    WEIGHTS_BIN, WEIGHTS_JSON,
};

/// Full stack plus the mixture output at every control level.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlForward<T> {
    pub stack: ControlStack<T>,
    pub moe: Vec<MoeOutput<T>>,
}

/// Condition networks for every task in `cues`, `control_levels` shared
/// steps, then the mixture adapter at each level. Tasks absent from
/// `switches` stay on.
pub fn control_forward<T: Real>(
    image: &RasterImage<T>,
    cues: &CueSet<T>,
    w: &BlockWeights<T>,
    timestep: u64,
    switches: &BTreeMap<TaskKind, bool>,
) -> Result<ControlForward<T>> {
    let tasks: Vec<TaskKind> = cues.tasks().collect();
    if tasks.is_empty() {
        return Err(Error::config("no cue bundles to encode"));
    }
    if let Some(t) = tasks.iter().find(|t| !w.config.tasks.contains(t)) {
        return Err(Error::config(format!("weights have no branch for task {t}")));
    }
    let levels = w.config.levels;
    let encoded: Vec<(TaskKind, Result<FeatureMap<T>>)> = tasks
        .par_iter()
        .map(|&t| (t, mlcn_forward(t, cues.get(t).expect("listed task"), w)))
        .collect();
    let mut initial = BTreeMap::new();
    for (t, c) in encoded {
        initial.insert(t, c?.with_level(levels));
    }
    let mut stack = ControlStack::new(initial, timestep);
    for t in &tasks {
        stack.task_embeddings.insert(*t, task_embedding(*t));
        if let Some(&s) = switches.get(t) {
            stack.switches.insert(*t, s);
        }
    }
    stack.image_embedding = Some(image_embedding(image));
    for j in 0..w.config.control_levels {
        control_step(&mut stack, j, w)?;
    }
    let moe = (0..=w.config.control_levels)
        .map(|j| {
            let level = stack.level(j)?;
            let inputs: Vec<MoeInput<'_, T>> = level
                .iter()
                .map(|(t, c)| MoeInput {
                    control: *c,
                    embedding: &stack.task_embeddings[t],
                    switch: stack.switches[t],
                })
                .collect();
            moe_adapter(&inputs, j, w)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ControlForward { stack, moe })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub level: usize,
    pub shape: [usize; 3],
    pub tasks: BTreeMap<TaskKind, FeatureStats>,
    pub moe: FeatureStats,
    pub moe_empty: bool,
}

/// Per-level summary statistics of a forward pass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlReport {
    pub init: InitDescriptor,
    pub timestep: u64,
    pub switches: BTreeMap<TaskKind, bool>,
    pub levels: Vec<LevelReport>,
}

impl<T: Real> ControlForward<T> {
    pub fn report(&self, init: &InitDescriptor) -> Result<ControlReport> {
        let levels = self
            .moe
            .iter()
            .enumerate()
            .map(|(j, m)| {
                let level = self.stack.level(j)?;
                let c = level[0].1;
                Ok(LevelReport {
                    level: j,
                    shape: [c.height, c.width, c.channels],
                    tasks: level.iter().map(|(t, c)| (*t, c.stats())).collect(),
                    moe: m.tensor.stats(),
                    moe_empty: m.empty,
                })
            })
            .collect::<Result<_>>()?;
        Ok(ControlReport {
            init: init.clone(),
            timestep: self.stack.timestep,
            switches: self.stack.switches.clone(),
            levels,
        })
    }
}
