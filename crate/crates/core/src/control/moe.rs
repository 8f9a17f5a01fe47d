//! Task-aware mixture adapter and the modulated convolution it relies on.

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::tensor::{affine, channel_mean, conv2d, spatial_mean, FeatureMap, Tensor};
use super::weights::BlockWeights;

pub const DEMOD_EPS: f64 = 1e-8;

/// 3×3 convolution whose weights are scaled per input channel by `style`
/// and then renormalized per output channel by `1/√(Σ w′² + ε)`.
pub fn mod_conv_with_style<T: Real>(x: &FeatureMap<T>, style: &[T], weight: &Tensor<T>) -> Result<FeatureMap<T>> {
    let [co, ci, kh, kw] = weight.shape[..] else {
        return Err(Error::Size(format!("modulated conv weight must be 4-D, got {:?}", weight.shape)));
    };
    if style.len() != ci {
        return Err(Error::Size(format!("style has {} entries for {ci} input channels", style.len())));
    }
    let per_in = kh * kw;
    let per_out = ci * per_in;
    let mut wm = weight.data.clone();
    for o in 0..co {
        let row = &mut wm[o * per_out..(o + 1) * per_out];
        for (i, s) in style.iter().enumerate() {
            for v in &mut row[i * per_in..(i + 1) * per_in] {
                *v *= *s;
            }
        }
        let ss: f64 = row.iter().map(|v| v.as_f64().powi(2)).sum();
        let d = T::lit(1.0 / (ss + DEMOD_EPS).sqrt());
        row.iter_mut().for_each(|v| *v *= d);
    }
    let modulated = Tensor::new(weight.shape.clone(), wm)?;
    conv2d(x, &modulated, None, 1)
}

/// Style `s = affine(p)` from the task embedding, then [`mod_conv_with_style`].
pub fn mod_conv<T: Real>(x: &FeatureMap<T>, embedding: &[T], j: usize, w: &BlockWeights<T>) -> Result<FeatureMap<T>> {
    if embedding.len() != w.config.embed_dim {
        return Err(Error::config(format!(
            "task embedding has {} values, expected {}",
            embedding.len(),
            w.config.embed_dim
        )));
    }
    let style = affine(
        w.get(&format!("moe.l{j}.style.w"))?,
        embedding,
        Some(w.get(&format!("moe.l{j}.style.b"))?),
    )?;
    mod_conv_with_style(x, &style, w.get(&format!("moe.l{j}.conv.w"))?)
}

/// `SConv(M) · DConv(M)` broadcast to `M`'s shape: spatial mean per channel
/// times channel mean per pixel.
pub fn separable_gate<T: Real>(m: &FeatureMap<T>) -> FeatureMap<T> {
    let s = spatial_mean(m);
    let d = channel_mean(m);
    let c = m.channels;
    let data = (0..m.height * m.width)
        .flat_map(|p| {
            let dp = d[p];
            s.iter().map(move |sv| *sv * dp)
        })
        .collect::<Vec<_>>();
    debug_assert_eq!(data.len(), m.data.len());
    FeatureMap {
        data,
        channels: c,
        ..m.clone()
    }
}

/// Gate `w_h(C_h, p_h)` for one task.
pub fn moe_weight<T: Real>(c: &FeatureMap<T>, embedding: &[T], j: usize, w: &BlockWeights<T>) -> Result<FeatureMap<T>> {
    Ok(separable_gate(&mod_conv(c, embedding, j, w)?))
}

#[derive(Clone, Copy, Debug)]
pub struct MoeInput<'a, T> {
    pub control: &'a FeatureMap<T>,
    pub embedding: &'a [T],
    pub switch: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MoeOutput<T> {
    pub tensor: FeatureMap<T>,
    /// Set when no task was switched on; `tensor` is then all zeros.
    pub empty: bool,
}

/// `Σ_h S_h · w_h ⊙ C_h`, summed in input order.
pub fn moe_adapter<T: Real>(inputs: &[MoeInput<'_, T>], j: usize, w: &BlockWeights<T>) -> Result<MoeOutput<T>> {
    let first = inputs.first().ok_or_else(|| Error::domain("mixture adapter needs at least one task"))?;
    if inputs.iter().any(|i| !i.control.same_shape(first.control)) {
        return Err(Error::domain("mixture inputs differ in shape"));
    }
    let c0 = first.control;
    let mut acc: Option<FeatureMap<T>> = None;
    for inp in inputs.iter().filter(|i| i.switch) {
        let gate = moe_weight(inp.control, inp.embedding, j, w)?;
        let term = gate.zip_map(inp.control, |g, c| g * c)?;
        acc = Some(match acc {
            None => term,
            Some(a) => a.add(&term)?,
        });
    }
    Ok(match acc {
        Some(tensor) => MoeOutput { tensor, empty: false },
        None => MoeOutput {
            tensor: FeatureMap::zeros(c0.level, c0.height, c0.width, c0.channels),
            empty: true,
        },
    })
}
