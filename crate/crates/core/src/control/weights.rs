//! Configuration, deterministic initialization and the tensor archive.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::tensor::Tensor;
use crate::cues::TaskKind;
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const EMBED_DIM: usize = 768;
pub const TIME_DIM: usize = 32;
pub const WEIGHTS_BIN: &str = "weights.bin";
pub const WEIGHTS_JSON: &str = "weights.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControlConfig {
    /// Channel width of encoder levels `0..=levels`.
    pub widths: Vec<usize>,
    /// Number of 2× reductions in the condition network.
    pub levels: usize,
    /// Number of control-encoder steps after the condition network.
    pub control_levels: usize,
    pub embed_dim: usize,
    pub time_dim: usize,
    pub groups: usize,
    /// Merge level of secondary cue `r` (1-based rank) at index `r - 1`.
    pub secondary_terminals: Vec<usize>,
    pub tasks: Vec<TaskKind>,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            widths: vec![16, 32, 64, 128, 256],
            levels: 4,
            control_levels: 2,
            embed_dim: EMBED_DIM,
            time_dim: TIME_DIM,
            groups: 8,
            secondary_terminals: vec![2, 3],
            tasks: TaskKind::ALL.to_vec(),
        }
    }
}

impl ControlConfig {
    pub fn validate(&self) -> Result<()> {
        if self.widths.len() != self.levels + 1 {
            return Err(Error::config(format!(
                "{} widths given for {} levels (need levels + 1)",
                self.widths.len(),
                self.levels
            )));
        }
        if self.levels == 0 {
            return Err(Error::config("condition network needs at least one level"));
        }
        for &w in &self.widths {
            if w == 0 || w % self.groups != 0 || w % 2 != 0 {
                return Err(Error::config(format!(
                    "width {w} must be even and divisible by {} groups",
                    self.groups
                )));
            }
        }
        if self.embed_dim != EMBED_DIM {
            return Err(Error::config(format!("embedding dimension is fixed at {EMBED_DIM}")));
        }
        if self.time_dim == 0 || self.time_dim % 2 != 0 {
            return Err(Error::config("time encoding dimension must be even and > 0"));
        }
        let needed = self.tasks.iter().map(|t| t.max_secondaries()).max().unwrap_or(0);
        if self.secondary_terminals.len() < needed {
            return Err(Error::config(format!(
                "{needed} secondary merge levels needed, {} given",
                self.secondary_terminals.len()
            )));
        }
        for &t in &self.secondary_terminals {
            if t == 0 || t > self.levels {
                return Err(Error::config(format!(
                    "secondary merge level {t} outside 1..={}",
                    self.levels
                )));
            }
        }
        if self.tasks.is_empty() {
            return Err(Error::config("no tasks configured"));
        }
        Ok(())
    }

    /// Channels of every control tensor.
    pub fn control_width(&self) -> usize {
        self.widths[self.levels]
    }

    /// Merge level of the 1-based secondary `rank`.
    pub fn terminal(&self, rank: usize) -> Result<usize> {
        let t = *self
            .secondary_terminals
            .get(rank - 1)
            .ok_or_else(|| Error::config(format!("no merge level for secondary {rank}")))?;
        if t == 0 || t > self.levels {
            return Err(Error::config(format!("secondary merge level {t} outside 1..={}", self.levels)));
        }
        Ok(t)
    }

    /// Every tensor name with its shape, in archive order.
    pub fn layout(&self) -> Result<BTreeMap<String, Vec<usize>>> {
        self.validate()?;
        let mut m = BTreeMap::new();
        let w = &self.widths;
        let c = self.control_width();
        let mut put = |name: String, shape: Vec<usize>| {
            m.insert(name, shape);
        };
        for task in &self.tasks {
            for b in 0..=task.max_secondaries() {
                let p = format!("mlcn.{task}.b{b}");
                put(format!("{p}.stem.w"), vec![w[0], 3, 3, 3]);
                put(format!("{p}.stem.b"), vec![w[0]]);
                let last = if b == 0 { self.levels } else { self.terminal(b)? };
                for j in 1..=last {
                    let (ci, co) = (w[j - 1], w[j]);
                    let q = format!("{p}.l{j}");
                    if b == 0 {
                        put(format!("{q}.conv.w"), vec![2 * co, ci, 3, 3]);
                        put(format!("{q}.conv.b"), vec![2 * co]);
                        put(format!("{q}.sca.w"), vec![co, co]);
                        put(format!("{q}.sca.b"), vec![co]);
                        put(format!("{q}.proj.w"), vec![co, co, 1, 1]);
                        put(format!("{q}.proj.b"), vec![co]);
                    } else {
                        put(format!("{q}.down.w"), vec![co, ci, 3, 3]);
                        put(format!("{q}.down.b"), vec![co]);
                        put(format!("{q}.res1.w"), vec![co, co, 3, 3]);
                        put(format!("{q}.res1.b"), vec![co]);
                        put(format!("{q}.res2.w"), vec![co, co, 3, 3]);
                        put(format!("{q}.res2.b"), vec![co]);
                    }
                }
            }
        }
        for j in 0..self.control_levels {
            let q = format!("tsu.l{j}");
            put(format!("{q}.gn.gamma"), vec![c]);
            put(format!("{q}.gn.beta"), vec![c]);
            put(format!("{q}.conv.w"), vec![c / 2, c, 3, 3]);
            put(format!("{q}.conv.b"), vec![c / 2]);
            put(format!("{q}.sca.w"), vec![c / 2, c / 2]);
            put(format!("{q}.sca.b"), vec![c / 2]);
            put(format!("{q}.zc.w"), vec![c, c / 2, 1, 1]);
            put(format!("{q}.zc.b"), vec![c]);
            for task in &self.tasks {
                let q = format!("task.{task}.l{j}");
                put(format!("{q}.gn.gamma"), vec![c]);
                put(format!("{q}.gn.beta"), vec![c]);
                put(format!("{q}.dw.w"), vec![c, 1, 3, 3]);
                put(format!("{q}.dw.b"), vec![c]);
                put(format!("{q}.zc.w"), vec![c, c, 1, 1]);
                put(format!("{q}.zc.b"), vec![c]);
            }
            let q = format!("enc.l{j}");
            put(format!("{q}.conv.w"), vec![c, c, 3, 3]);
            put(format!("{q}.conv.b"), vec![c]);
            put(format!("{q}.img.w"), vec![c, self.embed_dim]);
            put(format!("{q}.time.w"), vec![c, self.time_dim]);
            put(format!("{q}.cond.b"), vec![c]);
        }
        for j in 0..=self.control_levels {
            let q = format!("moe.l{j}");
            put(format!("{q}.style.w"), vec![c, self.embed_dim]);
            put(format!("{q}.style.b"), vec![c]);
            put(format!("{q}.conv.w"), vec![c, c, 3, 3]);
        }
        Ok(m)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InitDescriptor {
    pub seed: u64,
    pub scheme: String,
}

pub const INIT_SCHEME: &str = "orthogonal+zero-conv";

/// Zero-convolution layers: exactly zero at initialization.
pub fn is_zero_conv(name: &str) -> bool {
    name.contains(".zc.")
}

/// How a tensor is initialized, from its name.
fn init_kind(name: &str) -> InitKind {
    if is_zero_conv(name) || name.ends_with(".b") || name.ends_with(".beta") {
        InitKind::Zeros
    } else if name.ends_with(".gamma") {
        InitKind::Ones
    } else {
        InitKind::Orthogonal
    }
}

enum InitKind {
    Zeros,
    Ones,
    Orthogonal,
}

fn tensor_seed(seed: u64, name: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(name.as_bytes());
    h.finalize().into()
}

/// `rows × cols` matrix whose rows (if `rows ≤ cols`) or columns are
/// orthonormal, by modified Gram–Schmidt on a Gaussian draw.
pub fn orthogonal(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let (n, len) = if rows <= cols { (rows, cols) } else { (cols, rows) };
    let mut vecs: Vec<Vec<f64>> = Vec::with_capacity(n);
    while vecs.len() < n {
        let mut v: Vec<f64> = (0..len).map(|_| StandardNormal.sample(rng)).collect();
        for _ in 0..2 {
            for u in &vecs {
                let d: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
                for (x, a) in v.iter_mut().zip(u) {
                    *x -= d * a;
                }
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        // a degenerate draw is simply redrawn
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            vecs.push(v);
        }
    }
    let mut out = vec![0.0; rows * cols];
    for (i, v) in vecs.iter().enumerate() {
        for (k, x) in v.iter().enumerate() {
            if rows <= cols {
                out[i * cols + k] = *x;
            } else {
                out[k * cols + i] = *x;
            }
        }
    }
    out
}

/// All learnable tensors of the toy control network.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockWeights<T> {
    pub init: InitDescriptor,
    pub config: ControlConfig,
    tensors: BTreeMap<String, Tensor<T>>,
}

#[derive(Serialize, Deserialize)]
struct ArchiveEntry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
    len: usize,
}

#[derive(Serialize, Deserialize)]
struct ArchiveManifest {
    dtype: String,
    init: InitDescriptor,
    config: ControlConfig,
    tensors: Vec<ArchiveEntry>,
}

impl<T: Real> BlockWeights<T> {
    /// Fresh weights. Each tensor draws from its own stream keyed by the
    /// seed and its name, so adding tensors never perturbs existing ones.
    pub fn init(config: ControlConfig, seed: u64) -> Result<Self> {
        let layout = config.layout()?;
        let tensors = layout
            .into_iter()
            .map(|(name, shape)| {
                let n: usize = shape.iter().product();
                let data: Vec<T> = match init_kind(&name) {
                    InitKind::Zeros => vec![T::zero(); n],
                    InitKind::Ones => vec![T::one(); n],
                    InitKind::Orthogonal => {
                        let mut rng = ChaCha8Rng::from_seed(tensor_seed(seed, &name));
                        let rows = shape[0];
                        orthogonal(rows, n / rows, &mut rng).into_iter().map(T::lit).collect()
                    }
                };
                (name, Tensor { shape, data })
            })
            .collect();
        Ok(Self {
            init: InitDescriptor {
                seed,
                scheme: INIT_SCHEME.to_string(),
            },
            config,
            tensors,
        })
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<T>> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::config(format!("missing weight tensor `{name}`")))
    }

    /// Replaces a tensor; the shape must match the existing one.
    pub fn set(&mut self, name: &str, tensor: Tensor<T>) -> Result<()> {
        let slot = self
            .tensors
            .get_mut(name)
            .ok_or_else(|| Error::config(format!("missing weight tensor `{name}`")))?;
        if slot.shape != tensor.shape {
            return Err(Error::Size(format!(
                "`{name}` has shape {:?}, got {:?}",
                slot.shape, tensor.shape
            )));
        }
        *slot = tensor;
        Ok(())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn param_count(&self) -> usize {
        self.tensors.values().map(|t| t.data.len()).sum()
    }

    pub fn cast<U: Real>(&self) -> BlockWeights<U> {
        BlockWeights {
            init: self.init.clone(),
            config: self.config.clone(),
            tensors: self.tensors.iter().map(|(k, v)| (k.clone(), v.cast())).collect(),
        }
    }

    /// Writes `weights.bin` (little-endian, concatenated in name order) and
    /// a `weights.json` manifest of names, shapes and offsets.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| Error::Io { path, source }
        };
        fs::create_dir_all(dir).map_err(io(dir))?;
        let mut bin = Vec::with_capacity(self.param_count() * std::mem::size_of::<T>());
        let mut entries = Vec::new();
        for (name, t) in &self.tensors {
            entries.push(ArchiveEntry {
                name: name.clone(),
                shape: t.shape.clone(),
                offset: bin.len(),
                len: t.data.len(),
            });
            for v in &t.data {
                v.write_le(&mut bin);
            }
        }
        let manifest = ArchiveManifest {
            dtype: T::DTYPE.to_string(),
            init: self.init.clone(),
            config: self.config.clone(),
            tensors: entries,
        };
        let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))?;
        let bin_path = dir.join(WEIGHTS_BIN);
        fs::write(&bin_path, bin).map_err(io(&bin_path))?;
        let json_path = dir.join(WEIGHTS_JSON);
        fs::write(&json_path, json).map_err(io(&json_path))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let json_path = dir.join(WEIGHTS_JSON);
        let text = fs::read_to_string(&json_path).map_err(|source| Error::Io {
            path: json_path.clone(),
            source,
        })?;
        let manifest: ArchiveManifest =
            serde_json::from_str(&text).map_err(|e| Error::Format(format!("weight manifest: {e}")))?;
        if manifest.dtype != T::DTYPE {
            return Err(Error::Format(format!(
                "archive holds {} tensors, requested {}",
                manifest.dtype,
                T::DTYPE
            )));
        }
        let bin_path = dir.join(WEIGHTS_BIN);
        let bin = fs::read(&bin_path).map_err(|source| Error::Io {
            path: bin_path.clone(),
            source,
        })?;
        let layout = manifest.config.layout()?;
        let size = std::mem::size_of::<T>();
        let mut tensors = BTreeMap::new();
        for e in manifest.tensors {
            if layout.get(&e.name) != Some(&e.shape) {
                return Err(Error::Format(format!("tensor `{}` does not fit the configuration", e.name)));
            }
            let end = e.offset + e.len * size;
            let bytes = bin
                .get(e.offset..end)
                .ok_or_else(|| Error::Format(format!("tensor `{}` runs past the archive", e.name)))?;
            let data: Vec<T> = bytes.chunks_exact(size).map(T::read_le).collect();
            tensors.insert(e.name.clone(), Tensor::new(e.shape, data)?);
        }
        if let Some(missing) = layout.keys().find(|k| !tensors.contains_key(*k)) {
            return Err(Error::Format(format!("archive lacks tensor `{missing}`")));
        }
        Ok(Self {
            init: manifest.init,
            config: manifest.config,
            tensors,
        })
    }
}
