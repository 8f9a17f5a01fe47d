//! Deterministic stand-ins for text/image embeddings and the timestep code.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use crate::cues::TaskKind;
use crate::raster::{downsample2, RasterImage};
use crate::scalar::Real;

use super::weights::EMBED_DIM;

/// Unit-norm Gaussian vector seeded by the SHA-256 of `key`.
pub fn pseudo_embedding<T: Real>(key: &[u8], dim: usize) -> Vec<T> {
    let seed: [u8; 32] = Sha256::digest(key).into();
    let mut rng = ChaCha8Rng::from_seed(seed);
    let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| T::lit(x / norm)).collect()
}

pub fn task_embedding<T: Real>(task: TaskKind) -> Vec<T> {
    pseudo_embedding(format!("task:{task}").as_bytes(), EMBED_DIM)
}

/// Embedding of the image after two 2× reductions. Pixels are quantized to
/// 16 bits before hashing so `f32` and `f64` copies of an image agree.
pub fn image_embedding<T: Real>(img: &RasterImage<T>) -> Vec<T> {
    let small = downsample2(&downsample2(img));
    let mut h = Sha256::new();
    h.update(b"image:");
    for d in [small.height(), small.width(), small.channels()] {
        h.update((d as u64).to_le_bytes());
    }
    for v in small.data() {
        let q = (v.as_f64().clamp(0.0, 1.0) * 65535.0).round() as u16;
        h.update(q.to_le_bytes());
    }
    pseudo_embedding(&h.finalize(), EMBED_DIM)
}

/// `[sin(t·f_0), …, sin(t·f_{d/2−1}), cos(t·f_0), …]` with
/// `f_i = 10000^(−2i/d)`.
pub fn timestep_encoding<T: Real>(t: u64, dim: usize) -> Vec<T> {
    let half = dim / 2;
    let mut out = vec![T::zero(); dim];
    for i in 0..half {
        let f = 10000f64.powf(-2.0 * i as f64 / dim as f64);
        let a = t as f64 * f;
        out[i] = T::lit(a.sin());
        out[half + i] = T::lit(a.cos());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embeddings_are_unit_and_distinct() {
        let a: Vec<f64> = task_embedding(TaskKind::Haze);
        let b: Vec<f64> = task_embedding(TaskKind::Blur);
        assert_eq!(a.len(), 768);
        assert!((a.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
        assert_ne!(a, b);
        assert_eq!(a, task_embedding::<f64>(TaskKind::Haze));
    }

    #[test]
    fn image_embedding_ignores_dtype() {
        let img = RasterImage::<f64>::from_fn(16, 16, 3, |y, x, c| ((y + 2 * x + c) % 9) as f64 / 8.0);
        let a: Vec<f64> = image_embedding(&img);
        let b: Vec<f32> = image_embedding(&img.cast::<f32>());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - *y as f64).abs() < 1e-6);
        }
    }

    #[test]
    fn timestep_zero() {
        let e: Vec<f64> = timestep_encoding(0, 8);
        assert_eq!(e, vec![0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0]);
        assert_ne!(timestep_encoding::<f64>(500, 8), e);
    }
}
