//! Synthetic multi-degradation: darkening, blur, haze and sensor noise,
//! composed in that order.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{convolve2d, Boundary, Kernel2D, RasterImage};
use crate::scalar::Real;

/// Largest Gaussian noise level accepted by the synthesis stages.
pub const SIGMA_MAX: f64 = 0.3;
/// Per-image noise range used when synthesising mixed datasets.
pub const SYNTH_SIGMA_RANGE: (f64, f64) = (0.02, 0.30);
/// Gaussian blur widths drawn for random kernels.
pub const SYNTH_BLUR_SIGMA_RANGE: (f64, f64) = (1.0, 4.0);
/// Motion blur lengths drawn for random kernels (inclusive).
pub const SYNTH_MOTION_LENGTH_RANGE: (usize, usize) = (5, 21);
/// Photon count corresponding to unit intensity in the shot-noise model.
pub const PHOTONS_PER_UNIT: f64 = 1000.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DarkenParams {
    pub gain: f64,
    pub gamma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransmissionSource {
    Constant(f64),
    /// Single-channel map with the image's spatial size.
    Map(RasterImage<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HazeParams {
    /// Atmospheric light per RGB channel. Single-channel images use the
    /// first entry.
    pub airlight: [f64; 3],
    pub transmission: TransmissionSource,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub sigma: f64,
    #[serde(default)]
    pub poisson: bool,
    #[serde(default)]
    pub seed: u64,
}

/// Blur point-spread function, either parametric or explicit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BlurSpec {
    Gaussian { sigma: f64 },
    Motion { length: usize, angle_deg: f64 },
    Kernel { kernel: Kernel2D<f64> },
}

impl BlurSpec {
    pub fn kernel<T: Real>(&self) -> Result<Kernel2D<T>> {
        match self {
            BlurSpec::Gaussian { sigma } => Kernel2D::gaussian(*sigma),
            BlurSpec::Motion { length, angle_deg } => Kernel2D::motion(*length, *angle_deg),
            BlurSpec::Kernel { kernel } => {
                if !kernel.is_normalized() {
                    return Err(Error::domain("explicit blur kernel must be normalized"));
                }
                Ok(kernel.cast())
            }
        }
    }

    /// Random PSF for mixed-degradation synthesis: Gaussian with
    /// σ ∈ [1, 4] px or a motion line of 5–21 px at a uniform angle,
    /// each with probability one half.
    pub fn random(rng: &mut impl Rng) -> Self {
        if rng.random_bool(0.5) {
            let (lo, hi) = SYNTH_BLUR_SIGMA_RANGE;
            BlurSpec::Gaussian {
                sigma: rng.random_range(lo..=hi),
            }
        } else {
            let (lo, hi) = SYNTH_MOTION_LENGTH_RANGE;
            BlurSpec::Motion {
                length: rng.random_range(lo..=hi),
                angle_deg: rng.random_range(0.0..180.0),
            }
        }
    }

    fn to_token(&self) -> Result<String> {
        match self {
            BlurSpec::Gaussian { sigma } => Ok(format!("gaussian:{sigma}")),
            BlurSpec::Motion { length, angle_deg } => Ok(format!("motion:{length}:{angle_deg}")),
            BlurSpec::Kernel { .. } => Err(Error::config(
                "explicit kernels can only be serialized as JSON",
            )),
        }
    }
}

impl std::str::FromStr for BlurSpec {
    type Err = Error;

    /// `gaussian:<sigma>` or `motion:<length>:<angle_deg>`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |v: &str| -> Result<f64> {
            v.parse::<f64>()
                .map_err(|_| Error::config(format!("bad number {v:?} in blur spec {s:?}")))
        };
        match parts.as_slice() {
            ["gaussian", sigma] => Ok(BlurSpec::Gaussian { sigma: num(sigma)? }),
            ["motion", len, angle] => Ok(BlurSpec::Motion {
                length: len
                    .parse()
                    .map_err(|_| Error::config(format!("bad motion length in {s:?}")))?,
                angle_deg: num(angle)?,
            }),
            _ => Err(Error::config(format!(
                "blur spec must be gaussian:<sigma> or motion:<len>:<angle>, got {s:?}"
            ))),
        }
    }
}

/// Which stages to apply and with what parameters. Absent stages are skipped.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DegradationRecipe {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub darken: Option<DarkenParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blur: Option<BlurSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub haze: Option<HazeParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseParams>,
}

fn check_darken(gain: f64, gamma: f64) -> Result<()> {
    if !(gain > 0.0 && gain <= 1.0) {
        return Err(Error::domain(format!("darken gain must be in (0, 1], got {gain}")));
    }
    if !(gamma >= 1.0 && gamma.is_finite()) {
        return Err(Error::domain(format!("darken gamma must be >= 1, got {gamma}")));
    }
    Ok(())
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(0.0..=SIGMA_MAX).contains(&sigma) {
        return Err(Error::domain(format!(
            "noise sigma must be in [0, {SIGMA_MAX}], got {sigma}"
        )));
    }
    Ok(())
}

fn check_airlight(a: &[f64; 3]) -> Result<()> {
    if a.iter().any(|&v| !(v > 0.0 && v <= 1.0)) {
        return Err(Error::domain(format!("airlight must be in (0, 1], got {a:?}")));
    }
    Ok(())
}

fn check_transmission_value(t: f64) -> Result<()> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::domain(format!("transmission must be in (0, 1], got {t}")));
    }
    Ok(())
}

impl DegradationRecipe {
    pub fn is_empty(&self) -> bool {
        self.darken.is_none() && self.blur.is_none() && self.haze.is_none() && self.noise.is_none()
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::config("recipe must contain at least one stage"));
        }
        if let Some(d) = &self.darken {
            check_darken(d.gain, d.gamma)?;
        }
        if let Some(b) = &self.blur {
            b.kernel::<f64>()?;
        }
        if let Some(h) = &self.haze {
            check_airlight(&h.airlight)?;
            match &h.transmission {
                TransmissionSource::Constant(t) => check_transmission_value(*t)?,
                TransmissionSource::Map(m) => {
                    if m.channels() != 1 {
                        return Err(Error::domain("transmission map must be single-channel"));
                    }
                    for &t in m.data() {
                        check_transmission_value(t)?;
                    }
                }
            }
        }
        if let Some(n) = &self.noise {
            check_sigma(n.sigma)?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        r.validate()?;
        Ok(r)
    }

    /// Plain-text `key=value` form, one entry per line in stage order.
    /// Per-pixel transmission maps and explicit kernels have no text form.
    pub fn to_kv(&self) -> Result<String> {
        let mut out = String::new();
        if let Some(d) = &self.darken {
            writeln!(out, "darken.gain={}", d.gain).unwrap();
            writeln!(out, "darken.gamma={}", d.gamma).unwrap();
        }
        if let Some(b) = &self.blur {
            writeln!(out, "blur={}", b.to_token()?).unwrap();
        }
        if let Some(h) = &self.haze {
            let [r, g, b] = h.airlight;
            writeln!(out, "haze.airlight={r},{g},{b}").unwrap();
            match &h.transmission {
                TransmissionSource::Constant(t) => writeln!(out, "haze.t={t}").unwrap(),
                TransmissionSource::Map(_) => {
                    return Err(Error::config(
                        "per-pixel transmission maps can only be serialized as JSON",
                    ))
                }
            }
        }
        if let Some(n) = &self.noise {
            writeln!(out, "noise.sigma={}", n.sigma).unwrap();
            writeln!(out, "noise.poisson={}", n.poisson).unwrap();
            writeln!(out, "noise.seed={}", n.seed).unwrap();
        }
        Ok(out)
    }

    /// Parses the `key=value` form. Blank lines and `#` comments are ignored.
    /// Omitted optional keys take neutral defaults (`gamma=1`, `poisson=false`,
    /// `seed=0`, airlight `1,1,1`).
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut r = DegradationRecipe::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected key=value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let num = || -> Result<f64> {
                value
                    .parse::<f64>()
                    .map_err(|_| Error::config(format!("line {}: bad number {value:?}", lineno + 1)))
            };
            match key {
                "darken.gain" => {
                    r.darken.get_or_insert(DarkenParams { gain: 1.0, gamma: 1.0 }).gain = num()?
                }
                "darken.gamma" => {
                    r.darken.get_or_insert(DarkenParams { gain: 1.0, gamma: 1.0 }).gamma = num()?
                }
                "blur" => r.blur = Some(value.parse()?),
                "haze.airlight" => {
                    let vals: Vec<f64> = value
                        .split(',')
                        .map(|v| v.trim().parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| Error::config(format!("line {}: bad airlight", lineno + 1)))?;
                    haze_entry(&mut r).airlight = match vals.as_slice() {
                        [a] => [*a; 3],
                        [a, b, c] => [*a, *b, *c],
                        _ => return Err(Error::config("airlight needs 1 or 3 values")),
                    };
                }
                "haze.t" => haze_entry(&mut r).transmission = TransmissionSource::Constant(num()?),
                "noise.sigma" => {
                    r.noise.get_or_insert(NoiseParams { sigma: 0.0, poisson: false, seed: 0 }).sigma = num()?
                }
                "noise.poisson" => {
                    r.noise.get_or_insert(NoiseParams { sigma: 0.0, poisson: false, seed: 0 }).poisson =
                        value.parse().map_err(|_| Error::config(format!("line {}: bad bool", lineno + 1)))?
                }
                "noise.seed" => {
                    r.noise.get_or_insert(NoiseParams { sigma: 0.0, poisson: false, seed: 0 }).seed =
                        value.parse().map_err(|_| Error::config(format!("line {}: bad seed", lineno + 1)))?
                }
                other => return Err(Error::config(format!("line {}: unknown key {other:?}", lineno + 1))),
            }
        }
        r.validate()?;
        Ok(r)
    }
}

fn haze_entry(r: &mut DegradationRecipe) -> &mut HazeParams {
    r.haze.get_or_insert(HazeParams {
        airlight: [1.0; 3],
        transmission: TransmissionSource::Constant(1.0),
    })
}

/// `gain · img^gamma`, clamped to `[0, 1]`.
pub fn apply_darken<T: Real>(img: &RasterImage<T>, gain: f64, gamma: f64) -> Result<RasterImage<T>> {
    check_darken(gain, gamma)?;
    let (g, p) = (T::lit(gain), T::lit(gamma));
    Ok(img.map(|v| (g * v.max(T::zero()).powf(p)).min(T::one())))
}

/// Convolves with the PSF (reflect boundary).
pub fn apply_blur<T: Real>(img: &RasterImage<T>, psf: &Kernel2D<T>) -> Result<RasterImage<T>> {
    convolve2d(img, psf, Boundary::Reflect)
}

/// Scattering model `img·t + A·(1 − t)`.
pub fn apply_haze<T: Real>(
    img: &RasterImage<T>,
    airlight: [f64; 3],
    transmission: &TransmissionSource,
) -> Result<RasterImage<T>> {
    check_airlight(&airlight)?;
    let (h, w, c) = img.dims();
    let t_at: Box<dyn Fn(usize) -> f64 + '_> = match transmission {
        TransmissionSource::Constant(t) => {
            check_transmission_value(*t)?;
            let t = *t;
            Box::new(move |_| t)
        }
        TransmissionSource::Map(m) => {
            if m.channels() != 1 || m.height() != h || m.width() != w {
                return Err(Error::domain(format!(
                    "transmission map {:?} does not match image {h}x{w}",
                    m.dims()
                )));
            }
            for &t in m.data() {
                check_transmission_value(t)?;
            }
            Box::new(move |p| m.data()[p])
        }
    };
    let data: Vec<T> = img
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let t = T::lit(t_at(i / c));
            let a = T::lit(airlight[(i % c).min(2)]);
            v * t + a * (T::one() - t)
        })
        .collect();
    RasterImage::new(h, w, c, data)
}

/// Noisy image before the final clamp: optional Poisson shot noise at
/// [`PHOTONS_PER_UNIT`], then i.i.d. Gaussian noise of std `sigma`.
pub fn apply_noise_unclamped<T: Real>(
    img: &RasterImage<T>,
    sigma: f64,
    poisson: bool,
    seed: u64,
) -> Result<RasterImage<T>> {
    check_sigma(sigma)?;
    if sigma == 0.0 && !poisson {
        return Ok(img.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<T> = img
        .data()
        .iter()
        .map(|&v| {
            let mut x = v.as_f64();
            if poisson {
                let lambda = x.max(0.0) * PHOTONS_PER_UNIT;
                x = if lambda > 0.0 {
                    Poisson::new(lambda).expect("positive rate").sample(&mut rng) / PHOTONS_PER_UNIT
                } else {
                    0.0
                };
            }
            if sigma > 0.0 {
                let n: f64 = StandardNormal.sample(&mut rng);
                x += sigma * n;
            }
            T::lit(x)
        })
        .collect();
    let (h, w, c) = img.dims();
    RasterImage::new(h, w, c, data)
}

/// [`apply_noise_unclamped`] followed by the sensor clamp to `[0, 1]`.
pub fn apply_noise<T: Real>(
    img: &RasterImage<T>,
    sigma: f64,
    poisson: bool,
    seed: u64,
) -> Result<RasterImage<T>> {
    Ok(apply_noise_unclamped(img, sigma, poisson, seed)?.clamp01())
}

/// Applies the recipe's stages in the order darken → blur → haze → noise.
/// The image is clamped before noise is added and again afterwards.
pub fn degrade<T: Real>(img: &RasterImage<T>, recipe: &DegradationRecipe) -> Result<RasterImage<T>> {
    recipe.validate()?;
    let mut out = img.clone();
    if let Some(d) = &recipe.darken {
        out = apply_darken(&out, d.gain, d.gamma)?;
    }
    if let Some(b) = &recipe.blur {
        out = apply_blur(&out, &b.kernel()?)?;
    }
    if let Some(h) = &recipe.haze {
        out = apply_haze(&out, h.airlight, &h.transmission)?;
    }
    if let Some(n) = &recipe.noise {
        out = apply_noise(&out.clamp01(), n.sigma, n.poisson, n.seed)?;
    }
    Ok(out)
}

/// Draws a per-image noise level from [`SYNTH_SIGMA_RANGE`].
pub fn random_sigma(rng: &mut impl Rng) -> f64 {
    let (lo, hi) = SYNTH_SIGMA_RANGE;
    rng.random_range(lo..=hi)
}
