//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use restorekit::control::{
    control_forward, mod_conv_with_style, moe_adapter, residual_controls, BlockWeights, ControlConfig, FeatureMap,
    MoeInput, Tensor,
};
use restorekit::cues::{
    dark_channel, dehaze_estimate, extract_cues, guided_filter, perona_malik, shock_filter, wiener_deconvolve,
    CueParams, TaskKind, TransmissionMap,
};
use restorekit::curriculum::{build_schedule, validate_schedule, TaskNode};
use restorekit::degrade::{apply_blur, apply_haze, apply_noise, TransmissionSource};
use restorekit::metrics::{psnr, ssim, SsimParams};
use restorekit::raster::{convolve2d, save_image, BitDepth, Boundary, Kernel2D, RasterImage};

// ---------------------------------------------------------------- helpers

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_image(r: &mut ChaCha8Rng, h: usize, w: usize, c: usize) -> RasterImage<f64> {
    let data = (0..h * w * c).map(|_| r.random::<f64>()).collect();
    RasterImage::new(h, w, c, data).unwrap()
}

/// Smooth scene with a little texture, values well inside (0, 1).
fn smooth_scene(r: &mut ChaCha8Rng, h: usize, w: usize) -> RasterImage<f64> {
    let (a, b, p) = (r.random_range(2.0..8.0), r.random_range(2.0..8.0), r.random_range(0.0..6.28));
    RasterImage::from_fn(h, w, 3, |y, x, c| {
        let (fy, fx) = (y as f64 / h as f64, x as f64 / w as f64);
        0.5 + 0.3 * (a * fx + p + c as f64).sin() * (b * fy).cos() + 0.1 * (9.0 * fx * fy + c as f64).cos()
    })
}

/// Mirror index `d c b a | a b c d | d c b a`, written independently of
/// the library's lookup.
fn mirror(mut i: isize, n: usize) -> usize {
    let n = n as isize;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - i - 1;
        } else {
            return i as usize;
        }
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn interior_psnr(a: &RasterImage<f64>, b: &RasterImage<f64>) -> f64 {
    let (a, b) = (a.interior(0.8).unwrap(), b.interior(0.8).unwrap());
    let mse = a.data().iter().zip(b.data()).map(|(p, q)| (p - q).powi(2)).sum::<f64>() / a.data().len() as f64;
    10.0 * (1.0 / mse).log10()
}

// ---------------------------------------------------------------- oracles

fn oracle_convolve(img: &RasterImage<f64>, k: &Kernel2D<f64>) -> Vec<f64> {
    let (h, w, c) = img.dims();
    let (ry, rx) = (k.height() as isize / 2, k.width() as isize / 2);
    let mut out = vec![0.0; h * w * c];
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                let mut acc = 0.0;
                for i in 0..k.height() {
                    for j in 0..k.width() {
                        let sy = mirror(y as isize + ry - i as isize, h);
                        let sx = mirror(x as isize + rx - j as isize, w);
                        acc += k.tap(i, j) * img.get(sy, sx, ch);
                    }
                }
                out[(y * w + x) * c + ch] = acc;
            }
        }
    }
    out
}

fn oracle_dark_channel(img: &RasterImage<f64>, r: usize) -> Vec<f64> {
    let (h, w, _) = img.dims();
    let r = r as isize;
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut m = f64::INFINITY;
            for dy in -r..=r {
                for dx in -r..=r {
                    let (sy, sx) = (mirror(y as isize + dy, h), mirror(x as isize + dx, w));
                    for c in 0..3 {
                        m = m.min(img.get(sy, sx, c));
                    }
                }
            }
            out[y * w + x] = m;
        }
    }
    out
}

/// Per-window least squares on windows clipped to the image, then the
/// average of the coefficients of every window covering each pixel.
fn oracle_guided(guide: &RasterImage<f64>, src: &RasterImage<f64>, r: usize, eps: f64) -> Vec<f64> {
    let (h, w, c) = src.dims();
    let window = |y: usize, x: usize| {
        let mut v = Vec::new();
        for yy in y.saturating_sub(r)..(y + r + 1).min(h) {
            for xx in x.saturating_sub(r)..(x + r + 1).min(w) {
                v.push((yy, xx));
            }
        }
        v
    };
    let mut out = vec![0.0; h * w * c];
    for ch in 0..c {
        let mut a = vec![0.0; h * w];
        let mut b = vec![0.0; h * w];
        for y in 0..h {
            for x in 0..w {
                let win = window(y, x);
                let n = win.len() as f64;
                let mi = win.iter().map(|&(p, q)| guide.get(p, q, 0)).sum::<f64>() / n;
                let mp = win.iter().map(|&(p, q)| src.get(p, q, ch)).sum::<f64>() / n;
                let var = win.iter().map(|&(p, q)| (guide.get(p, q, 0) - mi).powi(2)).sum::<f64>() / n;
                let cov = win
                    .iter()
                    .map(|&(p, q)| (guide.get(p, q, 0) - mi) * (src.get(p, q, ch) - mp))
                    .sum::<f64>()
                    / n;
                a[y * w + x] = cov / (var + eps);
                b[y * w + x] = mp - a[y * w + x] * mi;
            }
        }
        for y in 0..h {
            for x in 0..w {
                let win = window(y, x);
                let n = win.len() as f64;
                let ma = win.iter().map(|&(p, q)| a[p * w + q]).sum::<f64>() / n;
                let mb = win.iter().map(|&(p, q)| b[p * w + q]).sum::<f64>() / n;
                out[(y * w + x) * c + ch] = ma * guide.get(y, x, 0) + mb;
            }
        }
    }
    out
}

fn oracle_pm_step(img: &RasterImage<f64>, k: f64, dt: f64) -> Vec<f64> {
    let (h, w, c) = img.dims();
    let mut out = vec![0.0; h * w * c];
    for y in 0..h as isize {
        for x in 0..w as isize {
            for ch in 0..c {
                let v = img.get(y as usize, x as usize, ch);
                let mut flux = 0.0;
                for (dy, dx) in [(-1, 0), (1, 0), (0, -1), (0, 1)] {
                    let (ny, nx) = (y + dy, x + dx);
                    if ny < 0 || nx < 0 || ny >= h as isize || nx >= w as isize {
                        continue;
                    }
                    let d = img.get(ny as usize, nx as usize, ch) - v;
                    flux += (-(d / k).powi(2)).exp() * d;
                }
                out[((y as usize) * w + x as usize) * c + ch] = v + dt * flux;
            }
        }
    }
    out
}

/// Naive modulated 3×3 convolution with zero padding.
fn oracle_mod_conv(x: &FeatureMap<f64>, style: &[f64], weight: &Tensor<f64>) -> Vec<f64> {
    let (co, ci, k) = (weight.shape[0], weight.shape[1], weight.shape[2]);
    let wt = |o: usize, i: usize, ky: usize, kx: usize| weight.data[((o * ci + i) * k + ky) * k + kx];
    let demod: Vec<f64> = (0..co)
        .map(|o| {
            let mut ss = 0.0;
            for i in 0..ci {
                for ky in 0..k {
                    for kx in 0..k {
                        ss += (wt(o, i, ky, kx) * style[i]).powi(2);
                    }
                }
            }
            1.0 / (ss + 1e-8).sqrt()
        })
        .collect();
    let (h, w) = (x.height, x.width);
    let pad = (k / 2) as isize;
    let mut out = vec![0.0; h * w * co];
    for y in 0..h {
        for xx in 0..w {
            for o in 0..co {
                let mut acc = 0.0;
                for ky in 0..k {
                    for kx in 0..k {
                        let (sy, sx) = (y as isize + ky as isize - pad, xx as isize + kx as isize - pad);
                        if sy < 0 || sx < 0 || sy >= h as isize || sx >= w as isize {
                            continue;
                        }
                        for i in 0..ci {
                            acc += wt(o, i, ky, kx) * style[i] * demod[o] * x.at(sy as usize, sx as usize, i);
                        }
                    }
                }
                out[(y * w + xx) * co + o] = acc;
            }
        }
    }
    out
}

/// Every topological order of `nodes`, visited by backtracking; stops as
/// soon as `target` is produced.
fn is_topological_order(nodes: &[TaskNode], target: &[&str]) -> bool {
    fn go(nodes: &[TaskNode], placed: &mut Vec<usize>, used: &mut Vec<bool>, target: &[&str]) -> bool {
        if placed.len() == nodes.len() {
            return placed.iter().map(|&i| nodes[i].id.as_str()).eq(target.iter().copied());
        }
        for i in 0..nodes.len() {
            if used[i] {
                continue;
            }
            let ready = nodes[i]
                .parents
                .iter()
                .all(|p| placed.iter().any(|&j| nodes[j].id == *p));
            if !ready {
                continue;
            }
            used[i] = true;
            placed.push(i);
            if go(nodes, placed, used, target) {
                return true;
            }
            placed.pop();
            used[i] = false;
        }
        false
    }
    go(nodes, &mut Vec::new(), &mut vec![false; nodes.len()], target)
}

// ---------------------------------------------------------------- criteria

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    check(elapsed < limit, || format!("took {elapsed:.2?}, limit {limit:?}"))
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut r = rng(1);
    let mut worst = [0.0f64; 4];
    for case in 0..100 {
        let (h, w) = (r.random_range(4..=32), r.random_range(4..=32));
        let img = random_image(&mut r, h, w, 3);

        let guide = random_image(&mut r, h, w, 1);
        let radius = r.random_range(1..=4);
        let eps = [1e-3, 1e-2, 0.1][case % 3];
        let got = guided_filter(&guide, &img, radius, eps).map_err(|e| e.to_string())?;
        worst[0] = worst[0].max(max_abs_diff(got.data(), &oracle_guided(&guide, &img, radius, eps)));

        let pr = r.random_range(0..=3);
        let got = dark_channel(&img, pr).map_err(|e| e.to_string())?;
        worst[1] = worst[1].max(max_abs_diff(got.data(), &oracle_dark_channel(&img, pr)));

        // odd sizes up to 9×9 cover both the direct and the FFT route
        let kh = 2 * r.random_range(0..=(h.min(9) - 1) / 2) + 1;
        let kw = 2 * r.random_range(0..=(w.min(9) - 1) / 2) + 1;
        let taps = (0..kh * kw).map(|_| r.random_range(-0.5..1.0)).collect();
        let k = Kernel2D::new(kh, kw, taps).unwrap();
        let got = convolve2d(&img, &k, Boundary::Reflect).map_err(|e| e.to_string())?;
        worst[2] = worst[2].max(max_abs_diff(got.data(), &oracle_convolve(&img, &k)));

        let (kk, dt) = (r.random_range(0.02..0.5), r.random_range(0.05..0.25));
        let got = perona_malik(&img, kk, dt, 1).map_err(|e| e.to_string())?;
        worst[3] = worst[3].max(max_abs_diff(got.data(), &oracle_pm_step(&img, kk, dt)));
    }
    let names = ["guided_filter", "dark_channel", "convolve2d", "perona_malik"];
    for (n, e) in names.iter().zip(worst) {
        check(e <= 1e-5, || format!("{n} max deviation {e:e} > 1e-5"))?;
    }
    within(start.elapsed(), Duration::from_secs(60))?;
    Ok(format!(
        "max deviations guided {:.1e}, dark {:.1e}, conv {:.1e}, pm {:.1e}",
        worst[0], worst[1], worst[2], worst[3]
    ))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut r = rng(2);
    let (mut min_haze, mut min_blur) = (f64::INFINITY, f64::INFINITY);
    for _ in 0..20 {
        let (h, w) = (r.random_range(32..=64), r.random_range(32..=64));
        let clean = smooth_scene(&mut r, h, w);

        let a = [r.random_range(0.7..1.0), r.random_range(0.7..1.0), r.random_range(0.7..1.0)];
        let t = r.random_range(0.3..0.95);
        let hazy = apply_haze(&clean, a, &TransmissionSource::Constant(t)).map_err(|e| e.to_string())?;
        let tm = TransmissionMap::constant(h, w, t).unwrap();
        let out = dehaze_estimate(&hazy, &tm, a, 0.1).map_err(|e| e.to_string())?;
        min_haze = min_haze.min(interior_psnr(&out, &clean));

        let psf = Kernel2D::gaussian(r.random_range(0.8..2.5)).unwrap();
        let blurred = apply_blur(&clean, &psf).map_err(|e| e.to_string())?;
        let out = wiener_deconvolve(&blurred, &psf, 1e-8).map_err(|e| e.to_string())?;
        min_blur = min_blur.min(interior_psnr(&out, &clean));
    }
    check(min_haze >= 40.0, || format!("haze round trip min PSNR {min_haze:.2} dB < 40"))?;
    check(min_blur >= 40.0, || format!("wiener round trip min PSNR {min_blur:.2} dB < 40"))?;
    within(start.elapsed(), Duration::from_secs(120))?;
    Ok(format!("min interior PSNR haze {min_haze:.1} dB, wiener {min_blur:.1} dB"))
}

fn criterion_3() -> Outcome {
    let mut r = rng(3);
    let (mut worst_mean, mut worst_over) = (0.0f64, f64::NEG_INFINITY);
    for _ in 0..20 {
        let (h, w) = (r.random_range(4..=32), r.random_range(4..=32));
        let img = random_image(&mut r, h, w, 1);
        let out = perona_malik(&img, 0.1, 0.2, 50).map_err(|e| e.to_string())?;
        worst_mean = worst_mean.max((out.mean() - img.mean()).abs());
        let over = (out.max_value() - img.max_value()).max(img.min_value() - out.min_value());
        worst_over = worst_over.max(over);
    }
    check(worst_mean <= 1e-5, || format!("mean drift {worst_mean:e} > 1e-5"))?;
    check(worst_over <= 1e-7, || format!("extrema exceeded by {worst_over:e}"))?;
    for v in [0.0, 0.37, 1.0] {
        for c in [1, 3] {
            let img = RasterImage::filled(17, 13, c, v);
            let s = shock_filter(&img, 0.25, 20, 0.1).map_err(|e| e.to_string())?;
            let gray = img.luminance();
            check(s.shock_image == gray, || format!("shock filter changed a constant {v} image"))?;
            check(s.edge_map.data().iter().all(|e| *e == 0.0), || "edges on a constant image".into())?;
        }
    }
    Ok(format!("mean drift {worst_mean:.1e}, extrema excess {worst_over:.1e}"))
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let config = ControlConfig::default();
    check(config.levels == 4, || "default config must have four levels".into())?;
    let w = BlockWeights::<f64>::init(config.clone(), 7).map_err(|e| e.to_string())?;
    let mut r = rng(4);
    let img = smooth_scene(&mut r, 64, 64);
    let psf = Kernel2D::gaussian(1.0).unwrap();
    let cues = extract_cues(&img, &TaskKind::ALL, &CueParams::default(), Some(&psf)).map_err(|e| e.to_string())?;
    let fwd = control_forward(&img, &cues, &w, 250, &BTreeMap::new()).map_err(|e| e.to_string())?;

    // shape chain: 64×64 reduced four times, then one halving per control step
    for (j, expect) in [(0usize, 4usize), (1, 2), (2, 1)] {
        for (t, c) in fwd.stack.level(j).map_err(|e| e.to_string())? {
            check(c.height == expect && c.width == expect && c.channels == config.control_width(), || {
                format!("{t} level {j} is {}x{}x{}", c.height, c.width, c.channels)
            })?;
        }
    }
    // zero-initialized residual branches are exact identities
    for j in 0..config.control_levels {
        let res = residual_controls(&fwd.stack, j, &w).map_err(|e| e.to_string())?;
        for (t, c) in &res {
            check(*c == fwd.stack.controls[t][j], || format!("{t} level {j} residual is not an identity"))?;
        }
    }
    // one-hot and empty mixtures
    let tasks: Vec<TaskKind> = fwd.stack.controls.keys().copied().collect();
    let mut worst_onehot = 0.0f64;
    for j in 0..=config.control_levels {
        for &on in &tasks {
            let inputs: Vec<MoeInput<'_, f64>> = tasks
                .iter()
                .map(|t| MoeInput {
                    control: &fwd.stack.controls[t][j],
                    embedding: &fwd.stack.task_embeddings[t],
                    switch: *t == on,
                })
                .collect();
            let got = moe_adapter(&inputs, j, &w).map_err(|e| e.to_string())?;
            let c = &fwd.stack.controls[&on][j];
            let p = &fwd.stack.task_embeddings[&on];
            let sw = w.get(&format!("moe.l{j}.style.w")).unwrap();
            let sb = w.get(&format!("moe.l{j}.style.b")).unwrap();
            let n_in = sw.shape[1];
            let style: Vec<f64> = (0..sw.shape[0])
                .map(|o| sb.data[o] + (0..n_in).map(|i| sw.data[o * n_in + i] * p[i]).sum::<f64>())
                .collect();
            let m = oracle_mod_conv(c, &style, w.get(&format!("moe.l{j}.conv.w")).unwrap());
            let (hw, ch) = (c.height * c.width, c.channels);
            let smean: Vec<f64> = (0..ch).map(|k| (0..hw).map(|q| m[q * ch + k]).sum::<f64>() / hw as f64).collect();
            let cmean: Vec<f64> = (0..hw).map(|q| m[q * ch..(q + 1) * ch].iter().sum::<f64>() / ch as f64).collect();
            let expect: Vec<f64> = (0..hw * ch).map(|i| smean[i % ch] * cmean[i / ch] * c.data[i]).collect();
            check(!got.empty, || "one-hot mixture flagged empty".into())?;
            worst_onehot = worst_onehot.max(max_abs_diff(&got.tensor.data, &expect));
        }
        let off: Vec<MoeInput<'_, f64>> = tasks
            .iter()
            .map(|t| MoeInput {
                control: &fwd.stack.controls[t][j],
                embedding: &fwd.stack.task_embeddings[t],
                switch: false,
            })
            .collect();
        let empty = moe_adapter(&off, j, &w).map_err(|e| e.to_string())?;
        check(empty.empty && empty.tensor.data.iter().all(|v| v.abs() <= 1e-6), || format!("level {j} empty mixture"))?;
    }
    check(worst_onehot <= 1e-6, || format!("one-hot mixture deviates by {worst_onehot:e}"))?;

    // demodulation makes the modulated conv blind to positive style scale
    let x = &fwd.stack.controls[&TaskKind::Haze][0];
    let weight = w.get("moe.l0.conv.w").unwrap();
    let style: Vec<f64> = (0..x.channels).map(|_| r.random_range(0.1..2.0)).collect();
    let base = mod_conv_with_style(x, &style, weight).map_err(|e| e.to_string())?;
    let norm = base.data.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let mut worst_scale = 0.0f64;
    for s in [0.25, 3.0, 40.0] {
        let scaled: Vec<f64> = style.iter().map(|v| v * s).collect();
        let out = mod_conv_with_style(x, &scaled, weight).map_err(|e| e.to_string())?;
        worst_scale = worst_scale.max(max_abs_diff(&out.data, &base.data) / norm);
    }
    check(worst_scale <= 1e-5, || format!("ModConv scale deviation {worst_scale:e} relative"))?;
    within(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!(
        "64x64 -> 4x4x{}, one-hot dev {worst_onehot:.1e}, scale dev {worst_scale:.1e}",
        config.control_width()
    ))
}

fn criterion_5() -> Outcome {
    let mut r = rng(5);
    let names = ["H", "B", "D", "eta", "H+B", "D+B", "H+D", "B+eta", "all", "x"];
    for case in 0..200 {
        let n = r.random_range(1..=10);
        let density = r.random_range(0.0..0.6);
        let mut ids: Vec<&str> = names[..n].to_vec();
        // shuffle so list order is unrelated to dependency order
        for i in (1..n).rev() {
            ids.swap(i, r.random_range(0..=i));
        }
        let mut rank: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            rank.swap(i, r.random_range(0..=i));
        }
        let nodes: Vec<TaskNode> = (0..n)
            .map(|i| {
                let parents: Vec<&str> =
                    (0..n).filter(|&j| rank[j] < rank[i] && r.random_bool(density)).map(|j| ids[j]).collect();
                TaskNode::new(ids[i], &parents, r.random_range(1..=4) * 100)
            })
            .collect();
        let s = build_schedule(&nodes).map_err(|e| format!("dag {case}: {e}"))?;
        check(validate_schedule(&nodes, &s).map_err(|e| format!("dag {case}: {e}"))?, || {
            format!("dag {case}: schedule failed validation")
        })?;
        check(is_topological_order(&nodes, &s.ids()), || {
            format!("dag {case}: {:?} is not a topological order", s.ids())
        })?;
    }
    let example = vec![
        TaskNode::new("H", &[], 5000),
        TaskNode::new("B", &[], 8000),
        TaskNode::new("D", &[], 3000),
        TaskNode::new("eta", &[], 6000),
        TaskNode::new("H+B", &["H", "B"], 2000),
        TaskNode::new("D+B", &["D", "B"], 1000),
    ];
    let s = build_schedule(&example).map_err(|e| e.to_string())?;
    let got: Vec<(usize, &str)> = s.entries.iter().map(|e| (e.level, e.id.as_str())).collect();
    let want = vec![(0, "B"), (0, "eta"), (0, "H"), (0, "D"), (1, "H+B"), (1, "D+B")];
    check(got == want, || format!("worked example gave {got:?}"))?;
    Ok("200 random DAGs valid; worked example B, eta, H, D | H+B, D+B".into())
}

fn criterion_6() -> Outcome {
    let mut r = rng(6);
    let p = SsimParams::default();
    let mut worst = 0.0f64;
    for c in [1, 3] {
        for _ in 0..5 {
            let img = random_image(&mut r, 40, 36, c);
            worst = worst.max((ssim(&img, &img, &p).map_err(|e| e.to_string())? - 1.0).abs());
        }
    }
    check(worst <= 1e-9, || format!("ssim(x, x) off by {worst:e}"))?;
    let a = RasterImage::<f64>::filled(16, 16, 3, 0.5);
    let b = RasterImage::<f64>::filled(16, 16, 3, 0.6);
    let db = psnr(&a, &b, 1.0).map_err(|e| e.to_string())?;
    check((db - 20.0).abs() <= 1e-9, || format!("0.1 offset gives {db} dB"))?;

    let clean = smooth_scene(&mut r, 64, 64);
    let mut last = f64::INFINITY;
    let mut seq = Vec::new();
    for (i, sigma) in [0.01, 0.05, 0.1, 0.2].into_iter().enumerate() {
        let noisy = apply_noise(&clean, sigma, false, 600 + i as u64).map_err(|e| e.to_string())?;
        let v = psnr(&noisy, &clean, 1.0).map_err(|e| e.to_string())?;
        check(v < last, || format!("PSNR not decreasing at sigma {sigma}: {seq:?} then {v}"))?;
        seq.push(v);
        last = v;
    }
    Ok(format!(
        "ssim(x,x) dev {worst:.1e}; offset PSNR {db:.12}; noise PSNR {}",
        seq.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>().join(" > ")
    ))
}

/// Outdoor-like haze-free scene: a bright sky band above saturated,
/// shaded objects whose dark channel is near zero.
fn haze_scene(r: &mut ChaCha8Rng, h: usize, w: usize) -> RasterImage<f64> {
    let horizon = r.random_range(h / 5..h / 3);
    let blocks: Vec<(usize, usize, [f64; 3])> = (0..16)
        .map(|_| {
            let mut col = [r.random_range(0.3..0.95), r.random_range(0.3..0.95), r.random_range(0.3..0.95)];
            col[r.random_range(0..3)] = r.random_range(0.0..0.05);
            (r.random_range(horizon..h), r.random_range(0..w), col)
        })
        .collect();
    RasterImage::from_fn(h, w, 3, |y, x, c| {
        if y < horizon {
            return 0.97 - 0.08 * y as f64 / horizon as f64 - 0.02 * c as f64;
        }
        // nearest seed wins (Voronoi cells)
        let (_, _, col) = blocks
            .iter()
            .min_by_key(|(by, bx, _)| (y as isize - *by as isize).pow(2) + (x as isize - *bx as isize).pow(2))
            .unwrap();
        let shade = 0.85 + 0.15 * ((x + y) as f64 / (h + w) as f64);
        col[c] * shade
    })
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn cli(args: &[&str]) -> Result<(), String> {
    let o = Command::new(env!("CARGO_BIN_EXE_restorekit"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    check(o.status.success(), || {
        format!("`{}` failed: {}", args.join(" "), String::from_utf8_lossy(&o.stderr))
    })
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let clean = tmp.path().join("clean");
    fs::create_dir_all(&clean).unwrap();
    let mut r = rng(7);
    for i in 0..20 {
        let img = haze_scene(&mut r, 96, 96);
        save_image(&img, &clean.join(format!("scene{i:02}.png")), BitDepth::Sixteen).map_err(|e| e.to_string())?;
    }
    let recipe = tmp.path().join("haze.json");
    fs::write(&recipe, r#"{"haze": {"airlight": [0.9, 0.9, 0.9], "transmission": {"constant": 0.6}}}"#).unwrap();
    let p = |s: &Path| s.to_str().unwrap().to_string();

    let mut runs = Vec::new();
    for run in 0..2 {
        let root = tmp.path().join(format!("run{run}"));
        let (hazy, cues, restored) = (root.join("hazy"), root.join("cues"), root.join("restored"));
        let workers = if run == 0 { "1" } else { "3" };
        cli(&["degrade", "--input", &p(&clean), "--output", &p(&hazy), "--recipe", &p(&recipe), "--seed", "5", "--workers", workers])?;
        cli(&["cues", "--input", &p(&hazy), "--output", &p(&cues), "--tasks", "haze,dark,noise", "--workers", workers])?;
        cli(&[
            "restore", "--input", &p(&hazy), "--output", &p(&restored), "--tasks", "haze", "--ground-truth", &p(&clean),
            "--workers", workers,
        ])?;
        runs.push(tree(&root));
    }
    check(runs[0] == runs[1], || "two CLI runs produced different bytes".into())?;

    let metrics: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(tmp.path().join("run0/restored/metrics.json")).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    let restored = metrics["restored"]["records"].as_array().unwrap();
    let baseline = metrics["baseline"]["records"].as_array().unwrap();
    let improved = restored
        .iter()
        .zip(baseline)
        .filter(|(a, b)| a["psnr"].as_f64().unwrap() > b["psnr"].as_f64().unwrap())
        .count();
    let n = restored.len();
    // the restore output is the dehaze primary cue; check they agree
    let cue = restorekit::raster::load_image::<f64>(&tmp.path().join("run0/cues/scene00/haze_0_dehaze.png"))
        .map_err(|e| e.to_string())?;
    let out = restorekit::raster::load_image::<f64>(&tmp.path().join("run0/restored/scene00.png")).map_err(|e| e.to_string())?;
    check(cue == out, || "restore output differs from the dehaze cue".into())?;
    check(n == 20 && improved * 10 >= n * 9, || format!("dehaze improved {improved}/{n} images"))?;
    within(start.elapsed(), Duration::from_secs(300))?;
    Ok(format!(
        "dehaze improved {improved}/{n} (mean {:.2} -> {:.2} dB); reruns byte-identical",
        metrics["baseline"]["summary"]["psnr"]["mean"].as_f64().unwrap(),
        metrics["restored"]["summary"]["psnr"]["mean"].as_f64().unwrap()
    ))
}

fn criterion_8() -> Outcome {
    let mut r = rng(8);
    let img = smooth_scene(&mut r, 512, 512);
    let psf = Kernel2D::gaussian(1.5).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().map_err(|e| e.to_string())?;
    let params = CueParams::default();
    let start = Instant::now();
    let set = pool
        .install(|| extract_cues(&img, &TaskKind::ALL, &params, Some(&psf)))
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    check(set.primary_count() == 4 && set.secondary_count() == 5, || "wrong cue counts".into())?;
    within(elapsed, Duration::from_secs(2))?;
    Ok(format!("512x512, four tasks, one thread: {elapsed:.2?}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("oracle equivalence", criterion_1),
        ("round trips", criterion_2),
        ("diffusion conservation and shock invariance", criterion_3),
        ("control stack structure", criterion_4),
        ("curriculum ordering", criterion_5),
        ("metrics", criterion_6),
        ("end-to-end haze restoration", criterion_7),
        ("throughput", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let t = start.elapsed();
        match outcome {
            Ok(detail) => println!("criterion {}: PASS [{t:.2?}] {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL [{t:.2?}] {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
