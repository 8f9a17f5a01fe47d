use std::collections::BTreeMap;

use proptest::prelude::*;
use restorekit::control::{
    control_forward, mlcn_forward_images, moe_adapter, BlockWeights, ControlConfig, FeatureMap, MoeInput, Tensor,
};
use restorekit::cues::{extract_cues, CueParams, TaskKind};
use restorekit::curriculum::{build_schedule, validate_schedule, TaskNode};
use restorekit::metrics::{ssim, SsimParams};
use restorekit::raster::{Kernel2D, RasterImage};

fn lcg(seed: u64) -> impl FnMut() -> f64 {
    let mut s = seed;
    move || {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (s >> 11) as f64 / (1u64 << 53) as f64
    }
}

fn scene(h: usize, w: usize, seed: u64) -> RasterImage<f64> {
    let mut r = lcg(seed);
    let (a, b) = (2.0 + 6.0 * r(), 2.0 + 6.0 * r());
    RasterImage::from_fn(h, w, 3, |y, x, c| {
        let (fy, fx) = (y as f64 / h as f64, x as f64 / w as f64);
        (0.5 + 0.3 * (a * fx + c as f64).sin() * (b * fy).cos() + 0.05 * r()).clamp(0.0, 1.0)
    })
}

fn small_config(terminals: Vec<usize>) -> ControlConfig {
    ControlConfig {
        widths: vec![8, 8, 16],
        levels: 2,
        control_levels: 1,
        groups: 4,
        secondary_terminals: terminals,
        ..ControlConfig::default()
    }
}

fn randomize(w: &mut BlockWeights<f64>, seed: u64) {
    let names: Vec<String> = w.names().map(str::to_string).collect();
    let mut r = lcg(seed);
    for n in names {
        let t = w.get(&n).unwrap().clone();
        let data = t.data.iter().map(|_| r() - 0.5).collect();
        w.set(&n, Tensor::new(t.shape, data).unwrap()).unwrap();
    }
}

#[test]
fn mlcn_is_invariant_to_secondary_order_with_equal_terminals() {
    let mut w = BlockWeights::<f64>::init(small_config(vec![2, 2]), 3).unwrap();
    randomize(&mut w, 9);
    let (p, s1, s2) = (scene(16, 16, 1), scene(16, 16, 2).luminance(), scene(16, 16, 3).luminance());
    let a = mlcn_forward_images(TaskKind::Blur, &p, &[&s1, &s2], &w).unwrap();

    // swap the two secondary branches' weights and their inputs
    let mut swapped = w.clone();
    let names: Vec<String> = w.names().filter(|n| n.starts_with("mlcn.blur.b1.")).map(str::to_string).collect();
    for n1 in names {
        let n2 = n1.replacen(".b1.", ".b2.", 1);
        swapped.set(&n1, w.get(&n2).unwrap().clone()).unwrap();
        swapped.set(&n2, w.get(&n1).unwrap().clone()).unwrap();
    }
    let b = mlcn_forward_images(TaskKind::Blur, &p, &[&s2, &s1], &swapped).unwrap();
    assert_eq!(a, b);
}

#[test]
fn control_shape_chain() {
    let config = ControlConfig::default();
    let w = BlockWeights::<f32>::init(config.clone(), 1).unwrap();
    for size in [64usize, 128] {
        let img = scene(size, size, 5).cast::<f32>();
        let cues = extract_cues(&img, &[TaskKind::Haze, TaskKind::Dark], &CueParams::default(), None).unwrap();
        let fwd = control_forward(&img, &cues, &w, 10, &BTreeMap::new()).unwrap();
        for j in 0..=config.control_levels {
            let expect = size >> (config.levels + j);
            for (_, c) in fwd.stack.level(j).unwrap() {
                assert_eq!((c.height, c.width, c.channels), (expect, expect, config.control_width()));
                assert_eq!(c.level, config.levels + j);
            }
            assert_eq!(fwd.moe[j].tensor.height, expect);
        }
    }
}

#[test]
fn control_forward_is_thread_count_independent() {
    let w = BlockWeights::<f64>::init(small_config(vec![1, 2]), 2).unwrap();
    let img = scene(32, 32, 8);
    let psf = Kernel2D::gaussian(1.0).unwrap();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let cues = extract_cues(&img, &TaskKind::ALL, &CueParams::default(), Some(&psf)).unwrap();
            (cues.clone(), control_forward(&img, &cues, &w, 3, &BTreeMap::new()).unwrap())
        })
    };
    let (c1, f1) = run(1);
    let (c4, f4) = run(4);
    assert_eq!(c1, c4);
    assert_eq!(f1, f4);
}

fn feature(seed: u64, c: usize) -> FeatureMap<f64> {
    let mut r = lcg(seed);
    FeatureMap::new(2, 3, 3, c, (0..9 * c).map(|_| r() - 0.5).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// With both tasks on, the mixture is the sum of the one-hot mixtures.
    #[test]
    fn mixture_is_additive_over_tasks(s1 in 0u64..500, s2 in 500u64..1000) {
        let mut w = BlockWeights::<f64>::init(small_config(vec![1, 2]), 4).unwrap();
        randomize(&mut w, s1 ^ s2);
        let (c1, c2) = (feature(s1, 16), feature(s2, 16));
        let (p1, p2) = (
            restorekit::control::task_embedding::<f64>(TaskKind::Haze),
            restorekit::control::task_embedding::<f64>(TaskKind::Noise),
        );
        let mk = |a: bool, b: bool| {
            moe_adapter(&[
                MoeInput { control: &c1, embedding: &p1, switch: a },
                MoeInput { control: &c2, embedding: &p2, switch: b },
            ], 1, &w).unwrap()
        };
        let both = mk(true, true);
        let (one, two) = (mk(true, false), mk(false, true));
        for ((x, a), b) in both.tensor.data.iter().zip(&one.tensor.data).zip(&two.tensor.data) {
            prop_assert!((x - (a + b)).abs() <= 1e-12);
        }
        prop_assert!(mk(false, false).empty);
    }

    #[test]
    fn ssim_is_symmetric_and_bounded(s1 in 0u64..1000, s2 in 0u64..1000, c in prop_oneof![Just(1usize), Just(3)]) {
        let mut r1 = lcg(s1);
        let mut r2 = lcg(s2);
        let a = RasterImage::<f64>::from_fn(20, 24, c, |_, _, _| r1());
        let b = RasterImage::<f64>::from_fn(20, 24, c, |_, _, _| r2());
        let p = SsimParams::default();
        let (ab, ba) = (ssim(&a, &b, &p).unwrap(), ssim(&b, &a, &p).unwrap());
        prop_assert!((ab - ba).abs() <= 1e-12);
        prop_assert!((-1.0..=1.0).contains(&ab));
        prop_assert!((ssim(&a, &a, &p).unwrap() - 1.0).abs() <= 1e-9);
    }

    /// Dropping a task nobody depends on leaves the others' relative order.
    #[test]
    fn removing_a_leaf_keeps_relative_order(seed in 0u64..10_000, n in 2usize..9) {
        let mut r = lcg(seed);
        let ids: Vec<String> = (0..n).map(|i| format!("t{i}")).collect();
        let nodes: Vec<TaskNode> = (0..n)
            .map(|i| {
                let parents: Vec<&str> = (0..i).filter(|_| r() < 0.35).map(|j| ids[j].as_str()).collect();
                TaskNode::new(&ids[i], &parents, (1.0 + 4.0 * r()) as u64)
            })
            .collect();
        let full = build_schedule(&nodes).unwrap();
        prop_assert!(validate_schedule(&nodes, &full).unwrap());
        let leaf = nodes.iter().rev().find(|n| !nodes.iter().any(|m| m.parents.contains(&n.id))).unwrap().id.clone();
        let rest: Vec<TaskNode> = nodes.iter().filter(|n| n.id != leaf).cloned().collect();
        let reduced = build_schedule(&rest).unwrap();
        let expect: Vec<&str> = full.ids().into_iter().filter(|i| *i != leaf).collect();
        prop_assert_eq!(reduced.ids(), expect);
    }
}
