use lanefield::affinity::AffinityPair;
use lanefield::losses::*;
use lanefield::rng::seeded;
use lanefield::TensorF32;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const H: usize = 8;
const W: usize = 8;

struct Frame {
    logits: TensorF32,
    probs: TensorF32,
    target: TensorF32,
    haf: TensorF32,
    vaf: TensorF32,
    gt: AffinityPair,
}

fn frame(rng: &mut ChaCha8Rng) -> Frame {
    let logits = TensorF32::from_fn(&[1, H, W], |_| rng.random_range(-4.0f32..4.0)).unwrap();
    let probs = TensorF32::from_fn(&[1, H, W], |_| rng.random_range(0.0f32..1.0)).unwrap();
    let target = TensorF32::from_fn(&[1, H, W], |_| rng.random_bool(0.3) as u8 as f32).unwrap();
    let haf = TensorF32::from_fn(&[1, H, W], |_| rng.random_range(-1.0f32..1.0)).unwrap();
    let vaf = TensorF32::from_fn(&[2, H, W], |_| rng.random_range(-1.0f32..1.0)).unwrap();
    let gt = AffinityPair {
        haf: TensorF32::from_fn(&[1, H, W], |_| rng.random_range(-1i32..=1) as f32).unwrap(),
        vaf: TensorF32::from_fn(&[2, H, W], |_| rng.random_range(-1.0f32..1.0)).unwrap(),
    };
    Frame { logits, probs, target, haf, vaf, gt }
}

// Scalar-loop references written against the textbook definitions.

fn wbce_ref(z: &[f32], t: &[f32], w: f64) -> f64 {
    let mut s = 0.0;
    for (&z, &t) in z.iter().zip(t) {
        let o = 1.0 / (1.0 + (-(z as f64)).exp());
        s += w * t as f64 * o.ln() + (1.0 - t as f64) * (1.0 - o).ln();
    }
    -s / z.len() as f64
}

fn iou_ref(p: &[f32], t: &[f32]) -> f64 {
    let mut inter = 0.0;
    let mut uni = 0.0;
    for (&p, &t) in p.iter().zip(t) {
        inter += p as f64 * t as f64;
        uni += p as f64 + t as f64 - p as f64 * t as f64;
    }
    if uni == 0.0 { 0.0 } else { 1.0 - inter / uni }
}

fn af_ref(f: &Frame) -> f64 {
    let plane = H * W;
    let mut s = 0.0;
    let mut n = 0;
    for i in 0..plane {
        if f.target.data()[i] == 1.0 {
            n += 1;
            s += (f.gt.haf.data()[i] as f64 - f.haf.data()[i] as f64).abs();
            for c in 0..2 {
                s += (f.gt.vaf.data()[c * plane + i] as f64 - f.vaf.data()[c * plane + i] as f64).abs();
            }
        }
    }
    if n == 0 { 0.0 } else { s / n as f64 }
}

#[test]
fn losses_match_scalar_loops() {
    let mut rng = seeded(31);
    for _ in 0..50 {
        let f = frame(&mut rng);
        let w = rng.random_range(0.5f32..5.0);
        let got = wbce_loss(&f.logits, &f.target, w).unwrap();
        assert!((got - wbce_ref(f.logits.data(), f.target.data(), w as f64)).abs() <= 1e-6);
        let got = iou_loss(&f.probs, &f.target).unwrap();
        assert!((got - iou_ref(f.probs.data(), f.target.data())).abs() <= 1e-6);
        let got = af_loss(&f.haf, &f.vaf, &f.gt, &f.target).unwrap();
        assert!((got - af_ref(&f)).abs() <= 1e-6);
    }
}

#[test]
fn unit_weight_is_plain_bce() {
    let mut rng = seeded(32);
    let f = frame(&mut rng);
    let bce: f64 = f
        .logits
        .data()
        .iter()
        .zip(f.target.data())
        .map(|(&z, &t)| {
            let o = 1.0 / (1.0 + (-(z as f64)).exp());
            -(t as f64 * o.ln() + (1.0 - t as f64) * (1.0 - o).ln())
        })
        .sum::<f64>()
        / 64.0;
    assert!((wbce_loss(&f.logits, &f.target, 1.0).unwrap() - bce).abs() <= 1e-9);
}

fn probe(values: &TensorF32, i: usize, h: f32, loss: impl Fn(&TensorF32) -> f64) -> f64 {
    let mut plus = values.clone();
    plus.data_mut()[i] += h;
    let mut minus = values.clone();
    minus.data_mut()[i] -= h;
    (loss(&plus) - loss(&minus)) / (2.0 * h as f64)
}

#[test]
fn finite_differences_match_analytic_gradients() {
    let mut rng = seeded(33);
    let h = 1e-3f32;
    for _ in 0..10 {
        let f = frame(&mut rng);
        let w = 2.5;
        let g = wbce_grad(&f.logits, &f.target, w).unwrap();
        let gi = iou_grad(&f.probs, &f.target).unwrap();
        let (gh, gv) = af_grad(&f.haf, &f.vaf, &f.gt, &f.target).unwrap();
        for i in [0, 9, 27, 63] {
            let fd = probe(&f.logits, i, h, |z| wbce_loss(z, &f.target, w).unwrap());
            assert!((fd - g[i]).abs() <= 1e-4, "wbce {fd} vs {}", g[i]);
            if f.probs.data()[i] > 2.0 * h && f.probs.data()[i] < 1.0 - 2.0 * h {
                let fd = probe(&f.probs, i, h, |p| iou_loss(p, &f.target).unwrap());
                assert!((fd - gi[i]).abs() <= 1e-4, "iou {fd} vs {}", gi[i]);
            }
            // keep the probe away from the |.| kink
            if (f.haf.data()[i] - f.gt.haf.data()[i]).abs() > 2.0 * h {
                let fd = probe(&f.haf, i, h, |o| af_loss(o, &f.vaf, &f.gt, &f.target).unwrap());
                assert!((fd - gh[i]).abs() <= 1e-4, "haf {fd} vs {}", gh[i]);
            }
            let j = 64 + i;
            if (f.vaf.data()[j] - f.gt.vaf.data()[j]).abs() > 2.0 * h {
                let fd = probe(&f.vaf, j, h, |o| af_loss(&f.haf, o, &f.gt, &f.target).unwrap());
                assert!((fd - gv[j]).abs() <= 1e-4, "vaf {fd} vs {}", gv[j]);
            }
        }
    }
}

#[test]
fn total_is_exact_component_sum() {
    let mut rng = seeded(34);
    for _ in 0..20 {
        let f = frame(&mut rng);
        let b = total_loss(&f.logits, &f.haf, &f.vaf, &f.target, &f.gt, None).unwrap();
        let w = default_fg_weight(&f.target);
        let wbce = wbce_loss(&f.logits, &f.target, w).unwrap();
        let probs = lanefield::ops::sigmoid(&f.logits);
        let iou = iou_loss(&probs, &f.target).unwrap();
        let af = af_loss(&f.haf, &f.vaf, &f.gt, &f.target).unwrap();
        assert_eq!((b.wbce, b.iou, b.af), (wbce, iou, af));
        assert_eq!(b.total, wbce + iou + af);
    }
}

#[test]
fn perfect_prediction_leaves_only_the_bce_floor() {
    let mut rng = seeded(35);
    let f = frame(&mut rng);
    let logits = f.target.map(|t| if t > 0.5 { 30.0 } else { -30.0 });
    let b = total_loss(&logits, &f.gt.haf, &f.gt.vaf, &f.target, &f.gt, None).unwrap();
    assert_eq!(b.af, 0.0);
    assert!(b.iou < 1e-9 && b.wbce > 0.0 && b.wbce < 1e-9);
}

proptest! {
    #[test]
    fn losses_are_bounded_and_order_free(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let f = frame(&mut rng);
        let w = default_fg_weight(&f.target);
        let l1 = wbce_loss(&f.logits, &f.target, w).unwrap();
        let l2 = iou_loss(&f.probs, &f.target).unwrap();
        let l3 = af_loss(&f.haf, &f.vaf, &f.gt, &f.target).unwrap();
        prop_assert!(l1 >= 0.0 && (0.0..=1.0).contains(&l2) && l3 >= 0.0);

        let mut perm: Vec<usize> = (0..H * W).collect();
        perm.shuffle(&mut rng);
        // same pixel permutation applied to every channel plane
        let shuffle = |t: &TensorF32| {
            let plane = H * W;
            TensorF32::from_fn(t.dims(), |i| t.data()[(i / plane) * plane + perm[i % plane]]).unwrap()
        };
        let (z, p, t) = (shuffle(&f.logits), shuffle(&f.probs), shuffle(&f.target));
        let gt = AffinityPair { haf: shuffle(&f.gt.haf), vaf: shuffle(&f.gt.vaf) };
        prop_assert!((wbce_loss(&z, &t, w).unwrap() - l1).abs() < 1e-12);
        prop_assert!((iou_loss(&p, &t).unwrap() - l2).abs() < 1e-12);
        prop_assert!((af_loss(&shuffle(&f.haf), &shuffle(&f.vaf), &gt, &t).unwrap() - l3).abs() < 1e-12);
    }
}
