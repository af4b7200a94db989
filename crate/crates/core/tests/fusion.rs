use farfield_core::fusion::{
    best_permutation, binarize, doverlap_fuse, erode_bounds, extend_segments, soft_fuse, FusionInput, SoftActivity,
};
use farfield_core::segment::{Segmentation, Turn};
use proptest::prelude::*;

fn seg(turns: &[(&str, f64, f64)]) -> Segmentation {
    Segmentation::new("s", turns.iter().map(|&(k, s, e)| Turn::new(k, s, e)).collect()).unwrap()
}

#[test]
fn majority_region_vote() {
    let h1 = seg(&[("A", 0.0, 2.0), ("B", 2.0, 4.0)]);
    let h2 = seg(&[("A", 0.0, 2.0), ("B", 2.0, 4.0)]);
    let h3 = seg(&[("A", 0.0, 1.0), ("B", 1.0, 4.0)]);
    let out = doverlap_fuse(&FusionInput::uniform(vec![h1.clone(), h2, h3])).unwrap();
    assert_eq!(out.normalized().turns, h1.normalized().turns);
}

#[test]
fn identity_and_unanimity() {
    let h = seg(&[("x", 0.0, 1.5), ("y", 1.0, 3.0), ("x", 3.5, 4.0)]);
    let single = doverlap_fuse(&FusionInput::uniform(vec![h.clone()])).unwrap();
    assert_eq!(single.normalized().turns, h.normalized().turns);
    let input = FusionInput { hypotheses: vec![h.clone(); 3], weights: vec![0.2, 5.0, 1.0] };
    assert_eq!(doverlap_fuse(&input).unwrap().normalized().turns, h.normalized().turns);
    assert!(doverlap_fuse(&FusionInput::uniform(vec![])).is_err());
}

#[test]
fn permutation_examples() {
    let a = SoftActivity::new("s", vec![vec![1.0, 0.0, 1.0, 0.0], vec![0.0, 1.0, 1.0, 0.0]], 0.1).unwrap();
    let swapped = SoftActivity::new("s", vec![a.probs[1].clone(), a.probs[0].clone()], 0.1).unwrap();
    assert_eq!(best_permutation(&a, &a).unwrap(), vec![0, 1]);
    assert_eq!(best_permutation(&a, &swapped).unwrap(), vec![1, 0]);
}

#[test]
fn soft_fusion_examples() {
    let reference = seg(&[("A", 0.0, 0.2), ("B", 0.2, 0.4)]);
    let aligned = SoftActivity::new("s", vec![vec![0.9, 0.8, 0.1, 0.0], vec![0.0, 0.2, 0.7, 0.9]], 0.1).unwrap();
    let swapped = SoftActivity::new("s", vec![aligned.probs[1].clone(), aligned.probs[0].clone()], 0.1).unwrap();
    let one = soft_fuse(&[aligned.clone()], &reference).unwrap();
    assert_eq!(one.probs, aligned.probs);
    let two = soft_fuse(&[aligned.clone(), swapped], &reference).unwrap();
    for (r, e) in two.probs.iter().zip(&aligned.probs) {
        for (x, y) in r.iter().zip(e) {
            assert!((x - y).abs() < 1e-12);
        }
    }
    // three survivors averaging 0.9, 0.6, 0.0 in one cell
    let mk = |v: f64| SoftActivity::new("s", vec![vec![1.0, 1.0, v, 0.0], vec![0.0, 0.0, 0.0, 1.0]], 0.1).unwrap();
    let r2 = seg(&[("A", 0.0, 0.2), ("B", 0.3, 0.4)]);
    let mean = soft_fuse(&[mk(0.9), mk(0.6), mk(0.0)], &r2).unwrap();
    assert!((mean.probs[0][2] - 0.5).abs() < 1e-12);
    // wrong speaker count only: fall back to the reference activity
    let three = SoftActivity::new("s", vec![vec![1.0; 4]; 3], 0.1).unwrap();
    let fb = soft_fuse(&[three], &reference).unwrap();
    assert_eq!(fb.probs, vec![vec![1.0, 1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, 1.0]]);
}

#[test]
fn binarize_examples() {
    let a = SoftActivity::new("s", vec![vec![0.2, 0.9, 0.9, 0.1]], 0.1).unwrap();
    let s = binarize(&a, 0.5).unwrap();
    assert_eq!(s.turns.len(), 1);
    assert!((s.turns[0].start - 0.1).abs() < 1e-12 && (s.turns[0].end - 0.3).abs() < 1e-12);
    let zero = SoftActivity::new("s", vec![vec![0.0; 5]; 2], 0.1).unwrap();
    assert!(binarize(&zero, 0.5).unwrap().turns.is_empty());
    let full = SoftActivity::new("s", vec![vec![1.0; 10]], 0.1).unwrap();
    let t = &binarize(&full, 0.5).unwrap().turns[0];
    assert!(t.start == 0.0 && (t.end - 1.0).abs() < 1e-12);
}

#[test]
fn bounds_examples() {
    let s = seg(&[("a", 1.0, 3.0), ("b", 1.0, 1.8), ("c", 0.2, 1.0)]);
    let eroded = erode_bounds(&s, 0.5).unwrap();
    assert_eq!(eroded.turns, vec![Turn::new("a", 1.5, 2.5)]);
    assert_eq!(erode_bounds(&s, 0.0).unwrap(), s);
    let ext = extend_segments(&s, 0.5, 100.0).unwrap();
    assert_eq!(ext.turns[0], Turn::new("a", 0.5, 3.5));
    assert_eq!(ext.turns[2], Turn::new("c", 0.0, 1.5));
    assert_eq!(extend_segments(&s, 0.0, 100.0).unwrap(), s);
}

fn arb_activity(speakers: usize, frames: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    proptest::collection::vec(proptest::collection::vec(0.0f64..=1.0, frames), speakers)
}

proptest! {
    #[test]
    fn extend_then_erode_restores_interior_turns(
        turns in proptest::collection::vec((0usize..3, 1.0f64..50.0, 0.01f64..10.0), 1..8),
        margin in 0.0f64..1.0,
    ) {
        let s = Segmentation::new(
            "s",
            turns.iter().map(|&(k, st, d)| Turn::new(format!("s{k}"), st, st + d)).collect(),
        ).unwrap();
        let back = erode_bounds(&extend_segments(&s, margin, 100.0).unwrap(), margin).unwrap();
        prop_assert_eq!(back.turns.len(), s.turns.len());
        for (a, b) in back.turns.iter().zip(&s.turns) {
            prop_assert_eq!(&a.speaker, &b.speaker);
            prop_assert!((a.start - b.start).abs() < 1e-9 && (a.end - b.end).abs() < 1e-9);
        }
        let eroded = erode_bounds(&s, margin).unwrap();
        prop_assert!(eroded.turns.iter().all(|t| t.end > t.start));
        prop_assert_eq!(
            eroded.turns.len(),
            s.turns.iter().filter(|t| t.end - t.start > 2.0 * margin).count()
        );
    }

    #[test]
    fn soft_fusion_stays_in_unit_interval(
        rows in arb_activity(2, 12),
        other in arb_activity(2, 12),
    ) {
        let reference = seg(&[("A", 0.0, 0.6), ("B", 0.5, 1.2)]);
        let acts = vec![
            SoftActivity::new("s", rows, 0.1).unwrap(),
            SoftActivity::new("s", other, 0.1).unwrap(),
        ];
        let fused = soft_fuse(&acts, &reference).unwrap();
        prop_assert!(fused.probs.iter().flatten().all(|p| (0.0..=1.0).contains(p)));
        prop_assert!(binarize(&fused, 0.5).unwrap().num_speakers() <= reference.num_speakers());
    }

    #[test]
    fn fusion_ignores_order_of_identical_weight_inputs(perm in Just(()).prop_perturb(|_, mut rng| {
        let mut v = vec![0usize, 1, 2];
        for i in (1..3).rev() { v.swap(i, (rng.next_u32() as usize) % (i + 1)); }
        v
    })) {
        let hs = [
            seg(&[("a", 0.0, 2.0), ("b", 2.0, 5.0)]),
            seg(&[("x", 0.0, 2.5), ("y", 2.5, 5.0)]),
            seg(&[("p", 0.0, 1.0), ("q", 1.0, 5.0), ("p", 3.0, 4.0)]),
        ];
        let base = doverlap_fuse(&FusionInput::uniform(hs.to_vec())).unwrap();
        let shuffled = doverlap_fuse(&FusionInput::uniform(perm.iter().map(|&i| hs[i].clone()).collect())).unwrap();
        prop_assert_eq!(base.speaker_intervals().into_values().collect::<Vec<_>>(),
                        shuffled.speaker_intervals().into_values().collect::<Vec<_>>());
    }
}
