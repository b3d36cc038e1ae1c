mod common;

use irrobust_core::corruption::rng::Rng;
use irrobust_core::eval::{average_precision, Detection, EvalConfig, GroundTruthBox, Interpolation};
use irrobust_core::{ap50, BBox, ImageId};
use proptest::prelude::*;

fn instance() -> impl Strategy<Value = (Vec<GroundTruthBox>, Vec<Detection>)> {
    any::<u64>().prop_map(|seed| common::random_instance(&mut Rng::new(seed), 5, 4, 6, 2))
}

fn distinct_scores(dets: &mut [Detection]) {
    for (i, d) in dets.iter_mut().enumerate() {
        d.score = 0.999 - i as f64 * 1e-3;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn matches_oracle((gts, dets) in instance()) {
        for cat in 1..=2 {
            let got = ap50(&gts, &dets, cat);
            let want = common::oracle_ap(&gts, &dets, cat, 101);
            match (got, want) {
                (Some(g), Some(w)) => prop_assert!((g - w).abs() <= 1e-9, "{} vs {}", g, w),
                (g, w) => prop_assert_eq!(g, w),
            }
            let voc = average_precision(&gts, &dets, cat, &EvalConfig { interpolation: Interpolation::Voc11, ..Default::default() });
            let voc_oracle = common::oracle_ap(&gts, &dets, cat, 11);
            if let (Some(g), Some(w)) = (voc, voc_oracle) {
                prop_assert!((g - w).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn permutation_invariant((gts, mut dets) in instance(), seed in any::<u64>()) {
        distinct_scores(&mut dets);
        let before = ap50(&gts, &dets, 1);
        let mut rng = Rng::new(seed);
        for i in (1..dets.len()).rev() {
            let j = rng.below(i as u64 + 1) as usize;
            dets.swap(i, j);
        }
        prop_assert_eq!(before, ap50(&gts, &dets, 1));
    }

    #[test]
    fn score_scaling_invariant((gts, mut dets) in instance(), factor in 0.01f64..=1.0) {
        distinct_scores(&mut dets);
        let before = ap50(&gts, &dets, 1);
        for d in &mut dets {
            d.score *= factor;
        }
        prop_assert_eq!(before, ap50(&gts, &dets, 1));
    }

    #[test]
    fn top_scoring_true_positive_never_hurts((gts, mut dets) in instance()) {
        let Some(target) = gts.iter().find(|g| g.category_id == 1 && !g.ignore).cloned() else {
            return Ok(());
        };
        // Remove detections that could already claim the target, then add an exact hit on top.
        dets.retain(|d| !(d.image_id == target.image_id && d.category_id == 1));
        let before = ap50(&gts, &dets, 1).unwrap();
        dets.push(Detection { image_id: target.image_id.clone(), category_id: 1, bbox: target.bbox, score: 2.0 });
        let after = ap50(&gts, &dets, 1).unwrap();
        prop_assert!(after >= before - 1e-12, "{} -> {}", before, after);
    }

    #[test]
    fn bottom_false_positive_never_raises((gts, dets) in instance()) {
        let Some(before) = ap50(&gts, &dets, 1) else { return Ok(()) };
        let mut more = dets.clone();
        more.push(Detection {
            image_id: ImageId::Str("no such image".into()),
            category_id: 1,
            bbox: BBox::new(0.0, 0.0, 1.0, 1.0),
            score: -1.0,
        });
        prop_assert!(ap50(&gts, &more, 1).unwrap() <= before + 1e-12);
    }
}
