use centerkit_core::heatmap::{gc_value, merge_max, render_gc, GcParams, Heatmap};
use centerkit_core::oracle::{centerness_reference, gc_reference};
use centerkit_core::{BoundingBox, ImageInfo};
use proptest::prelude::*;

fn arb_box(max: f64) -> impl Strategy<Value = BoundingBox> {
    (0.0..max * 0.8, 0.0..max * 0.8, 1.0..max * 0.5, 1.0..max * 0.5)
        .prop_map(|(x, y, w, h)| BoundingBox::new(x, y, w, h, 1, 1))
}

fn image(size: f64) -> ImageInfo {
    ImageInfo::new(1, size, size, "p").unwrap()
}

proptest! {
    #[test]
    fn gc_matches_centerness(l in 1e-3..100.0f64, r in 1e-3..100.0f64, t in 1e-3..100.0f64, b in 1e-3..100.0f64) {
        let v = gc_value(l, r, t, b, GcParams::default()).unwrap();
        prop_assert!((v - centerness_reference(l, r, t, b)).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&v));
    }

    #[test]
    fn rendered_values_are_probabilities(
        boxes in prop::collection::vec(arb_box(96.0), 0..5),
        eta in 0.0..3.0f64,
        phi in 0.0..3.0f64,
        stride in prop::sample::select(vec![1.0f32, 2.0, 4.0, 8.0]),
    ) {
        let img = image(96.0);
        let map = render_gc(&boxes, &img, stride, GcParams::new(eta, phi).unwrap()).unwrap();
        prop_assert!(map.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn rendered_gc_matches_scalar_reference(b in arb_box(64.0), eta in 0.0..2.0f64, phi in 0.0..2.0f64) {
        let img = image(64.0);
        let map = render_gc(&[b], &img, 2.0, GcParams::new(eta, phi).unwrap()).unwrap();
        let mut interior = false;
        for i in 0..map.height() {
            for j in 0..map.width() {
                let (x, y) = map.sample_point(i, j);
                let reference = gc_reference(x, y, &b, eta, phi);
                if b.contains_strictly(x, y) {
                    interior = true;
                    prop_assert!((map.get(0, i, j) as f64 - reference).abs() < 1e-6);
                }
            }
        }
        if interior {
            let zeros_outside = (0..map.height()).all(|i| (0..map.width()).all(|j| {
                let (x, y) = map.sample_point(i, j);
                b.contains_strictly(x, y) || map.get(0, i, j) == 0.0
            }));
            prop_assert!(zeros_outside);
        }
    }

    #[test]
    fn unimodal_along_rows_and_columns(b in arb_box(64.0), eta in 0.05..2.0f64, phi in 0.05..2.0f64) {
        let img = image(64.0);
        let map = render_gc(&[b], &img, 1.0, GcParams::new(eta, phi).unwrap()).unwrap();
        let (cx, cy) = b.center();
        for i in 0..map.height() {
            let inside: Vec<(f64, f32)> = (0..map.width())
                .map(|j| (map.sample_point(i, j), map.get(0, i, j)))
                .filter(|((x, y), _)| b.contains_strictly(*x, *y))
                .map(|((x, _), v)| (x, v))
                .collect();
            for w in inside.windows(2) {
                if w[1].0 <= cx {
                    prop_assert!(w[1].1 >= w[0].1);
                } else if w[0].0 >= cx {
                    prop_assert!(w[1].1 <= w[0].1);
                }
            }
        }
        for j in 0..map.width() {
            let inside: Vec<(f64, f32)> = (0..map.height())
                .map(|i| (map.sample_point(i, j), map.get(0, i, j)))
                .filter(|((x, y), _)| b.contains_strictly(*x, *y))
                .map(|((_, y), v)| (y, v))
                .collect();
            for w in inside.windows(2) {
                if w[1].0 <= cy {
                    prop_assert!(w[1].1 >= w[0].1);
                } else if w[0].0 >= cy {
                    prop_assert!(w[1].1 <= w[0].1);
                }
            }
        }
    }

    #[test]
    fn larger_exponent_never_raises(b in arb_box(64.0), eta in 0.0..2.0f64, bump in 0.0..2.0f64, phi in 0.0..2.0f64) {
        let img = image(64.0);
        let lo = render_gc(&[b], &img, 2.0, GcParams::new(eta, phi).unwrap()).unwrap();
        let hi_eta = render_gc(&[b], &img, 2.0, GcParams::new(eta + bump, phi).unwrap()).unwrap();
        let hi_phi = render_gc(&[b], &img, 2.0, GcParams::new(eta, phi + bump).unwrap()).unwrap();
        for ((a, b1), b2) in lo.data().iter().zip(hi_eta.data()).zip(hi_phi.data()) {
            prop_assert!(b1 <= a);
            prop_assert!(b2 <= a);
        }
    }

    #[test]
    fn order_of_boxes_is_irrelevant(boxes in prop::collection::vec(arb_box(64.0), 1..6)) {
        let img = image(64.0);
        let fwd = render_gc(&boxes, &img, 4.0, GcParams::default()).unwrap();
        let mut rev = boxes.clone();
        rev.reverse();
        let bwd = render_gc(&rev, &img, 4.0, GcParams::default()).unwrap();
        prop_assert_eq!(fwd, bwd);
    }

    #[test]
    fn merge_max_is_a_semilattice(
        a in prop::collection::vec(0.0..=1.0f32, 12),
        b in prop::collection::vec(0.0..=1.0f32, 12),
        c in prop::collection::vec(0.0..=1.0f32, 12),
    ) {
        let a = Heatmap::from_data(1, 3, 4, 4.0, a).unwrap();
        let b = Heatmap::from_data(1, 3, 4, 4.0, b).unwrap();
        let c = Heatmap::from_data(1, 3, 4, 4.0, c).unwrap();
        prop_assert_eq!(merge_max(&a, &b).unwrap(), merge_max(&b, &a).unwrap());
        prop_assert_eq!(
            merge_max(&merge_max(&a, &b).unwrap(), &c).unwrap(),
            merge_max(&a, &merge_max(&b, &c).unwrap()).unwrap()
        );
        prop_assert_eq!(merge_max(&a, &a).unwrap(), a);
    }
}
