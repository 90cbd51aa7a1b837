use hoikit::diffusion::{build_schedule, Normalizer};
use hoikit::metrics::contact_metrics;
use hoikit::motion::rotation::{exp_map, geodesic_distance};
use hoikit::motion::{ContactChannels, Vec3};
use hoikit::Exec;
use ndarray::Array2;
use proptest::prelude::*;

fn channels(bits: &[bool]) -> ContactChannels {
    ContactChannels {
        frames: bits
            .chunks(4)
            .map(|c| std::array::from_fn(|i| if c[i] { 1.0 } else { 0.0 }))
            .collect(),
    }
}

fn axis() -> impl Strategy<Value = Vec3> {
    prop::array::uniform3(-3.0..3.0f64).prop_map(Vec3::from)
}

proptest! {
    #[test]
    fn contact_scores_are_bounded(bits in prop::collection::vec(any::<bool>(), 8..80)) {
        let n = bits.len() / 8 * 4;
        let (a, b) = (channels(&bits[..n]), channels(&bits[n..2 * n]));
        let s = contact_metrics(&a, &b).unwrap();
        for v in [s.precision, s.recall, s.f1, s.percent] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        let same = contact_metrics(&a, &a).unwrap();
        prop_assert_eq!(same.f1, 1.0);
        // swapping prediction and truth swaps precision and recall
        let t = contact_metrics(&b, &a).unwrap();
        prop_assert_eq!((s.precision, s.recall), (t.recall, t.precision));
    }

    #[test]
    fn geodesic_distance_is_a_metric(a in axis(), b in axis(), c in axis()) {
        let (ra, rb, rc) = (exp_map(&a), exp_map(&b), exp_map(&c));
        let ab = geodesic_distance(&ra, &rb);
        prop_assert!((ab - geodesic_distance(&rb, &ra)).abs() < 1e-9);
        prop_assert!((0.0..=std::f64::consts::PI + 1e-9).contains(&ab));
        prop_assert!(ab <= geodesic_distance(&ra, &rc) + geodesic_distance(&rc, &rb) + 1e-7);
    }

    #[test]
    fn schedule_marginals_shrink(steps in 1usize..400, lo in 1e-5..1e-3f64, span in 1e-4..0.05f64) {
        let s = build_schedule(steps, lo, lo + span).unwrap();
        let mut prev = 1.0;
        for n in 1..=steps {
            let ab = s.alpha_bar(n);
            prop_assert!(ab < prev && ab > 0.0);
            prop_assert!((ab - prev * (1.0 - s.beta(n))).abs() < 1e-12);
            prev = ab;
        }
    }

    #[test]
    fn normalizer_round_trips(mean in prop::collection::vec(-5.0..5.0f64, 6), std in prop::collection::vec(0.01..4.0f64, 6),
                              rows in 1usize..6) {
        let n = Normalizer { mean, std };
        let x = Array2::from_shape_fn((rows, 6), |(i, k)| (i * 7 + k) as f64 * 0.3 - 2.0);
        let valid = vec![true; rows];
        let back = n.denormalize(n.normalize(x.view(), &valid).view());
        prop_assert!((&back - &x).iter().all(|d| d.abs() < 1e-9));
    }

    #[test]
    fn exec_strategies_agree(xs in prop::collection::vec(-1e3..1e3f64, 0..200)) {
        let f = |x: &f64| (x * 1.5).sin() + x;
        prop_assert_eq!(Exec::Sequential.map(&xs, f), Exec::Parallel.map(&xs, f));
    }
}
