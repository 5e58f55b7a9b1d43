use std::collections::BTreeMap;

use octoport_core::eightport::JointOutcomeDistribution;
use octoport_core::fock::coherent_state;
use octoport_core::linalg::{c, vector_norm};
use octoport_core::multimode::{apply_two_mode, BeamSplitter, MultimodeState};
use octoport_core::region::tiling;
use octoport_core::{Cutoff, Rectangle};
use proptest::prelude::*;

fn cut(d: usize) -> Cutoff {
    Cutoff::new(d).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tiling_covers_each_point_once(
        q0 in -5.0f64..0.0, w in 0.5f64..6.0, p0 in -5.0f64..0.0, h in 0.5f64..6.0,
        nq in 1usize..6, np in 1usize..6, u in 0.0f64..1.0, v in 0.0f64..1.0,
    ) {
        let window = Rectangle::from_bounds(q0, q0 + w, p0, p0 + h);
        let rects = tiling(&window, (nq, np), None);
        let (q, p) = (q0 + u * w, p0 + v * h);
        prop_assert_eq!(rects.iter().filter(|r| r.contains(q, p)).count(), 1);
    }

    #[test]
    fn reordering_twice_is_identity(
        a in -1.0f64..1.0, b in -1.0f64..1.0, d1 in 10usize..14, d2 in 10usize..14, d3 in 10usize..14,
    ) {
        let vs = [
            coherent_state(c(a, 0.0), cut(d1)).unwrap(),
            coherent_state(c(0.0, b), cut(d2)).unwrap(),
            coherent_state(c(a, b), cut(d3)).unwrap(),
        ];
        let state = MultimodeState::product(&[1, 2, 3], &[&vs[0], &vs[1], &vs[2]]).unwrap();
        let back = state.reordered(&[3, 1, 2]).unwrap().reordered(&[1, 2, 3]).unwrap();
        prop_assert_eq!(back, state);
    }

    #[test]
    fn beam_splitter_preserves_norm(re in -1.5f64..1.5, im in -1.5f64..1.5, n in 0usize..6) {
        let d = cut(24);
        let bs = BeamSplitter::new(1, 2, d, d).unwrap();
        let input = MultimodeState::product(
            &[1, 2],
            &[&coherent_state(c(re, im), d).unwrap(), &octoport_core::StateVector::basis(n, d).unwrap()],
        )
        .unwrap();
        let out = apply_two_mode(&bs, &input, 1, 2).unwrap();
        let (before, after) = (vector_norm(input.amplitudes().unwrap()), vector_norm(out.amplitudes().unwrap()));
        prop_assert!((before - after).abs() < 1e-12, "norm {before} -> {after}");
    }

    #[test]
    fn joint_distribution_is_additive(
        weights in proptest::collection::vec(0.0f64..1.0, 1..40),
        cut_q in -3.0f64..3.0, cut_p in -3.0f64..3.0,
    ) {
        let step = 0.5;
        let mut map = BTreeMap::new();
        for (i, w) in weights.iter().enumerate() {
            map.insert((i as i64 % 9 - 4, i as i64 / 9 - 2), *w);
        }
        let joint = JointOutcomeDistribution::new(step, map);
        let whole = Rectangle::plane();
        let left = Rectangle::from_bounds(f64::NEG_INFINITY, cut_q, f64::NEG_INFINITY, f64::INFINITY);
        let right = Rectangle::from_bounds(cut_q, f64::INFINITY, f64::NEG_INFINITY, cut_p);
        let corner = Rectangle::from_bounds(cut_q, f64::INFINITY, cut_p, f64::INFINITY);
        let parts = joint.probability(&left) + joint.probability(&right) + joint.probability(&corner);
        prop_assert!((joint.probability(&whole) - parts).abs() < 1e-12);
        prop_assert!((joint.probability(&whole) - joint.total()).abs() < 1e-12);
    }
}
