//! Property tests for the potential representation: algebraic identities
//! that must hold for arbitrary piecewise data.

use std::f64::consts::PI;

use proptest::prelude::*;

use gapkit::potential::{proof_perturbation, PerturbationKind, Potential, ShapeClass};

fn arb_breakpoints(max_interior: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.02f64..0.98, 0..=max_interior).prop_map(|mut fracs| {
        fracs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        fracs.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
        let mut bps = vec![0.0];
        bps.extend(fracs.iter().map(|f| f * PI));
        bps.push(PI);
        bps
    })
}

fn arb_potential() -> impl Strategy<Value = Potential> {
    arb_breakpoints(6).prop_flat_map(|bps| {
        let n = bps.len() - 1;
        prop::collection::vec(-5.0f64..20.0, n)
            .prop_map(move |heights| {
                Potential::piecewise_constant(bps.clone(), &heights, ShapeClass::None).unwrap()
            })
    })
}

fn arb_single_well() -> impl Strategy<Value = Potential> {
    (arb_breakpoints(6), 0.0f64..15.0).prop_flat_map(|(bps, m)| {
        let n = bps.len() - 1;
        (0..=n, prop::collection::vec(0.0f64..1.0, n)).prop_map(move |(t, raw)| {
            let mut heights = vec![0.0; n];
            let mut level = raw.first().cloned().unwrap_or(0.0) * m;
            for j in (0..t).rev() {
                heights[j] = level;
                level = (level + raw[j] * m / 3.0).min(m);
            }
            level = raw.last().cloned().unwrap_or(0.0) * m;
            for j in t..n {
                heights[j] = level;
                level = (level + raw[j] * m / 3.0).min(m);
            }
            Potential::piecewise_constant(bps.clone(), &heights, ShapeClass::SingleWell).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn reflect_is_an_involution(v in arb_potential(), x in 0.0f64..PI) {
        let rr = v.reflect().reflect();
        prop_assert!((rr.evaluate(x).unwrap() - v.evaluate(x).unwrap()).abs() < 1e-12);
        prop_assert_eq!(rr.breakpoints.len(), v.breakpoints.len());
    }

    #[test]
    fn reflect_evaluates_mirrored(v in arb_potential(), x in 0.001f64..3.14) {
        // compare against the left limit on the mirror side so jump
        // conventions agree
        let r = v.reflect();
        let direct = r.evaluate(x).unwrap();
        let mirrored = v.eval_total_left_limit(PI - x).unwrap();
        prop_assert!((direct - mirrored).abs() < 1e-12, "{direct} vs {mirrored}");
    }

    #[test]
    fn blend_is_pointwise_convex_combination(
        v in arb_potential(),
        p in arb_potential(),
        kappa in 0.0f64..=1.0,
        x in 0.0f64..PI,
    ) {
        let b = v.blend(&p, kappa).unwrap();
        let want = v.evaluate(x).unwrap() + kappa * (p.evaluate(x).unwrap() - v.evaluate(x).unwrap());
        prop_assert!((b.evaluate(x).unwrap() - want).abs() < 1e-10);
    }

    #[test]
    fn blend_endpoint_recovers_first_argument(v in arb_potential(), p in arb_potential(), x in 0.0f64..PI) {
        let b = v.blend(&p, 0.0).unwrap();
        prop_assert_eq!(b.evaluate(x).unwrap(), v.evaluate(x).unwrap());
    }

    #[test]
    fn self_blend_is_identity(v in arb_potential(), kappa in 0.0f64..=1.0, x in 0.0f64..PI) {
        let b = v.blend(&v, kappa).unwrap();
        prop_assert_eq!(b.evaluate(x).unwrap(), v.evaluate(x).unwrap());
    }

    #[test]
    fn single_well_classification_is_reflection_invariant(v in arb_single_well()) {
        let c = v.classify(1e-12);
        let cr = v.reflect().classify(1e-12);
        prop_assert!(c.single_well.is_some());
        prop_assert!(cr.single_well.is_some());
        let t = c.single_well.unwrap();
        let tr = cr.single_well.unwrap();
        prop_assert!((t.min - (PI - tr.max)).abs() < 1e-12);
        prop_assert!((t.max - (PI - tr.min)).abs() < 1e-12);
    }

    #[test]
    fn fills_preserve_the_single_well_class(v in arb_single_well(), frac in 0.05f64..0.95, kappa in 0.0f64..=1.0) {
        let c = v.classify(1e-12);
        let t = c.single_well.unwrap();
        // anchors on the falling resp. rising side of the well
        let left_anchor = (t.min * frac).max(1e-6);
        let right_anchor = (t.max + (PI - t.max) * frac).min(PI - 1e-6);
        for kind in [
            PerturbationKind::LeftFill { anchor: left_anchor },
            PerturbationKind::RightFill { anchor: right_anchor },
        ] {
            let p = proof_perturbation(&v, kind).unwrap();
            let b = v.blend(&p, kappa).unwrap();
            prop_assert!(
                b.classify(1e-9).single_well.is_some(),
                "{kind:?} at kappa {kappa} left the class"
            );
        }
    }

    #[test]
    fn fill_directions_are_one_sided(v in arb_single_well(), frac in 0.05f64..0.95) {
        // P - V <= 0 on the filled region for anchors on the monotone sides
        let c = v.classify(1e-12);
        let t = c.single_well.unwrap();
        let anchor = (t.min * frac).max(1e-6);
        let p = proof_perturbation(&v, PerturbationKind::LeftFill { anchor }).unwrap();
        let mut x = 0.0;
        while x < anchor {
            prop_assert!(p.evaluate(x).unwrap() <= v.evaluate(x).unwrap() + 1e-12);
            x += anchor / 7.0 + 1e-9;
        }
    }
}
