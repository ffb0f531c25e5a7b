//! Geometric invariances of μ₂ and the verdict, and agreement with P1
//! finite elements. Each case runs full solves, so case counts are small.

use hotspots_core::analysis::{hot_spots_verdict, Classification};
use hotspots_core::config::RunConfig;
use hotspots_core::eigensolver::{fem_bracket, find_mu2, residual_certificate};
use hotspots_core::geometry::{LabeledTriangle, Vec2};
use proptest::prelude::*;
use std::f64::consts::PI;

fn shape() -> impl Strategy<Value = LabeledTriangle> {
    (0.3f64..1.8, 0.3f64..1.8)
        .prop_filter("third angle", |(a, b)| PI - a - b > 0.3)
        .prop_map(|(a, b)| LabeledTriangle::from_angles(a, b).unwrap())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 4, ..ProptestConfig::default() })]

    #[test]
    fn mu_scales_inversely_with_area(t in shape(), s in 0.3f64..4.0) {
        let cfg = RunConfig::default();
        let mu = find_mu2(&t, &cfg.solver).unwrap().mu;
        let mu_s = find_mu2(&t.scaled(s).unwrap(), &cfg.solver).unwrap().mu;
        prop_assert!(rel(mu_s * s * s, mu) < 1e-7, "{mu} vs {}", mu_s * s * s);
    }

    #[test]
    fn rigid_motion_moves_the_critical_point(t in shape(), angle in -PI..PI, dx in -5.0f64..5.0, dy in -5.0f64..5.0) {
        let cfg = RunConfig::default();
        let shift = Vec2::new(dx, dy);
        let m = t.moved(angle, shift).unwrap();
        let a = find_mu2(&t, &cfg.solver).unwrap();
        let b = find_mu2(&m, &cfg.solver).unwrap();
        prop_assert!(rel(b.mu, a.mu) < 1e-8);
        let va = hot_spots_verdict(&a.field(), &cfg.analysis).unwrap();
        let vb = hot_spots_verdict(&b.field(), &cfg.analysis).unwrap();
        if va.classification != Classification::Ambiguous && vb.classification != Classification::Ambiguous {
            prop_assert_eq!(va.classification, vb.classification);
        }
        if let (Some(pa), Some(pb)) = (va.critical_point(), vb.critical_point()) {
            let (c, s) = (angle.cos(), angle.sin());
            let p = Vec2::new(c * pa.location[0] - s * pa.location[1] + dx, s * pa.location[0] + c * pa.location[1] + dy);
            let d = ((p.x - pb.location[0]).powi(2) + (p.y - pb.location[1]).powi(2)).sqrt();
            prop_assert!(d < 1e-6 * t.diameter(), "critical points {d} apart");
        }
    }

    #[test]
    fn relabeling_keeps_mu_and_verdict(t in shape(), k in 0usize..6) {
        let perms = [[0, 1, 2], [1, 2, 0], [2, 0, 1], [0, 2, 1], [2, 1, 0], [1, 0, 2]];
        let cfg = RunConfig::default();
        let r = t.relabeled(perms[k]).unwrap();
        let a = find_mu2(&t, &cfg.solver).unwrap();
        let b = find_mu2(&r, &cfg.solver).unwrap();
        prop_assert!(rel(b.mu, a.mu) < 1e-8);
        let va = hot_spots_verdict(&a.field(), &cfg.analysis).unwrap();
        let vb = hot_spots_verdict(&b.field(), &cfg.analysis).unwrap();
        if va.classification != Classification::Ambiguous && vb.classification != Classification::Ambiguous {
            prop_assert_eq!(va.classification, vb.classification);
        }
    }

    #[test]
    fn finite_elements_bound_mu_from_above(t in shape()) {
        let cfg = RunConfig::default();
        let ep = find_mu2(&t, &cfg.solver).unwrap();
        let cert = residual_certificate(&ep, 200, &cfg.solver).unwrap();
        prop_assert!(cert.certified);
        let fem = fem_bracket(&t, 24).unwrap();
        prop_assert!(fem >= ep.mu * (1.0 - 1e-9), "fem {fem} below mps {}", ep.mu);
        prop_assert!(rel(fem, ep.mu) < 0.03);
    }
}
