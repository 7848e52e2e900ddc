use proptest::prelude::*;
use thermoflow::symbolic::{Branch, PointRep, RealizationSpec, SymbolicSystem};

/// Full 2-shift with affine branches of slopes `r0`, `r1` placed at the ends
/// of the unit interval.
fn affine_pair(r0: f64, r1: f64) -> SymbolicSystem {
    let branches = vec![Branch::Affine { a: r0, b: 0.0 }, Branch::Affine { a: r1, b: 1.0 - r1 }];
    SymbolicSystem::build(2, vec![vec![1, 1], vec![1, 1]], Some(RealizationSpec { branches, constants: None })).unwrap()
}

fn slopes() -> impl Strategy<Value = (f64, f64)> {
    (0.1f64..0.6, 0.1f64..0.6).prop_filter("branches must not overlap", |(a, b)| a + b <= 1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn affine_diameters_are_slope_products((r0, r1) in slopes(), word in proptest::collection::vec(0u8..2, 1..12)) {
        let sys = affine_pair(r0, r1);
        let expect: f64 = word.iter().map(|&s| if s == 0 { r0 } else { r1 }).product();
        // Diameters are endpoint differences: absolute rounding of a few ulps of 1.
        prop_assert!((sys.diameter(&word).unwrap() - expect).abs() <= 4.0 * word.len() as f64 * f64::EPSILON);
    }

    #[test]
    fn metric_suite_holds((r0, r1) in slopes()) {
        let r = affine_pair(r0, r1).metric_suite(5).unwrap();
        prop_assert!(r.ok, "{:?}", r);
    }

    #[test]
    fn d_dominates_distance((r0, r1) in slopes(), x in proptest::collection::vec(0u8..2, 1..16), y in proptest::collection::vec(0u8..2, 1..16)) {
        let sys = affine_pair(r0, r1);
        let (px, py) = (PointRep::new(&sys, x.clone()), PointRep::new(&sys, y.clone()));
        let d = sys.metric_d(&px, &py).unwrap();
        prop_assert!(d >= (px.coord.unwrap() - py.coord.unwrap()).abs() - 1e-15);
        prop_assert_eq!(d, sys.metric_d(&py, &px).unwrap());
        prop_assert!(d <= 1.0);
    }

    #[test]
    fn distortion_ratios_lie_between_slopes((r0, r1) in slopes()) {
        let d = affine_pair(r0, r1).distortion_ratios(6).unwrap();
        // Smallest cylinders have diameter ≥ 0.1⁶, so endpoint rounding stays below 1e-9 relative.
        prop_assert!((d.ratio_min - r0.min(r1)).abs() < 1e-9);
        prop_assert!((d.ratio_max - r0.max(r1)).abs() < 1e-9);
    }

    #[test]
    fn cylinder_bounds_cover_every_cylinder((r0, r1) in slopes(), n in 1usize..9) {
        let sys = affine_pair(r0, r1);
        let b = sys.cylinder_bounds(8).unwrap();
        for w in sys.admissible_words(n) {
            let m = (n - 1) as i32;
            let d = sys.diameter(&w).unwrap();
            prop_assert!(d <= b.c1 * b.rho1.powi(m) * (1.0 + 1e-12));
            prop_assert!(d >= b.c_low / b.gamma1.powi(m) * (1.0 - 1e-12));
        }
    }
}
