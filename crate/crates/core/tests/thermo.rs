use proptest::prelude::*;
use thermoflow::field::FieldSpec;
use thermoflow::orbits::primitive_orbits;
use thermoflow::symbolic::uniform_full_shift;
use thermoflow::thermo::{pressure, solve_pressure_root, Suspension};

fn quad() -> FieldSpec {
    FieldSpec::expr("1 + x^2/2").unwrap()
}

#[test]
fn quadratic_roof_pressure_root_converges_in_depth() {
    let sys = uniform_full_shift(2);
    let p = |d| solve_pressure_root(&sys, &FieldSpec::zero(), &quad(), d, 1e-13).unwrap();
    let (p8, p11, p14) = (p(8), p(11), p(14));
    assert!((p8 - p11).abs() < 2e-4);
    assert!((p11 - p14).abs() < (p8 - p11).abs() / 4.0);

    // Orbit oracle: Z_n = Σ_{σⁿx = x} e^{−P τ_n(x)} at the true periodic points
    // grows like e^{n Pr(−Pτ)}, so Z_{n+1}/Z_n → 1 at the root.
    let orbits = primitive_orbits(&sys, &quad(), 16).unwrap();
    let z = |n: usize| -> f64 {
        orbits
            .iter()
            .filter(|o| n % o.word.len() == 0)
            .map(|o| o.word.len() as f64 * (-p14 * o.period * (n / o.word.len()) as f64).exp())
            .sum()
    };
    assert!((z(16) / z(15) - 1.0).abs() < 1e-3, "{}", z(16) / z(15));
}

fn spectral_radius_2x2(m: [[f64; 2]; 2]) -> f64 {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    0.5 * (tr + (tr * tr - 4.0 * det).sqrt())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn depth2_potential_pressure_is_log_spectral_radius(v in proptest::collection::vec(-2.0f64..2.0, 4)) {
        let sys = uniform_full_shift(2);
        let p = pressure(&sys, &FieldSpec::Table { depth: 2, values: v.clone() }, 6).unwrap().value;
        let m = [[v[0].exp(), v[1].exp()], [v[2].exp(), v[3].exp()]];
        prop_assert!((p - spectral_radius_2x2(m).ln()).abs() < 1e-10);
    }

    #[test]
    fn bernoulli_pressure_is_log_partition_sum(k in 2usize..=4, seed in proptest::collection::vec(-1.5f64..1.5, 4)) {
        let v = seed[..k].to_vec();
        let p = pressure(&uniform_full_shift(k), &FieldSpec::Table { depth: 1, values: v.clone() }, 4).unwrap().value;
        prop_assert!((p - v.iter().map(|x| x.exp()).sum::<f64>().ln()).abs() < 1e-11);
    }

    #[test]
    fn constant_roof_rescales_pressure(c in 0.2f64..5.0, v in proptest::collection::vec(-1.0f64..1.0, 2)) {
        let sys = uniform_full_shift(2);
        let f = FieldSpec::Table { depth: 1, values: v.clone() };
        let pr = pressure(&sys, &f, 4).unwrap().value;
        let p = solve_pressure_root(&sys, &f, &FieldSpec::Const(c), 4, 1e-13).unwrap();
        prop_assert!((p - pr / c).abs() < 1e-11);
    }

    #[test]
    fn normalized_operator_fixes_constants(a in -0.1f64..0.1) {
        let s = Suspension::new(&uniform_full_shift(2), FieldSpec::zero(), quad(), 8, Some(1.0)).unwrap();
        let p = s.pressure_root(1e-13).unwrap();
        let st = s.state(p, a, 1e-13).unwrap();
        prop_assert!(st.m1_error < 1e-10);
        prop_assert!(st.h.values.iter().all(|&v| v > 0.0));
        // λ_a is decreasing in a for a positive roof.
        let st0 = s.state(p, 0.0, 1e-13).unwrap();
        prop_assert!((st.lambda - 1.0).abs() <= 1e-12 || (st.lambda < st0.lambda) == (a > 0.0));
    }
}
