use num_complex::Complex64;
use proptest::prelude::*;
use thermoflow::field::FieldSpec;
use thermoflow::orbits::{
    counting_report, fixed_point_count, flow_entropy, li, lyndon_words, primitive_count, primitive_orbits, zeta_truncated,
};
use thermoflow::symbolic::{uniform_full_shift, SymbolicSystem};
use thermoflow::thermo::pressure;

fn quad() -> FieldSpec {
    FieldSpec::expr("1 + x^2/2").unwrap()
}

fn trace_power(a: &[Vec<u8>], n: usize) -> u128 {
    let k = a.len();
    let mut p: Vec<Vec<u128>> = (0..k).map(|i| (0..k).map(|j| u128::from(i == j)).collect()).collect();
    for _ in 0..n {
        p = (0..k).map(|i| (0..k).map(|j| (0..k).map(|l| p[i][l] * a[l][j] as u128).sum()).collect()).collect();
    }
    (0..k).map(|i| p[i][i]).sum()
}

fn matrix() -> impl Strategy<Value = Vec<Vec<u8>>> {
    (2usize..=4).prop_flat_map(|k| proptest::collection::vec(proptest::collection::vec(0u8..=1, k), k))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn necklace_identity(a in matrix(), n in 1usize..=10) {
        let Ok(sys) = SymbolicSystem::build(a.len(), a.clone(), None) else { return Ok(()) };
        prop_assert_eq!(fixed_point_count(&sys, n).unwrap(), trace_power(&a, n));
        let weighted: u128 = (1..=n).filter(|d| n % d == 0).map(|d| d as u128 * primitive_count(&sys, d).unwrap()).sum();
        prop_assert_eq!(weighted, trace_power(&a, n));
        prop_assert_eq!(lyndon_words(&sys, n).len() as u128, primitive_count(&sys, n).unwrap());
    }

    #[test]
    fn zeta_conjugate_symmetry(re in 0.8f64..3.0, im in -20.0f64..20.0) {
        let sys = uniform_full_shift(2);
        let s = Complex64::new(re, im);
        let a = zeta_truncated(&sys, &quad(), s, 12, 8).unwrap().complex();
        let b = zeta_truncated(&sys, &quad(), s.conj(), 12, 8).unwrap().complex();
        prop_assert!((a - b.conj()).norm() <= 1e-12 * a.norm().max(1.0));
    }

    #[test]
    fn real_s_gives_real_positive_zeta(re in 0.8f64..4.0) {
        let z = zeta_truncated(&uniform_full_shift(2), &quad(), Complex64::new(re, 0.0), 14, 8).unwrap();
        prop_assert!(z.value.1 == 0.0 && z.value.0 > 0.0);
    }
}

#[test]
fn periods_exceed_length_times_tau_min() {
    let sys = uniform_full_shift(2);
    for o in primitive_orbits(&sys, &quad(), 12).unwrap() {
        assert!(o.period >= o.word.len() as f64 - 1e-12, "{o:?}");
        assert!(o.period <= 1.5 * o.word.len() as f64 + 1e-12, "{o:?}");
    }
}

#[test]
fn counting_is_monotone_and_lattice_jumps_on_the_span() {
    let sys = uniform_full_shift(2);
    let grid: Vec<f64> = (1..=60).map(|i| i as f64 * 0.2).collect();
    let r = counting_report(&sys, &quad(), Some(&grid), 12, 10).unwrap();
    assert!(r.pi.windows(2).all(|w| w[0] <= w[1]));

    let affine = FieldSpec::expr("1 + x/2").unwrap();
    let fine: Vec<f64> = (1..=120).map(|i| i as f64 * 0.05 + 0.01).collect();
    let r = counting_report(&sys, &affine, Some(&fine), 10, 10).unwrap();
    let span = r.lattice_span.expect("affine roof is cohomologous to a depth-1 lattice roof");
    assert!((span - 0.5).abs() < 1e-9);
    for i in 1..fine.len() {
        if r.pi[i] != r.pi[i - 1] {
            let k = (fine[i] / span).floor() * span;
            assert!(k > fine[i - 1] && k <= fine[i], "jump between {} and {}", fine[i - 1], fine[i]);
        }
    }
}

#[test]
fn flow_entropy_with_unit_roof_is_the_shift_entropy() {
    let g = SymbolicSystem::build(3, vec![vec![1, 1, 0], vec![0, 1, 1], vec![1, 0, 1]], None).unwrap();
    let h = pressure(&g, &FieldSpec::zero(), 6).unwrap().value;
    let ht = flow_entropy(&g, &FieldSpec::Const(1.0), 6, 1e-13).unwrap();
    assert!((h - ht).abs() < 1e-12);
    // (1/n) ln trace Aⁿ approaches the same value.
    let tr = fixed_point_count(&g, 40).unwrap() as f64;
    assert!((tr.ln() / 40.0 - h).abs() < 1e-3);
}

/// Ei(y) = γ + ln y + Σ yᵏ/(k·k!).
fn ei(y: f64) -> f64 {
    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
    let mut term = 1.0;
    let mut sum = 0.0;
    for k in 1..200 {
        term *= y / k as f64;
        sum += term / k as f64;
        if term / (k as f64) < 1e-18 * sum.abs() {
            break;
        }
    }
    EULER_GAMMA + y.ln() + sum
}

#[test]
fn li_matches_exponential_integral_series() {
    let oracle = |x: f64| ei(x.ln()) - ei(2f64.ln());
    let e2 = std::f64::consts::E.powi(2);
    assert!((li(e2).unwrap() - oracle(e2)).abs() < 1e-10);
    assert!((li(e2).unwrap() - 3.909_070_57).abs() < 1e-7);
    for x in [2.5, 10.0, 1e3, 1e6] {
        let v = li(x).unwrap();
        assert!((v - oracle(x)).abs() < 1e-10 * oracle(x).abs().max(1.0), "li({x}) = {v}");
    }
    // The asymptotic li(x) ~ x/ln x converges slowly: 1.0863 at x = 10⁶.
    let r = li(1e6).unwrap() / (1e6 / 1e6f64.ln());
    assert!((r - 1.0863).abs() < 1e-4);
    assert!(li(2.0).is_err() && li(f64::NAN).is_err());
}

#[test]
fn zeta_converges_to_the_closed_form_for_unit_roof() {
    let sys = uniform_full_shift(2);
    let tau = FieldSpec::Const(1.0);
    for s in [Complex64::new(1.5, 0.0), Complex64::new(2.0, 3.0), Complex64::new(1.0, 0.5)] {
        let exact = 1.0 / (1.0 - 2.0 * (-s).exp());
        let z = zeta_truncated(&sys, &tau, s, 40, 8).unwrap();
        let err = (z.complex() - exact).norm();
        // The reported bound covers the omitted terms of log ζ.
        assert!(err <= z.tail_bound * exact.norm() * 1.01 + 1e-15, "s = {s}: {err:e} vs {:e}", z.tail_bound);
        let (er, ei) = z.extrapolated.unwrap();
        assert!((Complex64::new(er, ei) - exact).norm() < 1e-12 * exact.norm());
    }
    let z = zeta_truncated(&sys, &tau, Complex64::new(0.5, 0.0), 20, 8).unwrap();
    assert!(z.divergent);
}
