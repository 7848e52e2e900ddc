use num_complex::Complex64;
use proptest::prelude::*;
use thermoflow::correlations::{sample_orbit, suspension_correlation, MarkovApprox, Observable, STEP_FRACTION};
use thermoflow::field::FieldSpec;
use thermoflow::symbolic::uniform_full_shift;

fn quad() -> FieldSpec {
    FieldSpec::expr("1 + x^2/2").unwrap()
}

fn approx(tau: FieldSpec) -> MarkovApprox {
    MarkovApprox::gibbs(&uniform_full_shift(2), &FieldSpec::zero(), &tau, 8).unwrap()
}

#[test]
fn lag_zero_matches_direct_product_moment() {
    let sample = sample_orbit(&approx(quad()), 100_000, 3);
    let a = Observable::complex("x*cos(3*h)", "h").unwrap();
    let b = Observable::real("x^2 + h").unwrap();
    let curve = suspension_correlation(&sample, &a, &b, &[0.0, 1.0]).unwrap();

    let step = STEP_FRACTION * sample.tau_min;
    let total = sample.flow_time();
    let (mut sa, mut sb, mut sab, mut n) = (Complex64::default(), Complex64::default(), Complex64::default(), 0usize);
    let mut k = 0;
    let mut m = 0;
    loop {
        let s = m as f64 * step;
        if s >= total {
            break;
        }
        while sample.times[k + 1] <= s {
            k += 1;
        }
        let (x, h) = (sample.coords[k], s - sample.times[k]);
        let (va, vb) = (a.eval(x, h), b.eval(x, h));
        sa += va;
        sb += vb;
        sab += va * vb;
        n += 1;
        m += 1;
    }
    let nf = n as f64;
    let direct = sab / nf - (sa / nf) * (sb / nf);
    assert_eq!(curve.samples, n);
    assert!((Complex64::new(curve.c[0].0, curve.c[0].1) - direct).norm() < 1e-10, "{:?} vs {direct}", curve.c[0]);
}

#[test]
fn standard_error_shrinks_like_inverse_root_length() {
    let ap = approx(quad());
    let a = Observable::real("x").unwrap();
    let b = Observable::real("cos(2*pi*h)").unwrap();
    let se = |len: usize| suspension_correlation(&sample_orbit(&ap, len, 9), &a, &b, &[0.5]).unwrap().stderr[0];
    let ratio = se(100_000) / se(1_600_000);
    assert!((2.0..=6.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn fair_coin_word_frequencies() {
    let ap = approx(FieldSpec::Const(1.0));
    let s = sample_orbit(&ap, 1_000_000, 7);
    let hits = s.symbols.windows(2).filter(|w| w == &[0, 1]).count();
    let f = hits as f64 / (s.len() - 1) as f64;
    assert!((f - 0.25).abs() < 0.002, "{f}");
}

#[test]
fn bernoulli_depth4_blocks_within_three_sigma() {
    let p = [1.0f64 / 3.0, 2.0 / 3.0];
    let f = FieldSpec::Table { depth: 1, values: vec![p[0].ln(), p[1].ln()] };
    let ap = MarkovApprox::gibbs(&uniform_full_shift(2), &f, &FieldSpec::Const(1.0), 6).unwrap();
    let s = sample_orbit(&ap, 1_000_000, 21);
    // Disjoint blocks are i.i.d. under a Bernoulli measure: exact multinomial bands.
    let blocks: Vec<&[u8]> = s.symbols.chunks_exact(4).collect();
    let n = blocks.len() as f64;
    for code in 0..16u8 {
        let w: Vec<u8> = (0..4).map(|i| (code >> (3 - i)) & 1).collect();
        let q: f64 = w.iter().map(|&c| p[c as usize]).product();
        let freq = blocks.iter().filter(|b| **b == w.as_slice()).count() as f64 / n;
        let sigma = (q * (1.0 - q) / n).sqrt();
        assert!((freq - q).abs() <= 3.0 * sigma, "{w:?}: {freq} vs {q} (sigma {sigma})");
    }
}

#[test]
fn unit_roof_symbol_indicator() {
    // Symbols are independent: pairs in the same roof column agree, pairs
    // in different columns are independent, so C(t) = (1 − t)/4 on [0, 1].
    let s = sample_orbit(&approx(FieldSpec::Const(1.0)), 1_000_000, 5);
    let ind = Observable::real("1 - floor(2*x)").unwrap();
    let grid = [0.0, 0.2, 0.5, 0.7, 1.0, 1.5, 2.0, 3.5];
    let curve = suspension_correlation(&s, &ind, &ind, &grid).unwrap();
    for (i, &t) in curve.t.iter().enumerate() {
        let expect = if t < 1.0 { (1.0 - t) / 4.0 } else { 0.0 };
        assert!((curve.c[i].0 - expect).abs() < 5.0 * curve.stderr[i] + 2e-3, "t = {t}: {:?} vs {expect}", curve.c[i]);
    }
}

#[test]
fn constant_observables_are_uncorrelated() {
    let s = sample_orbit(&approx(quad()), 20_000, 1);
    let one = Observable::real("3").unwrap();
    let curve = suspension_correlation(&s, &one, &one, &[0.0, 1.0, 5.0]).unwrap();
    assert!(curve.c.iter().all(|c| c.0.abs() < 1e-12 && c.1 == 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn orbit_clock_increments_are_roof_values(seed in any::<u64>(), len in 1usize..3000) {
        let ap = approx(quad());
        let s = sample_orbit(&ap, len, seed);
        prop_assert_eq!(s.len(), len);
        prop_assert_eq!(s.times.len(), len + 1);
        for w in s.times.windows(2) {
            let d = w[1] - w[0];
            prop_assert!(d >= 1.0 - 1e-12 && d <= 1.5 + 1e-12);
        }
        prop_assert_eq!(&s, &sample_orbit(&ap, len, seed));
    }
}
