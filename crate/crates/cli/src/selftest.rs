//! Closed-form checks that need no system file.

use num_complex::Complex64;
use thermoflow::correlations::MarkovApprox;
use thermoflow::field::FieldSpec;
use thermoflow::orbits::{fixed_point_count, li, primitive_count, zeta_truncated};
use thermoflow::symbolic::{golden_mean, uniform_full_shift};
use thermoflow::thermo::{pressure, Suspension};
use thermoflow::Error;

type Check = (&'static str, fn() -> Result<bool, Error>);

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn bernoulli_third() -> FieldSpec {
    FieldSpec::Table { depth: 1, values: vec![(1.0f64 / 3.0).ln(), (2.0f64 / 3.0).ln()] }
}

const CHECKS: &[Check] = &[
    ("full 2-shift pressure is ln 2", || {
        Ok(close(pressure(&uniform_full_shift(2), &FieldSpec::Const(0.0), 8)?.value, 2f64.ln(), 1e-12))
    }),
    ("golden-mean entropy is ln phi", || {
        let phi = 0.5 * (1.0 + 5f64.sqrt());
        Ok(close(pressure(&golden_mean(0.5, 0.5)?, &FieldSpec::Const(0.0), 8)?.value, phi.ln(), 1e-10))
    }),
    ("fixed points of sigma^n", || {
        let full = uniform_full_shift(2);
        let gold = golden_mean(0.5, 0.5)?;
        Ok(fixed_point_count(&full, 20)? == 1 << 20 && fixed_point_count(&gold, 10)? == 123)
    }),
    ("binary necklace counts", || {
        let full = uniform_full_shift(2);
        let expect = [2u128, 1, 2, 3, 6, 9, 18, 30];
        Ok((1..=8).all(|n| primitive_count(&full, n).ok() == Some(expect[n - 1])))
    }),
    ("li rejects x <= 2", || Ok(matches!(li(2.0), Err(Error::DomainError(_))) && li(2.5)? > 0.0)),
    ("constant-roof pressure root equals entropy", || {
        let s = Suspension::new(&uniform_full_shift(2), FieldSpec::Const(0.0), FieldSpec::Const(2.0), 6, Some(2.0))?;
        Ok(close(s.pressure_root(1e-13)?, 0.5 * 2f64.ln(), 1e-11))
    }),
    ("normalized eigenmeasure has total mass 1", || {
        let s = Suspension::new(&uniform_full_shift(3), weights_3(), FieldSpec::Const(1.0), 6, Some(1.0))?;
        let p = s.pressure_root(1e-13)?;
        Ok(s.state(p, 0.0, 1e-13)?.m1_error < 1e-10)
    }),
    ("Bernoulli(1/3, 2/3) kernel is stationary", || {
        let m = MarkovApprox::gibbs(&uniform_full_shift(2), &bernoulli_third(), &FieldSpec::Const(1.0), 4)?;
        Ok(m.stationarity_error() < 1e-12)
    }),
    ("dyadic distortion ratio is 1/2", || {
        let d = uniform_full_shift(2).distortion_ratios(6)?;
        Ok(close(d.ratio_min, 0.5, 1e-12) && close(d.ratio_max, 0.5, 1e-12))
    }),
    ("zeta is conjugate symmetric", || {
        let full = uniform_full_shift(2);
        let tau = FieldSpec::Const(1.0);
        let z = zeta_truncated(&full, &tau, Complex64::new(1.5, 0.7), 20, 6)?;
        let w = zeta_truncated(&full, &tau, Complex64::new(1.5, -0.7), 20, 6)?;
        Ok(close(z.value.0, w.value.0, 1e-12) && close(z.value.1, -w.value.1, 1e-12))
    }),
    ("cache keys separate inputs", || {
        let a = crate::cache_key(&["ab", "c"]);
        Ok(a == crate::cache_key(&["ab", "c"]) && a != crate::cache_key(&["a", "bc"]) && a.len() == 64)
    }),
];

fn weights_3() -> FieldSpec {
    FieldSpec::Table { depth: 1, values: vec![(0.2f64).ln(), (0.3f64).ln(), (0.5f64).ln()] }
}

/// Prints one PASS/FAIL line per check; exit code 0 when all pass.
pub fn run() -> i32 {
    let mut failed = 0;
    for (name, check) in CHECKS {
        match check() {
            Ok(true) => println!("PASS {name}"),
            Ok(false) => {
                failed += 1;
                println!("FAIL {name}");
            }
            Err(e) => {
                failed += 1;
                println!("FAIL {name}: {e}");
            }
        }
    }
    println!("{} of {} checks passed", CHECKS.len() - failed, CHECKS.len());
    i32::from(failed > 0)
}
