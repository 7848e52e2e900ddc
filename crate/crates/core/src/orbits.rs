//! Closed orbits of the suspension flow: periodic-point counts, primitive
//! orbits and their periods, the flow entropy, prime-orbit counting against
//! `li(e^{h_T λ})` and the truncated Ruelle zeta function.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::FieldSpec;
use crate::symbolic::{SymbolicSystem, WordSpace};
use crate::thermo::{pressure, solve_pressure_root};

/// Number of points with `σ^n x = x`: `trace(A^n)`.
pub fn fixed_point_count(sys: &SymbolicSystem, n: usize) -> Result<u128> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let k = sys.alphabet_size();
    let a: Vec<Vec<u128>> = sys.matrix().iter().map(|r| r.iter().map(|&v| v as u128).collect()).collect();
    let overflow = || Error::InvalidArgument(format!("trace(A^{n}) overflows"));
    let mut p = a.clone();
    for _ in 1..n {
        let mut next = vec![vec![0u128; k]; k];
        for i in 0..k {
            for l in 0..k {
                if p[i][l] == 0 {
                    continue;
                }
                for j in 0..k {
                    if a[l][j] != 0 {
                        next[i][j] = next[i][j].checked_add(p[i][l]).ok_or_else(overflow)?;
                    }
                }
            }
        }
        p = next;
    }
    (0..k).try_fold(0u128, |acc, i| acc.checked_add(p[i][i]).ok_or_else(overflow))
}

fn mobius(mut n: usize) -> i64 {
    let mut m = 1i64;
    let mut q = 2;
    while q * q <= n {
        if n % q == 0 {
            n /= q;
            if n % q == 0 {
                return 0;
            }
            m = -m;
        }
        q += 1;
    }
    if n > 1 {
        m = -m;
    }
    m
}

/// Number of primitive periodic orbits of `n` symbols,
/// `(1/n) Σ_{d|n} μ(n/d) trace(A^d)`.
pub fn primitive_count(sys: &SymbolicSystem, n: usize) -> Result<u128> {
    let mut s: i128 = 0;
    for d in (1..=n).filter(|d| n % d == 0) {
        s += mobius(n / d) as i128 * fixed_point_count(sys, d)? as i128;
    }
    Ok((s / n as i128) as u128)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodicOrbit {
    /// Lexicographically minimal rotation.
    pub word: Vec<u8>,
    /// `ℓ(γ) = τ_n` at the periodic point.
    pub period: f64,
    pub primitive: bool,
}

/// Admissible Lyndon words of exactly `n` symbols whose cyclic closure is
/// admissible, in lexicographic order.
pub fn lyndon_words(sys: &SymbolicSystem, n: usize) -> Vec<Vec<u8>> {
    fn gen(sys: &SymbolicSystem, a: &mut Vec<u8>, t: usize, p: usize, n: usize, out: &mut Vec<Vec<u8>>) {
        let k = sys.alphabet_size() as u8;
        if t > n {
            if p == n && sys.allowed(a[n], a[1]) {
                out.push(a[1..=n].to_vec());
            }
            return;
        }
        let first = a[t - p];
        for s in first..k {
            if t > 1 && !sys.allowed(a[t - 1], s) {
                continue;
            }
            a[t] = s;
            gen(sys, a, t + 1, if s == first { p } else { t }, n, out);
        }
    }
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    let mut a = vec![0u8; n + 1];
    gen(sys, &mut a, 1, 1, n, &mut out);
    out
}

/// Periodic point of `word` in the realized coordinate: fixed point of the
/// composed inverse branch.
pub fn periodic_point(sys: &SymbolicSystem, word: &[u8]) -> Result<f64> {
    let mut x = 0.5;
    for _ in 0..10_000 {
        let y = sys.compose(word, x)?;
        let moved = (y - x).abs();
        x = y;
        if moved < 1e-15 {
            break;
        }
    }
    Ok(x)
}

/// `τ_n` along the periodic orbit of the cyclic word.
pub fn orbit_period(sys: &SymbolicSystem, tau: &FieldSpec, word: &[u8]) -> Result<f64> {
    PeriodEval::new(sys, tau).period(sys, word)
}

enum PeriodEval<'a> {
    Const(f64),
    Table { depth: usize, space: WordSpace, values: &'a [f64] },
    Expr(&'a crate::expr::Expression),
}

impl<'a> PeriodEval<'a> {
    fn new(sys: &SymbolicSystem, tau: &'a FieldSpec) -> Self {
        match tau {
            FieldSpec::Const(c) => PeriodEval::Const(*c),
            FieldSpec::Table { depth, values } => PeriodEval::Table { depth: *depth, space: WordSpace::new(sys, *depth), values },
            FieldSpec::Expr(e) => PeriodEval::Expr(e),
        }
    }

    fn period(&self, sys: &SymbolicSystem, word: &[u8]) -> Result<f64> {
        let n = word.len();
        match self {
            PeriodEval::Const(c) => Ok(c * n as f64),
            PeriodEval::Table { depth, space, values } => {
                let mut cyc = Vec::with_capacity(*depth);
                let mut total = 0.0;
                for i in 0..n {
                    cyc.clear();
                    cyc.extend((0..*depth).map(|j| word[(i + j) % n]));
                    let idx = space.index_of(&cyc).ok_or_else(|| Error::NotAdmissible(cyc.clone()))?;
                    total += values[idx];
                }
                Ok(total)
            }
            PeriodEval::Expr(e) => {
                let x = periodic_point(sys, word)?;
                let mut total = 0.0;
                for i in 0..n {
                    total += e.eval(sys.compose(&word[i..], x)?);
                }
                Ok(total)
            }
        }
    }
}

/// All primitive periodic orbits of at most `n_max` symbols, ordered by length
/// and then lexicographically.
pub fn primitive_orbits(sys: &SymbolicSystem, tau: &FieldSpec, n_max: usize) -> Result<Vec<PeriodicOrbit>> {
    if n_max == 0 {
        return Err(Error::InvalidArgument("n_max must be at least 1".into()));
    }
    tau.validate(sys)?;
    if matches!(tau, FieldSpec::Expr(_)) {
        sys.require_realization()?;
    }
    let per_n: Vec<Vec<Vec<u8>>> = (1..=n_max).into_par_iter().map(|n| lyndon_words(sys, n)).collect();
    let words: Vec<Vec<u8>> = per_n.into_iter().flatten().collect();
    let eval = PeriodEval::new(sys, tau);
    words
        .into_par_iter()
        .map(|w| {
            let period = eval.period(sys, &w)?;
            Ok(PeriodicOrbit { word: w, period, primitive: true })
        })
        .collect()
}

/// Topological entropy of the flow: the root of `Pr(−sτ) = 0`.
pub fn flow_entropy(sys: &SymbolicSystem, tau: &FieldSpec, depth: usize, tol: f64) -> Result<f64> {
    solve_pressure_root(sys, &FieldSpec::zero(), tau, depth, tol)
}

/// Adaptive Gauss-Kronrod (7/15) quadrature.
fn integrate(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    const XK: [f64; 8] = [
        0.991455371120812639206854697526329,
        0.949107912342758524526189684047851,
        0.864864423359769072789712788640926,
        0.741531185599394439863864773280788,
        0.586087235467691130294144845693013,
        0.405845151377397166906606412076961,
        0.207784955007898467600689403773245,
        0.000000000000000000000000000000000,
    ];
    const WK: [f64; 8] = [
        0.022935322010529224963732008058970,
        0.063092092629978553290700663189204,
        0.104790010322250183839876322541518,
        0.140653259715525918745189590510238,
        0.169004726639267902826583426598550,
        0.190350578064785409913256402421014,
        0.204432940075298892414161999234649,
        0.209482141084727828012999174891714,
    ];
    const WG: [f64; 4] = [
        0.129484966168869693270611432679082,
        0.279705391489276667901467771423780,
        0.381830050505118944950369775488975,
        0.417959183673469387755102040816327,
    ];
    fn rule(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let fc = f(c);
        let mut k = WK[7] * fc;
        let mut g = WG[3] * fc;
        for i in 0..7 {
            let (x1, x2) = (c - h * XK[i], c + h * XK[i]);
            let s = f(x1) + f(x2);
            k += WK[i] * s;
            if i % 2 == 1 {
                g += WG[i / 2] * s;
            }
        }
        (k * h, ((k - g) * h).abs())
    }
    let mut stack = vec![(a, b, 0usize)];
    let mut total = 0.0;
    let scale = rule(f, a, b).0.abs().max(f64::MIN_POSITIVE);
    while let Some((lo, hi, depth)) = stack.pop() {
        let (v, err) = rule(f, lo, hi);
        if err <= tol * scale * (hi - lo) / (b - a) || depth > 50 {
            total += v;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, depth + 1));
            stack.push((mid, hi, depth + 1));
        }
    }
    total
}

/// `li(x) = ∫₂^x du / ln u`, integrated in `v = ln u`.
pub fn li(x: f64) -> Result<f64> {
    if !(x > 2.0) || !x.is_finite() {
        return Err(Error::DomainError(x));
    }
    Ok(integrate(&|v: f64| v.exp() / v, 2f64.ln(), x.ln(), 1e-13))
}

/// Common span of `values` up to `tol`, if they lie in a lattice `span·ℤ`
/// with span above `min_span`.
pub fn lattice_span(values: &[f64], tol: f64, min_span: f64) -> Option<f64> {
    let mut g = 0.0f64;
    for &v in values {
        let (mut a, mut b) = (g.max(v.abs()), g.min(v.abs()));
        while b > tol {
            let r = a % b;
            let r = if b - r < tol { 0.0 } else { r };
            a = b;
            b = r;
        }
        g = a;
        if g < min_span {
            return None;
        }
    }
    (g >= min_span).then_some(g)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountingReport {
    pub h_t: f64,
    pub tau_min: f64,
    pub n_max: usize,
    pub orbits: usize,
    /// Every orbit of period ≤ λ is enumerated for λ below this.
    pub lambda_unbiased_max: f64,
    pub lambda: Vec<f64>,
    pub pi: Vec<u64>,
    pub li: Vec<f64>,
    /// `π(λ)/li(e^{h_T λ})`; omitted for lattice roofs.
    pub ratio: Vec<Option<f64>>,
    pub biased: Vec<bool>,
    /// Span of the period lattice when the periods are commensurable.
    pub lattice_span: Option<f64>,
    pub oscillation_flag: bool,
    pub warnings: Vec<String>,
}

/// Smallest value of the roof: table minimum, or a dense sample of the
/// coordinate function over the unit interval.
pub fn roof_min(sys: &SymbolicSystem, tau: &FieldSpec) -> Result<f64> {
    match tau {
        FieldSpec::Const(c) => Ok(*c),
        FieldSpec::Table { values, .. } => Ok(values.iter().copied().fold(f64::INFINITY, f64::min)),
        FieldSpec::Expr(e) => {
            let _ = sys;
            Ok((0..=4096).map(|i| e.eval(i as f64 / 4096.0)).fold(f64::INFINITY, f64::min))
        }
    }
}

/// Default λ grid: 12 evenly spaced values up to `0.9·n_max·τ_min`.
pub fn default_lambda_grid(n_max: usize, tau_min: f64) -> Vec<f64> {
    let top = 0.9 * n_max as f64 * tau_min;
    (1..=12).map(|i| top * i as f64 / 12.0).collect()
}

/// Counts primitive orbits by period and compares with `li(e^{h_T λ})`.
pub fn counting_report(
    sys: &SymbolicSystem,
    tau: &FieldSpec,
    lambda_grid: Option<&[f64]>,
    n_max: usize,
    depth: usize,
) -> Result<CountingReport> {
    let tau_min = roof_min(sys, tau)?;
    if !(tau_min > 0.0) {
        return Err(Error::DegenerateRoof(tau_min));
    }
    let h_t = flow_entropy(sys, tau, depth, 1e-12)?;
    let orbits = primitive_orbits(sys, tau, n_max)?;
    let mut periods: Vec<f64> = orbits.iter().map(|o| o.period).collect();
    periods.sort_by(f64::total_cmp);
    let lambda: Vec<f64> = match lambda_grid {
        Some(g) => g.to_vec(),
        None => default_lambda_grid(n_max, tau_min),
    };
    let lambda_unbiased_max = (n_max + 1) as f64 * tau_min;
    let sample: Vec<f64> = periods.iter().take(400).copied().collect();
    // Rational periods always share some fine span; a lattice only counts when
    // it has fewer sites below the largest period than there are periods.
    let top = sample.last().copied().unwrap_or(0.0);
    let span = lattice_span(&sample, 1e-9, 1e-6).filter(|s| top / s <= sample.len() as f64);
    let mut warnings = Vec::new();
    let mut pi = Vec::with_capacity(lambda.len());
    let mut lis = Vec::with_capacity(lambda.len());
    let mut ratio = Vec::with_capacity(lambda.len());
    let mut biased = Vec::with_capacity(lambda.len());
    for &l in &lambda {
        let count = periods.partition_point(|&p| p <= l) as u64;
        let x = (h_t * l).exp();
        let li_v = if x > 2.0 { li(x)? } else { f64::NAN };
        let b = l >= lambda_unbiased_max;
        if b {
            warnings.push(format!(
                "TruncationBias: λ = {l} reaches orbits longer than n_max = {n_max} symbols (unbiased below {lambda_unbiased_max})"
            ));
        }
        pi.push(count);
        lis.push(li_v);
        biased.push(b);
        ratio.push((span.is_none() && li_v.is_finite()).then(|| count as f64 / li_v));
    }
    if let Some(s) = span {
        warnings.push(format!("lattice roof (period span {s}): π(λ)/li oscillates, no ratio reported"));
    }
    Ok(CountingReport {
        h_t,
        tau_min,
        n_max,
        orbits: orbits.len(),
        lambda_unbiased_max,
        lambda,
        pi,
        li: lis,
        ratio,
        biased,
        lattice_span: span,
        oscillation_flag: span.is_some(),
        warnings,
    })
}

impl CountingReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("lambda,pi,li,ratio,biased\n");
        for i in 0..self.lambda.len() {
            let r = self.ratio[i].map(|r| r.to_string()).unwrap_or_default();
            s.push_str(&format!("{},{},{},{},{}\n", self.lambda[i], self.pi[i], self.li[i], r, self.biased[i]));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZetaValue {
    pub s: (f64, f64),
    pub value: (f64, f64),
    pub log_value: (f64, f64),
    pub n_max: usize,
    /// `Pr(−Re(s)·τ)`.
    pub pressure: f64,
    /// Bound on the omitted terms of `log ζ`; infinite in the divergent region.
    pub tail_bound: f64,
    /// `Re(s) ≤ h_T`: the truncated sum is not controlled.
    pub divergent: bool,
    /// Truncated sum plus a geometric continuation of its last terms.
    pub extrapolated: Option<(f64, f64)>,
}

impl ZetaValue {
    pub fn complex(&self) -> Complex64 {
        Complex64::new(self.value.0, self.value.1)
    }
}

fn scaled_roof(tau: &FieldSpec, c: f64) -> Result<FieldSpec> {
    Ok(match tau {
        FieldSpec::Const(v) => FieldSpec::Const(c * v),
        FieldSpec::Table { depth, values } => FieldSpec::Table { depth: *depth, values: values.iter().map(|v| c * v).collect() },
        FieldSpec::Expr(e) => FieldSpec::expr(&format!("({c:e})*({})", e.source()))?,
    })
}

/// `Σ_{σⁿx=x} e^{−sτ_n(x)}` for `n = 1..=n_max` as traces of powers of the
/// weighted transition matrix of a locally constant roof.
fn trace_sums(sys: &SymbolicSystem, tau: &FieldSpec, s: Complex64, n_max: usize) -> Result<Vec<Complex64>> {
    let l = tau.local_depth().expect("locally constant roof").max(1);
    let states = WordSpace::new(sys, l.max(2) - 1);
    let edges = WordSpace::new(sys, l.max(2));
    let m = states.len();
    let mut w = vec![vec![Complex64::new(0.0, 0.0); m]; m];
    for e in 0..edges.len() {
        let word = edges.word(e);
        let value = tau.eval_word(sys, &word[..l])?;
        let from = states.index_of(&word[..word.len() - 1]).expect("admissible prefix");
        let to = states.index_of(&word[1..]).expect("admissible suffix");
        w[from][to] = (-s * value).exp();
    }
    let mut p = w.clone();
    let mut out = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        if n > 1 {
            let next: Vec<Vec<Complex64>> = (0..m)
                .into_par_iter()
                .map(|i| {
                    let mut row = vec![Complex64::new(0.0, 0.0); m];
                    for (q, &pv) in p[i].iter().enumerate() {
                        if pv != Complex64::new(0.0, 0.0) {
                            for j in 0..m {
                                row[j] += pv * w[q][j];
                            }
                        }
                    }
                    row
                })
                .collect();
            p = next;
        }
        out.push((0..m).map(|i| p[i][i]).sum());
    }
    Ok(out)
}

/// Most symbols for which roofs that are not locally constant are summed by
/// orbit enumeration.
pub const ZETA_ENUMERATION_LIMIT: usize = 24;

/// Geometric continuation of `Σ_{n>N} S_n/n` from the last two trace sums.
fn extrapolated_tail(sums: &[Complex64]) -> Option<Complex64> {
    let n = sums.len();
    if n < 2 || sums[n - 2] == Complex64::new(0.0, 0.0) {
        return None;
    }
    let r = sums[n - 1] / sums[n - 2];
    if r.norm() >= 1.0 {
        return None;
    }
    let mut term = sums[n - 1];
    let mut tail = Complex64::new(0.0, 0.0);
    for m in n + 1..n + 100_000 {
        term *= r;
        let add = term / m as f64;
        tail += add;
        if add.norm() < 1e-18 * tail.norm().max(1e-300) {
            break;
        }
    }
    Some(tail)
}

/// `S_n = Σ_{σⁿx=x} e^{−sτ_n(x)}` for `n = 1..=n_max`.
pub fn periodic_sums(sys: &SymbolicSystem, tau: &FieldSpec, s: Complex64, n_max: usize) -> Result<Vec<Complex64>> {
    if n_max == 0 {
        return Err(Error::InvalidArgument("n_max must be at least 1".into()));
    }
    tau.validate(sys)?;
    if tau.local_depth().is_some() {
        return trace_sums(sys, tau, s, n_max);
    }
    if n_max > ZETA_ENUMERATION_LIMIT {
        return Err(Error::InvalidArgument(format!(
            "n_max = {n_max} exceeds {ZETA_ENUMERATION_LIMIT} for a roof that is not locally constant"
        )));
    }
    let orbits = primitive_orbits(sys, tau, n_max)?;
    Ok(orbits
        .par_iter()
        .fold(
            || vec![Complex64::new(0.0, 0.0); n_max],
            |mut acc, o| {
                let len = o.word.len();
                let mut m = 1;
                while m * len <= n_max {
                    acc[m * len - 1] += len as f64 * (-s * (m as f64 * o.period)).exp();
                    m += 1;
                }
                acc
            },
        )
        .reduce(
            || vec![Complex64::new(0.0, 0.0); n_max],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        ))
}

/// `exp Σ_{n≤n_max} (1/n) Σ_{σⁿx=x} e^{−sτ_n(x)}`, with the tail bound
/// `Σ_{n>n_max} e^{n·Pr(−Re(s)τ)}/n` and, separately, a geometric
/// extrapolation of the omitted terms.
pub fn zeta_truncated(sys: &SymbolicSystem, tau: &FieldSpec, s: Complex64, n_max: usize, depth: usize) -> Result<ZetaValue> {
    let sums = periodic_sums(sys, tau, s, n_max)?;
    let log_z: Complex64 = sums.iter().enumerate().map(|(i, z)| z / (i + 1) as f64).sum();
    let p = pressure(sys, &scaled_roof(tau, -s.re)?, depth)?.value;
    let divergent = p >= 0.0;
    let tail_bound = if divergent {
        f64::INFINITY
    } else {
        let n1 = (n_max + 1) as f64;
        (n1 * p).exp() / (n1 * (1.0 - p.exp()))
    };
    let z = log_z.exp();
    let extrapolated = if divergent { None } else { extrapolated_tail(&sums).map(|t| (log_z + t).exp()) };
    Ok(ZetaValue {
        s: (s.re, s.im),
        value: (z.re, z.im),
        log_value: (log_z.re, log_z.im),
        n_max,
        pressure: p,
        tail_bound,
        divergent,
        extrapolated: extrapolated.map(|e| (e.re, e.im)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::{golden_mean, uniform_full_shift};

    #[test]
    fn fixed_points() {
        let f = uniform_full_shift(2);
        let g = golden_mean(0.4, 0.5).unwrap();
        assert_eq!(fixed_point_count(&f, 3).unwrap(), 8);
        assert_eq!(fixed_point_count(&g, 3).unwrap(), 4);
        assert_eq!(fixed_point_count(&g, 1).unwrap(), 1);
        assert!(fixed_point_count(&f, 0).is_err());
    }

    #[test]
    fn small_orbit_list() {
        let f = uniform_full_shift(2);
        let o = primitive_orbits(&f, &FieldSpec::Const(1.0), 3).unwrap();
        let words: Vec<Vec<u8>> = o.iter().map(|x| x.word.clone()).collect();
        assert_eq!(words, vec![vec![0], vec![1], vec![0, 1], vec![0, 0, 1], vec![0, 1, 1]]);
        assert!(o.iter().all(|x| x.period == x.word.len() as f64));
    }

    #[test]
    fn affine_period_of_01() {
        let f = uniform_full_shift(2);
        let p = orbit_period(&f, &FieldSpec::expr("1 + x/2").unwrap(), &[0, 1]).unwrap();
        assert!((p - 2.5).abs() < 1e-13);
    }

    #[test]
    fn counting_small() {
        let f = uniform_full_shift(2);
        let r = counting_report(&f, &FieldSpec::Const(1.0), Some(&[3.5]), 6, 4).unwrap();
        assert_eq!(r.pi, vec![5]);
        assert!(r.oscillation_flag && r.ratio[0].is_none());
    }

    #[test]
    fn li_domain() {
        assert!(matches!(li(2.0), Err(Error::DomainError(_))));
        assert!(li(2.0 + 1e-9).unwrap() < 1e-8);
    }
}
