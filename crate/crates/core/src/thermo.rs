//! Pressure, Ruelle-Perron-Frobenius data, Gibbs measures and normalized
//! potentials for a suspension with potential `f` and roof `τ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FieldSpec, Grid, Measure, ScalarField};
use crate::symbolic::{PointRep, SymbolicSystem, WordSpace};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const MAX_ITER: usize = 100_000;
pub const DEFAULT_A_MAX: f64 = 0.1;

/// `Σ_{j<m} g(σ^j x)`.
pub fn birkhoff_sum(sys: &SymbolicSystem, g: &FieldSpec, m: usize, x: &PointRep) -> Result<f64> {
    (0..m).map(|j| g.eval_word(sys, &x.shift(sys, j).prefix)).sum()
}

/// `L_g h` with `g` sampled on one-symbol extensions of the depth-`d` cylinders.
pub fn transfer_apply(grid: &Grid, g: &FieldSpec, h: &ScalarField) -> Result<ScalarField> {
    if h.depth != grid.depth() {
        return Err(Error::DepthMismatch { expected: grid.depth(), got: h.depth });
    }
    let log_w = grid.sample_edges(g)?;
    Ok(ScalarField { depth: h.depth, values: grid.apply_real(&log_w, &h.values) })
}

/// Leading eigendata of a positive transfer matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Rpf {
    pub lambda: f64,
    /// Right eigenvector, normalized by `Σ h ν̂ = 1`.
    pub h: Vec<f64>,
    /// Left eigenvector, normalized to total mass 1.
    pub nu_hat: Vec<f64>,
    pub iterations: usize,
    /// `‖L h − λ h‖₀ / (λ ‖h‖₀)`.
    pub residual: f64,
}

impl Rpf {
    pub fn pressure(&self) -> f64 {
        self.lambda.ln()
    }
}

/// Power iteration for the right and left leading eigenvectors of the
/// transfer matrix with edge log-weights `log_w`.
pub fn rpf_solve(grid: &Grid, log_w: &[f64], tol: f64) -> Result<Rpf> {
    rpf_solve_from(grid, log_w, tol, None)
}

/// As [`rpf_solve`], starting from the eigenvectors of a nearby problem.
pub fn rpf_solve_from(grid: &Grid, log_w: &[f64], tol: f64, start: Option<&Rpf>) -> Result<Rpf> {
    let n = grid.n_states();
    let w: Vec<f64> = log_w.iter().map(|g| g.exp()).collect();

    let mut h = start.map(|s| s.h.clone()).unwrap_or_else(|| vec![1.0; n]);
    normalize_max(&mut h);
    let mut lambda = f64::NAN;
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    for it in 1..=MAX_ITER {
        let lh = grid.apply_weights(&w, &h);
        let q = kahan_sum(&lh) / kahan_sum(&h);
        residual = lh.iter().zip(&h).fold(0.0f64, |r, (a, b)| r.max((a - q * b).abs())) / q;
        let settled = (q - lambda).abs() < tol * q;
        lambda = q;
        h = lh;
        normalize_max(&mut h);
        iterations = it;
        if settled && residual < tol {
            break;
        }
        if it == MAX_ITER {
            return Err(Error::NoConvergence(MAX_ITER));
        }
    }

    let mut nu = start.map(|s| s.nu_hat.clone()).unwrap_or_else(|| vec![1.0 / n as f64; n]);
    normalize_sum(&mut nu);
    for it in 1..=MAX_ITER {
        let mut next = grid.apply_adjoint(&w, &nu);
        normalize_sum(&mut next);
        let change: f64 = next.iter().zip(&nu).map(|(a, b)| (a - b).abs()).sum();
        nu = next;
        iterations = iterations.max(it);
        if change < tol {
            break;
        }
        if it == MAX_ITER {
            return Err(Error::NoConvergence(MAX_ITER));
        }
    }

    if let Some(i) = h.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::NonPositiveEigenvector(i));
    }
    if let Some(i) = nu.iter().position(|&v| !(v >= 0.0)) {
        return Err(Error::NonPositiveEigenvector(i));
    }
    let mass: f64 = h.iter().zip(&nu).map(|(a, b)| a * b).sum();
    for v in &mut h {
        *v /= mass;
    }
    Ok(Rpf { lambda, h, nu_hat: nu, iterations, residual })
}

/// Neumaier-compensated sum; plain summation over ~10⁴ states loses more
/// than the 1e-13 residual target.
pub(crate) fn kahan_sum(v: &[f64]) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for &x in v {
        let t = s + x;
        c += if s.abs() >= x.abs() { (s - t) + x } else { (x - t) + s };
        s = t;
    }
    s + c
}

fn normalize_max(v: &mut [f64]) {
    let m = v.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    if m > 0.0 {
        for x in v {
            *x /= m;
        }
    }
}

fn normalize_sum(v: &mut [f64]) {
    let s = kahan_sum(v);
    if s > 0.0 {
        for x in v {
            *x /= s;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PressureEstimate {
    pub value: f64,
    pub depth: usize,
    /// Difference from the value at depth `d + 2`; zero when the potential is
    /// locally constant at the working depth.
    pub error_proxy: f64,
}

/// Topological pressure `ln λ` of `g` at depth `depth`.
pub fn pressure(sys: &SymbolicSystem, g: &FieldSpec, depth: usize) -> Result<PressureEstimate> {
    let at = |d: usize| -> Result<f64> {
        let grid = Grid::new(sys, d);
        Ok(rpf_solve(&grid, &grid.sample_edges(g)?, DEFAULT_TOL)?.pressure())
    };
    let value = at(depth)?;
    let exact = g.local_depth().is_some_and(|l| l <= depth + 1);
    let error_proxy = if exact { 0.0 } else { (at(depth + 2)? - value).abs() };
    Ok(PressureEstimate { value, depth, error_proxy })
}

/// Potential and roof discretized on a depth-`d` grid.
#[derive(Debug, Clone)]
pub struct Suspension {
    pub grid: Grid,
    pub f_spec: FieldSpec,
    pub tau_spec: FieldSpec,
    /// `f` on the edges of the grid.
    pub f: Vec<f64>,
    /// `τ` on the edges of the grid.
    pub tau: Vec<f64>,
    pub tau_min: f64,
    pub a_max: f64,
}

impl Suspension {
    /// `tau_min` is the declared lower bound of the roof; when given, the
    /// sampled roof must respect it.
    pub fn new(sys: &SymbolicSystem, f: FieldSpec, tau: FieldSpec, depth: usize, tau_min: Option<f64>) -> Result<Self> {
        if depth == 0 {
            return Err(Error::InvalidArgument("depth must be at least 1".into()));
        }
        let grid = Grid::new(sys, depth);
        let fv = grid.sample_edges(&f)?;
        let tv = grid.sample_edges(&tau)?;
        let sampled_min = tv.iter().cloned().fold(f64::INFINITY, f64::min);
        let tau_min = match tau_min {
            Some(t) if sampled_min < t - 1e-12 => {
                return Err(Error::InvalidArgument(format!("roof takes value {sampled_min} below declared tau_min {t}")))
            }
            Some(t) => t,
            None => sampled_min,
        };
        if !(tau_min > 0.0) || fv.iter().chain(&tv).any(|v| !v.is_finite()) {
            return Err(Error::DegenerateRoof(tau_min));
        }
        Ok(Suspension { grid, f_spec: f, tau_spec: tau, f: fv, tau: tv, tau_min, a_max: DEFAULT_A_MAX })
    }

    pub fn depth(&self) -> usize {
        self.grid.depth()
    }

    pub fn sys(&self) -> &SymbolicSystem {
        &self.grid.sys
    }

    pub fn tau_max(&self) -> f64 {
        self.tau.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Edge log-weights of `f − s τ`.
    pub fn shifted(&self, s: f64) -> Vec<f64> {
        self.f.iter().zip(&self.tau).map(|(f, t)| f - s * t).collect()
    }

    pub fn rpf(&self, s: f64, tol: f64, start: Option<&Rpf>) -> Result<Rpf> {
        rpf_solve_from(&self.grid, &self.shifted(s), tol, start)
    }

    /// `P` with `Pr(f − Pτ) = 0`, by safeguarded Newton iteration inside the
    /// bisection bracket `[Pr(f)/τ_max − 1, Pr(f)/τ_min + 1]`.
    pub fn pressure_root(&self, tol: f64) -> Result<f64> {
        let tmin = self.tau.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(tmin > 0.0) {
            return Err(Error::BracketFailure(format!("roof minimum {tmin} is not positive")));
        }
        let inner = (tol * 1e-2).clamp(1e-13, DEFAULT_TOL);
        let base = self.rpf(0.0, inner, None)?;
        let pr_f = base.pressure();
        let (x, y) = (pr_f / self.tau_max(), pr_f / tmin);
        let (mut lo, mut hi) = (x.min(y) - 1.0, x.max(y) + 1.0);
        let eval = |p: f64, start: &Rpf| -> Result<(f64, f64, Rpf)> {
            let r = self.rpf(p, inner, Some(start))?;
            let lw = self.shifted(p);
            let mut slope = 0.0;
            for e in 0..self.grid.n_edges() {
                let q = r.nu_hat[self.grid.edge_row(e)] * lw[e].exp() * r.h[self.grid.edge_col(e)] / r.lambda;
                slope -= q * self.tau[e];
            }
            Ok((r.pressure(), slope, r))
        };
        let (f_lo, _, _) = eval(lo, &base)?;
        let (f_hi, _, _) = eval(hi, &base)?;
        if !(f_lo > 0.0 && f_hi < 0.0) {
            return Err(Error::BracketFailure(format!("Pr(f - P tau) at [{lo}, {hi}] is [{f_lo}, {f_hi}]")));
        }
        let mut p = 0.5 * (lo + hi);
        let mut start = base;
        for _ in 0..400 {
            let (v, slope, r) = eval(p, &start)?;
            start = r;
            if v.abs() < tol {
                return Ok(p);
            }
            if v > 0.0 {
                lo = p;
            } else {
                hi = p;
            }
            let newton = p - v / slope;
            p = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if hi - lo <= f64::EPSILON * p.abs().max(1.0) {
                return Ok(p);
            }
        }
        Err(Error::NoConvergence(400))
    }

    /// RPF data and the normalized potential `f^(a)` on edges.
    pub fn state(&self, p: f64, a: f64, tol: f64) -> Result<ThermoState> {
        if a.abs() > self.a_max {
            return Err(Error::InvalidArgument(format!("|a| = {} exceeds a_max = {}", a.abs(), self.a_max)));
        }
        let r = self.rpf(p + a, tol, None)?;
        let g = self.shifted(p + a);
        let ln_l = r.lambda.ln();
        let f_a: Vec<f64> = (0..self.grid.n_edges())
            .map(|e| g[e] + r.h[self.grid.edge_col(e)].ln() - r.h[self.grid.edge_row(e)].ln() - ln_l)
            .collect();
        let ones = vec![1.0; self.grid.n_states()];
        let m1 = self.grid.apply_real(&f_a, &ones);
        let m1_error = m1.iter().fold(0.0f64, |acc, v| acc.max((v - 1.0).abs()));
        let depth = self.depth();
        let nu = (a == 0.0).then(|| Measure {
            depth,
            weights: r.h.iter().zip(&r.nu_hat).map(|(h, n)| h * n).collect(),
        });
        Ok(ThermoState {
            depth,
            a,
            p,
            lambda: r.lambda,
            h: ScalarField { depth, values: r.h },
            nu_hat: Measure { depth, weights: r.nu_hat },
            nu,
            f_a,
            m1_error,
        })
    }

    /// Gibbs measure of `f − Pτ` with the ratio bounds `ν(C)/e^{g_n(rep C)}`
    /// over all cylinders `C` of `n ≤ max_len` symbols.
    pub fn gibbs(&self, p: f64, max_len: usize) -> Result<GibbsReport> {
        let state = self.state(p, 0.0, DEFAULT_TOL)?;
        let nu = state.nu.expect("a = 0 carries the Gibbs measure");
        let d = self.depth();
        let max_len = max_len.clamp(1, d);
        let sys = self.sys();
        let g = self.shifted(p);
        let mut per_length = Vec::with_capacity(max_len);
        for n in 1..=max_len {
            let ws = WordSpace::new(sys, n);
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for i in 0..ws.len() {
                let w = sys.continue_word(ws.word(i), n + d + 1);
                let gn: f64 = (0..n)
                    .map(|j| {
                        let e = self.grid.edges.index_of(&w[j..j + d + 1]).expect("admissible continuation");
                        g[e]
                    })
                    .sum();
                let ratio = nu.of_word(&self.grid, ws.word(i)) / gn.exp();
                lo = lo.min(ratio);
                hi = hi.max(ratio);
            }
            per_length.push((lo, hi));
        }
        let c1 = per_length.iter().map(|x| x.0).fold(f64::INFINITY, f64::min);
        let c2 = per_length.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
        Ok(GibbsReport {
            measure: nu,
            c1,
            c2,
            per_length,
            convention: "cylinder of n symbols compared with the Birkhoff sum of n terms at its representative".into(),
        })
    }

    /// The constant `T`: the largest of `‖f^(a)‖₀`, `Lip(f^(a))`, `‖τ‖₀` and
    /// `Lip(τ)` over the given offsets `a`.
    pub fn t_constant(&self, p: f64, offsets: &[f64]) -> Result<TConstant> {
        let tree = self.grid.tree()?;
        let tau_sup = self.tau.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tau_lip = tree.lip_real(&self.grid.edges, &self.tau);
        let (mut f_sup, mut f_lip) = (0.0f64, 0.0f64);
        for &a in offsets {
            let s = self.state(p, a, DEFAULT_TOL)?;
            f_sup = f_sup.max(s.f_a.iter().fold(0.0f64, |m, v| m.max(v.abs())));
            f_lip = f_lip.max(tree.lip_real(&self.grid.edges, &s.f_a));
        }
        Ok(TConstant { t: f_sup.max(f_lip).max(tau_sup).max(tau_lip), f_sup, f_lip, tau_sup, tau_lip })
    }

    /// Fitted `C₀` with `|λ_a − λ₀|`, `‖h_a − h₀‖₀` and `‖f^(a) − f^(0)‖₀` all at
    /// most `C₀|a|` over the given offsets.
    pub fn perturbation_constant(&self, p: f64, offsets: &[f64]) -> Result<f64> {
        let s0 = self.state(p, 0.0, DEFAULT_TOL)?;
        let mut c0 = 0.0f64;
        for &a in offsets.iter().filter(|a| **a != 0.0) {
            let s = self.state(p, a, DEFAULT_TOL)?;
            let dh = s.h.values.iter().zip(&s0.h.values).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            let df = s.f_a.iter().zip(&s0.f_a).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            c0 = c0.max((s.lambda - s0.lambda).abs().max(dh).max(df) / a.abs());
        }
        Ok(c0)
    }
}

/// Solves `Pr(f − Pτ) = 0` at the given depth.
pub fn solve_pressure_root(sys: &SymbolicSystem, f: &FieldSpec, tau: &FieldSpec, depth: usize, tol: f64) -> Result<f64> {
    Suspension::new(sys, f.clone(), tau.clone(), depth, None)?.pressure_root(tol)
}

/// Eigendata and normalized potential at offset `a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermoState {
    pub depth: usize,
    pub a: f64,
    pub p: f64,
    pub lambda: f64,
    pub h: ScalarField,
    pub nu_hat: Measure,
    /// Gibbs measure `h₀ ν̂₀`, present for `a = 0`.
    pub nu: Option<Measure>,
    /// `f^(a)` on the edges of the grid.
    pub f_a: Vec<f64>,
    /// `‖M_a 1 − 1‖₀`.
    pub m1_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsReport {
    pub measure: Measure,
    pub c1: f64,
    pub c2: f64,
    /// `(min, max)` of the ratio over cylinders of each length `1..=max_len`.
    pub per_length: Vec<(f64, f64)>,
    pub convention: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TConstant {
    pub t: f64,
    pub f_sup: f64,
    pub f_lip: f64,
    pub tau_sup: f64,
    pub tau_lip: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::{golden_mean, uniform_full_shift};
    use std::f64::consts::LN_2;

    const PHI: f64 = 1.618_033_988_749_895;

    fn table(depth: usize, values: Vec<f64>) -> FieldSpec {
        FieldSpec::Table { depth, values }
    }

    #[test]
    fn birkhoff_examples() {
        let s = uniform_full_shift(2);
        let x = PointRep::new(&s, [0u8, 1].repeat(30));
        assert_eq!(birkhoff_sum(&s, &FieldSpec::Const(1.0), 5, &x).unwrap(), 5.0);
        assert_eq!(birkhoff_sum(&s, &FieldSpec::zero(), 7, &x).unwrap(), 0.0);
        let tau = FieldSpec::expr("1 + x/2").unwrap();
        assert!((birkhoff_sum(&s, &tau, 2, &x).unwrap() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn transfer_examples() {
        let s = uniform_full_shift(2);
        let grid = Grid::new(&s, 3);
        let one = ScalarField::constant(&grid, 1.0);
        assert!(transfer_apply(&grid, &FieldSpec::zero(), &one).unwrap().values.iter().all(|&v| v == 2.0));
        let c = transfer_apply(&grid, &FieldSpec::Const(0.7), &one).unwrap();
        assert!(c.values.iter().all(|&v| (v - 2.0 * 0.7f64.exp()).abs() < 1e-14));

        let g = golden_mean(0.4, 0.5).unwrap();
        let grid = Grid::new(&g, 3);
        let out = transfer_apply(&grid, &FieldSpec::zero(), &ScalarField::constant(&grid, 1.0)).unwrap();
        for i in 0..grid.n_states() {
            let expected = if grid.states.word(i)[0] == 0 { 2.0 } else { 1.0 };
            assert_eq!(out.values[i], expected);
        }
        let wrong = ScalarField { depth: 2, values: vec![1.0; 3] };
        assert!(matches!(transfer_apply(&grid, &FieldSpec::zero(), &wrong), Err(Error::DepthMismatch { .. })));
    }

    #[test]
    fn rpf_examples() {
        let s = uniform_full_shift(2);
        let grid = Grid::new(&s, 4);
        let r = rpf_solve(&grid, &grid.sample_edges(&FieldSpec::zero()).unwrap(), 1e-12).unwrap();
        assert!((r.lambda - 2.0).abs() < 1e-12);
        assert!(r.h.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(r.nu_hat.iter().all(|v| (v - 1.0 / 16.0).abs() < 1e-12));

        let g = golden_mean(0.4, 0.5).unwrap();
        let grid = Grid::new(&g, 6);
        let r = rpf_solve(&grid, &grid.sample_edges(&FieldSpec::zero()).unwrap(), 1e-12).unwrap();
        assert!((r.lambda - PHI).abs() < 1e-11);
        assert!(r.residual < 1e-12);

        let grid = Grid::new(&s, 3);
        let f = table(1, vec![(1.0f64 / 3.0).ln(), (2.0f64 / 3.0).ln()]);
        let r = rpf_solve(&grid, &grid.sample_edges(&f).unwrap(), 1e-12).unwrap();
        assert!((r.lambda - 1.0).abs() < 1e-12);
        let m = Measure { depth: 3, weights: r.nu_hat };
        assert!((m.of_word(&grid, &[0]) - 1.0 / 3.0).abs() < 1e-12);
        assert!((m.of_word(&grid, &[1, 1]) - 4.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn pressure_examples() {
        let s = uniform_full_shift(2);
        let p = pressure(&s, &FieldSpec::zero(), 5).unwrap();
        assert!((p.value - LN_2).abs() < 1e-12);
        assert_eq!(p.error_proxy, 0.0);
        let g = golden_mean(0.4, 0.5).unwrap();
        assert!((pressure(&g, &FieldSpec::zero(), 6).unwrap().value - 0.481_211_825_1).abs() < 1e-10);
        let c = pressure(&g, &FieldSpec::Const(0.3), 6).unwrap().value;
        assert!((c - 0.481_211_825_059_603_4 - 0.3).abs() < 1e-11);
    }

    #[test]
    fn pressure_root_examples() {
        let s = uniform_full_shift(2);
        let p = solve_pressure_root(&s, &FieldSpec::zero(), &FieldSpec::Const(1.0), 4, 1e-12).unwrap();
        assert!((p - LN_2).abs() < 1e-12);
        let p = solve_pressure_root(&s, &FieldSpec::zero(), &FieldSpec::Const(2.5), 4, 1e-12).unwrap();
        assert!((p - LN_2 / 2.5).abs() < 1e-12);
        let err = solve_pressure_root(&s, &FieldSpec::zero(), &FieldSpec::Const(-1.0), 4, 1e-12);
        assert!(err.is_err());
    }

    #[test]
    fn normalized_potential_examples() {
        let s = uniform_full_shift(2);
        let susp = Suspension::new(&s, FieldSpec::zero(), FieldSpec::Const(1.0), 5, Some(1.0)).unwrap();
        let p = susp.pressure_root(1e-13).unwrap();
        let st = susp.state(p, 0.0, 1e-12).unwrap();
        assert!(st.f_a.iter().all(|v| (v + LN_2).abs() < 1e-12));
        assert!(st.m1_error < 1e-12);
        let st = susp.state(p, 0.05, 1e-12).unwrap();
        // Constant roof: λ_a = e^{-a} λ₀ and f^(a) is again -ln 2.
        assert!((st.lambda - (-0.05f64).exp()).abs() < 1e-12);
        assert!(st.m1_error < 1e-12);
        assert!(susp.state(p, 0.5, 1e-12).is_err());

        let g = golden_mean(0.4, 0.5).unwrap();
        let susp = Suspension::new(&g, FieldSpec::zero(), FieldSpec::Const(1.0), 6, None).unwrap();
        let p = susp.pressure_root(1e-13).unwrap();
        assert!((p - PHI.ln()).abs() < 1e-12);
        let st = susp.state(p, 0.0, 1e-12).unwrap();
        assert!(st.m1_error < 1e-12);
        // Oracle: right eigenvector of the transition matrix, h(0·) : h(1·) = φ : 1.
        let h0 = st.h.values[0];
        let h1 = st.h.values[susp.grid.states.prefix_range(&[1]).start];
        assert!((h0 / h1 - PHI).abs() < 1e-10);
    }

    #[test]
    fn gibbs_examples() {
        let s = uniform_full_shift(2);
        let susp = Suspension::new(&s, FieldSpec::zero(), FieldSpec::Const(1.0), 8, None).unwrap();
        let p = susp.pressure_root(1e-13).unwrap();
        let gr = susp.gibbs(p, 8).unwrap();
        assert!((gr.c1 - 1.0).abs() < 1e-10 && (gr.c2 - 1.0).abs() < 1e-10);
        assert!((gr.measure.of_word(&susp.grid, &[1, 0, 1]) - 0.125).abs() < 1e-12);

        let f = table(1, vec![(1.0f64 / 3.0).ln(), (2.0f64 / 3.0).ln()]);
        let susp = Suspension::new(&s, f, FieldSpec::Const(1.0), 6, None).unwrap();
        let p = susp.pressure_root(1e-13).unwrap();
        assert!(p.abs() < 1e-12);
        let gr = susp.gibbs(p, 6).unwrap();
        assert!((gr.measure.of_word(&susp.grid, &[0, 1]) - 2.0 / 9.0).abs() < 1e-12);
        for (lo, hi) in &gr.per_length {
            assert!((hi - lo).abs() < 1e-10);
        }
    }
}
