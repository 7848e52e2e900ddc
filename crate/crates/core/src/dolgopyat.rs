//! Dolgopyat operators for one-dimensional realizations: inverse-branch pairs
//! of `σ^N`, temporal increments of the roof, the C/D block partitions,
//! damping functions `β_J`, the operators `N_J` and the checks that go with
//! them.
//!
//! In one dimension the unstable chart is the identity, so `Z_j = D_j`,
//! `ψ = id` and a point `u` uses the branch pair attached to its first symbol.

use std::ops::Range;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ComplexField, FieldSpec, Grid, Measure, ScalarField};
use crate::ruelle::{lasota_yorke_probe, random_cone_function, LabOperator, PairSet};
use crate::symbolic::{Branch, SymbolicSystem};
use crate::thermo::{Suspension, ThermoState, DEFAULT_TOL};

pub const THETA0: f64 = 0.9;
pub const THETA1: f64 = 0.95;
/// Increments below this are treated as zero.
pub const DEGENERATE_INCREMENT: f64 = 1e-10;
const MAX_D_BLOCKS: usize = 1 << 22;

/// Pair of inverse branches of `σ^N` for each first symbol of the target point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchPair {
    pub n: usize,
    /// `(v1, v2)` as words of `n` symbols, indexed by the first symbol of `u`.
    pub words: Vec<(Vec<u8>, Vec<u8>)>,
}

impl BranchPair {
    /// Word of `v_i` (`i` is 1 or 2) for points starting with `c`.
    pub fn word(&self, i: usize, c: u8) -> &[u8] {
        let p = &self.words[c as usize];
        if i == 1 {
            &p.0
        } else {
            &p.1
        }
    }

    /// Realized cylinders `v_1([0,1])`, `v_2([0,1])` for first symbol `c`.
    pub fn images(&self, sys: &SymbolicSystem, c: u8) -> Result<[(f64, f64); 2]> {
        Ok([sys.interval(self.word(1, c))?, sys.interval(self.word(2, c))?])
    }
}

/// Words `s1·t`, `s2·t` with a common tail `t` of `n − 1` symbols: `t` is the
/// lexicographically smallest tail that can precede `c` and whose first symbol
/// has two predecessors, `s1 < s2` its two smallest predecessors.
pub fn select_branch_pair(sys: &SymbolicSystem, n: usize) -> Result<BranchPair> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("N = {n} must be at least 2")));
    }
    let k = sys.alphabet_size();
    let preds = |s: u8| -> Vec<u8> { (0..k as u8).filter(|&r| sys.allowed(r, s)).collect() };
    let mut words = Vec::with_capacity(k);
    for c in 0..k as u8 {
        // reach[r][x]: some admissible word of r + 1 symbols starts at x and ends
        // in a symbol allowed before c.
        let mut reach: Vec<Vec<bool>> = vec![(0..k as u8).map(|x| sys.allowed(x, c)).collect()];
        for r in 1..n - 1 {
            let prev = &reach[r - 1];
            let next = (0..k as u8).map(|x| sys.successors(x).iter().any(|&y| prev[y as usize])).collect();
            reach.push(next);
        }
        let t0 = (0..k as u8)
            .find(|&x| reach[n - 2][x as usize] && preds(x).len() >= 2)
            .ok_or(Error::NoAdmissiblePair(n))?;
        let mut tail = vec![t0];
        for r in (0..n - 2).rev() {
            let last = *tail.last().unwrap();
            let next = *sys
                .successors(last)
                .iter()
                .find(|&&y| reach[r][y as usize])
                .expect("reachability table is consistent");
            tail.push(next);
        }
        let p = preds(t0);
        let mut v1 = vec![p[0]];
        v1.extend_from_slice(&tail);
        let mut v2 = vec![p[1]];
        v2.extend_from_slice(&tail);
        words.push((v1, v2));
    }
    Ok(BranchPair { n, words })
}

fn invert_branch(branch: &Branch, y: f64) -> f64 {
    match branch {
        Branch::Affine { a, b } => (y - b) / a,
        Branch::Expr { .. } => {
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if branch.apply(mid) < y {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        }
    }
}

/// Realized expanding map `σ` on the cylinder of `symbol`.
pub fn forward_map(sys: &SymbolicSystem, symbol: u8, y: f64) -> Result<f64> {
    Ok(invert_branch(&sys.require_realization()?.branches[symbol as usize], y))
}

/// Largest `|σ^N(v_i(u)) − u|` over `samples` realized points per symbol.
pub fn branch_identity_error(sys: &SymbolicSystem, pair: &BranchPair, samples: usize) -> Result<f64> {
    let mut err = 0.0f64;
    for c in 0..sys.alphabet_size() as u8 {
        let (lo, hi) = sys.interval(&[c])?;
        for s in 0..samples.max(2) {
            let x = lo + (hi - lo) * s as f64 / (samples.max(2) - 1) as f64;
            for i in 1..=2 {
                let word = pair.word(i, c);
                let mut y = sys.compose(word, x)?;
                for &sym in word {
                    y = forward_map(sys, sym, y)?;
                }
                err = err.max((y - x).abs());
            }
        }
    }
    Ok(err)
}

fn roof_at(tau: &FieldSpec, x: f64) -> Result<f64> {
    tau.eval_coord(x)
        .ok_or_else(|| Error::InvalidArgument("roof must be a function of the realized coordinate".into()))
}

/// `Φ_c(x) = τ_N(v2(x)) − τ_N(v1(x))` for `x` in the cylinder of `c`.
pub fn phase_increment(sys: &SymbolicSystem, pair: &BranchPair, tau: &FieldSpec, c: u8, x: f64) -> Result<f64> {
    let (w1, w2) = (pair.word(1, c), pair.word(2, c));
    let mut s = 0.0;
    for k in 0..pair.n {
        s += roof_at(tau, sys.compose(&w2[k..], x)?)? - roof_at(tau, sys.compose(&w1[k..], x)?)?;
    }
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IncrementReport {
    pub delta_hat: f64,
    pub degenerate: bool,
    /// Grid size of the final estimate.
    pub grid_size: usize,
    /// `(grid size, estimate)` per refinement.
    pub history: Vec<(usize, f64)>,
    /// Largest finite-difference slope of `Φ`.
    pub phi_lip: f64,
    pub converged: bool,
}

/// Smallest finite-difference slope of `Φ_c` on uniform grids over every
/// symbol cylinder, refined ×4 until the estimate moves by less than 10%.
/// Roofs given by tables are locally constant, so their increment vanishes.
pub fn temporal_increment_bound(sys: &SymbolicSystem, pair: &BranchPair, tau: &FieldSpec, grid_size: usize) -> Result<IncrementReport> {
    if grid_size < 2 {
        return Err(Error::InvalidArgument("grid_size must be at least 2".into()));
    }
    sys.require_realization()?;
    if let FieldSpec::Table { .. } = tau {
        return Ok(IncrementReport {
            delta_hat: 0.0,
            degenerate: true,
            grid_size,
            history: vec![(grid_size, 0.0)],
            phi_lip: 0.0,
            converged: true,
        });
    }
    let estimate = |m: usize| -> Result<(f64, f64)> {
        let mut lo_slope = f64::INFINITY;
        let mut hi_slope = 0.0f64;
        for c in 0..sys.alphabet_size() as u8 {
            let (lo, hi) = sys.interval(&[c])?;
            let xs: Vec<f64> = (0..m).map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64).collect();
            let phi = xs.par_iter().map(|&x| phase_increment(sys, pair, tau, c, x)).collect::<Result<Vec<f64>>>()?;
            for i in 0..m - 1 {
                let s = (phi[i + 1] - phi[i]).abs() / (xs[i + 1] - xs[i]);
                lo_slope = lo_slope.min(s);
                hi_slope = hi_slope.max(s);
            }
        }
        Ok((lo_slope, hi_slope))
    };
    let mut m = grid_size;
    let (mut est, mut lip) = estimate(m)?;
    let mut history = vec![(m, est)];
    let mut converged = false;
    for _ in 0..3 {
        m *= 4;
        let (next, next_lip) = estimate(m)?;
        history.push((m, next));
        let moved = (next - est).abs();
        est = next;
        lip = lip.max(next_lip);
        if moved <= 0.1 * est.abs() || (est == 0.0 && moved == 0.0) {
            converged = true;
            break;
        }
    }
    Ok(IncrementReport { delta_hat: est, degenerate: est < DEGENERATE_INCREMENT, grid_size: m, history, phi_lip: lip, converged })
}

/// Per-symbol range of `τ(x) − (u(σx) − u(x))` over sampled points of each
/// depth-1 cylinder; a constant value per cylinder witnesses that `τ` is
/// cohomologous to a function of the first symbol.
pub fn cohomology_residual(sys: &SymbolicSystem, tau: &FieldSpec, u: &FieldSpec, samples: usize) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::with_capacity(sys.alphabet_size());
    for c in 0..sys.alphabet_size() as u8 {
        let (lo, hi) = sys.interval(&[c])?;
        let (mut a, mut b) = (f64::INFINITY, f64::NEG_INFINITY);
        for s in 0..samples.max(2) {
            let x = lo + (hi - lo) * s as f64 / (samples.max(2) - 1) as f64;
            let sx = forward_map(sys, c, x)?;
            let r = roof_at(tau, x)? - (roof_at(u, sx)? - roof_at(u, x)?);
            a = a.min(r);
            b = b.max(r);
        }
        out.push((a, b));
    }
    Ok(out)
}

/// A closed cylinder with its realized interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Block {
    pub word: Vec<u8>,
    pub lo: f64,
    pub hi: f64,
}

impl Block {
    pub fn diam(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub b: f64,
    pub eps1: f64,
    pub rho: f64,
    pub p0: usize,
    pub q0: usize,
    /// `ε1/|b|` may not exceed this.
    pub delta_prime: f64,
    /// Longest C block word the search may produce.
    pub depth_limit: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionScheme {
    pub spec: PartitionSpec,
    pub cap: f64,
    pub c_blocks: Vec<Block>,
    pub d_blocks: Vec<Block>,
    /// C block of each D block.
    pub parent: Vec<usize>,
    /// D blocks of each C block.
    pub children: Vec<Range<usize>>,
}

impl PartitionScheme {
    pub fn max_d_len(&self) -> usize {
        self.d_blocks.iter().map(|d| d.word.len()).max().unwrap_or(0)
    }
}

/// Maximal cylinders of diameter at most `ε1/|b|`, each split into its
/// subcylinders of co-length `p0·q0`.
pub fn build_partition(sys: &SymbolicSystem, spec: PartitionSpec) -> Result<PartitionScheme> {
    sys.require_realization()?;
    let b = spec.b.abs();
    if b < 1.0 {
        return Err(Error::InvalidArgument(format!("|b| = {b} is below 1")));
    }
    if !(spec.eps1 > 0.0) || !(spec.rho > 0.0 && spec.rho < 1.0) || spec.p0 == 0 || spec.q0 == 0 {
        return Err(Error::InvalidArgument("need ε1 > 0, 0 < ρ < 1, p0 ≥ 1 and q0 ≥ 1".into()));
    }
    let cap = spec.eps1 / b;
    if cap >= 1.0 {
        return Err(Error::InvalidArgument(format!("ε1/|b| = {cap} is not below the domain diameter")));
    }
    if cap > spec.delta_prime {
        return Err(Error::InvalidArgument(format!(
            "|b| = {b} is below b0 = ε1/δ' = {}",
            spec.eps1 / spec.delta_prime
        )));
    }
    let mut c_blocks = Vec::new();
    let mut stack: Vec<Vec<u8>> = (0..sys.alphabet_size() as u8).rev().map(|s| vec![s]).collect();
    while let Some(w) = stack.pop() {
        let (lo, hi) = sys.interval(&w)?;
        if hi - lo <= cap {
            c_blocks.push(Block { word: w, lo, hi });
            continue;
        }
        if w.len() >= spec.depth_limit {
            return Err(Error::CapTooSmall { cap, depth_limit: spec.depth_limit });
        }
        for &s in sys.successors(*w.last().unwrap()).iter().rev() {
            let mut e = w.clone();
            e.push(s);
            stack.push(e);
        }
    }
    let co = spec.p0 * spec.q0;
    let branching = (0..sys.alphabet_size() as u8).map(|s| sys.successors(s).len()).max().unwrap_or(1) as f64;
    if c_blocks.len() as f64 * branching.powi(co as i32) > MAX_D_BLOCKS as f64 {
        return Err(Error::CapTooSmall { cap, depth_limit: spec.depth_limit });
    }
    let mut d_blocks = Vec::new();
    let mut parent = Vec::new();
    let mut children = Vec::with_capacity(c_blocks.len());
    for (m, c) in c_blocks.iter().enumerate() {
        let start = d_blocks.len();
        let cyl = sys.cylinder_of(&c.word)?;
        for d in sys.subcylinders(&cyl, co)? {
            d_blocks.push(Block { word: d.word, lo: d.lo, hi: d.hi });
            parent.push(m);
        }
        children.push(start..d_blocks.len());
    }
    Ok(PartitionScheme { spec, cap, c_blocks, d_blocks, parent, children })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionCheck {
    /// Whether the inequalities were decided in exact rational arithmetic.
    pub exact: bool,
    pub c_violations: usize,
    pub d_violations: usize,
    pub ok: bool,
}

/// Checks `ρ·cap ≤ diam C ≤ cap` and `ρ^{p0q0+1}·cap ≤ diam D ≤ ρ^{q0}·cap`.
/// Affine realizations are decided exactly: a cylinder's diameter is the
/// product of its branch slopes, all of which are exact binary rationals.
pub fn check_partition(sys: &SymbolicSystem, scheme: &PartitionScheme) -> Result<PartitionCheck> {
    let r = sys.require_realization()?;
    let spec = &scheme.spec;
    let co = (spec.p0 * spec.q0) as i32;
    if r.all_affine() {
        let q = |x: f64| BigRational::from_float(x).ok_or_else(|| Error::InvalidArgument(format!("{x} is not finite")));
        let slopes: Vec<BigRational> = r.branches.iter().map(|b| q(b.slope_bounds().0)).collect::<Result<_>>()?;
        let diam = |w: &[u8]| {
            w.iter().fold(BigRational::from_integer(BigInt::from(1)), |acc, &s| acc * &slopes[s as usize])
        };
        let cap = q(spec.eps1)? / q(spec.b.abs())?;
        let rho = q(spec.rho)?;
        let pow = |x: &BigRational, n: i32| (0..n).fold(BigRational::from_integer(BigInt::from(1)), |acc, _| acc * x);
        let c_lo = &rho * &cap;
        let d_lo = pow(&rho, co + 1) * &cap;
        let d_hi = pow(&rho, spec.q0 as i32) * &cap;
        let c_violations = scheme
            .c_blocks
            .par_iter()
            .filter(|c| {
                let d = diam(&c.word);
                d < c_lo || d > cap
            })
            .count();
        let d_violations = scheme
            .d_blocks
            .par_iter()
            .filter(|c| {
                let d = diam(&c.word);
                d < d_lo || d > d_hi
            })
            .count();
        return Ok(PartitionCheck { exact: true, c_violations, d_violations, ok: c_violations + d_violations == 0 });
    }
    let slack = 1e-12;
    let cap = scheme.cap;
    let c_violations = scheme
        .c_blocks
        .iter()
        .filter(|c| c.diam() < spec.rho * cap * (1.0 - slack) || c.diam() > cap * (1.0 + slack))
        .count();
    let d_lo = spec.rho.powi(co + 1) * cap;
    let d_hi = spec.rho.powi(spec.q0 as i32) * cap;
    let d_violations = scheme
        .d_blocks
        .iter()
        .filter(|c| c.diam() < d_lo * (1.0 - slack) || c.diam() > d_hi * (1.0 + slack))
        .count();
    Ok(PartitionCheck { exact: false, c_violations, d_violations, ok: c_violations + d_violations == 0 })
}

/// Measured constants feeding the parameter formulas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemConstants {
    pub c0: f64,
    pub gamma: f64,
    pub gamma1: f64,
    pub rho: f64,
    pub p0: usize,
    pub delta_hat: f64,
    pub t: f64,
    /// Lasota-Yorke constant, at least 1.
    pub a0_ly: f64,
    /// Perturbation constant `C₀`.
    pub c_pert: f64,
    pub gibbs_c1: f64,
    pub gibbs_c2: f64,
    /// `‖f − Pτ‖₀`.
    pub g_sup: f64,
    /// A quarter of the smallest symbol-cylinder diameter.
    pub r0: f64,
    /// Largest admissible `|a|`.
    pub a_max: f64,
    /// Smallest admissible `N`.
    pub n0: usize,
}

/// Desk-scale replacements for certified values.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Overrides {
    pub n: Option<usize>,
    pub q0: Option<usize>,
    pub eps1: Option<f64>,
    pub mu: Option<f64>,
}

impl Overrides {
    pub fn is_empty(&self) -> bool {
        self.n.is_none() && self.q0.is_none() && self.eps1.is_none() && self.mu.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DolgopyatParams {
    pub b: f64,
    pub e: f64,
    /// Right-hand side of the lower bound on `γ^N`.
    pub n_bound: f64,
    pub n: usize,
    pub n_certified: usize,
    pub q0: usize,
    pub q0_certified: usize,
    pub eps1: f64,
    pub eps1_certified: f64,
    pub mu: f64,
    /// `μ(N)` from the formula at the effective `N`, `q0`, `ε1`.
    pub mu_formula: f64,
    /// Lipschitz bound for `β`.
    pub gamma_lip: f64,
    pub s: f64,
    pub d_s: f64,
    pub eps_prime: f64,
    pub eps2: f64,
    pub a0: f64,
    pub delta_prime: f64,
    pub b0: f64,
    /// Phase-gap constant `δ̂ρ/16`.
    pub c2_phase: f64,
    pub n_satisfies_bound: bool,
    pub eps1_satisfies_bound: bool,
    pub mu_satisfies_bound: bool,
    pub q0_satisfies_bound: bool,
    pub certified: bool,
    pub banner: Option<String>,
    pub inputs: SystemConstants,
}

/// Smallest `q0 ≥ 1` with `θ0 < θ1 − 32ρ^{q0−1}`.
pub fn certified_q0(rho: f64) -> usize {
    (1..=10_000).find(|&q| THETA0 < THETA1 - 32.0 * rho.powi(q as i32 - 1)).unwrap_or(10_000)
}

fn mu_formula(k: &SystemConstants, n: usize, q0: usize, eps1: f64) -> f64 {
    let co = (k.p0 * q0) as i32;
    let second = k.c0 * k.rho.powi(co + 2) * eps1 / (4.0 * k.gamma1.powi(n as i32));
    let third = (k.delta_hat * k.rho * eps1 / 256.0).sin().powi(2) / (4.0 * (2.0 * k.t * n as f64).exp());
    0.25f64.min(second).min(third)
}

/// Evaluates the constants of the construction at the measured inputs and
/// applies any overrides, recording whether each bound still holds.
pub fn compute_params(k: &SystemConstants, b: f64, ov: &Overrides) -> Result<DolgopyatParams> {
    if !(k.delta_hat >= DEGENERATE_INCREMENT) {
        return Err(Error::DegenerateRoof(k.delta_hat));
    }
    if b.abs() < 1.0 {
        return Err(Error::InvalidArgument(format!("|b| = {} is below 1", b.abs())));
    }
    if !(k.gamma > 1.0 && k.rho > 0.0 && k.rho < 1.0 && k.c0 > 0.0) {
        return Err(Error::InvalidArgument("need γ > 1, 0 < ρ < 1 and c0 > 0".into()));
    }
    let a0 = k.a0_ly.max(1.0);
    let e = (4.0 * a0).max(2.0 * a0 * k.t / (k.gamma - 1.0));
    let n_bound = (6.0 * a0).max(200.0 * a0 / (k.c0 * k.c0)).max(512.0 * e / (k.c0 * k.delta_hat * k.rho));
    let n_log = if n_bound > 1.0 { (n_bound.ln() / k.gamma.ln()).ceil() as usize } else { 0 };
    let n_certified = k.n0.max(n_log).max(2);
    let q0_certified = certified_q0(k.rho);
    let eps1_certified = (1.0 / (32.0 * k.c_pert))
        .min(k.gibbs_c1)
        .min(1.0 / (4.0 * e))
        .min(1.0 / (k.delta_hat * k.rho.powi(k.p0 as i32 + 2)))
        .min(k.c0 * k.r0)
        .min(k.c0 * k.c0 * (k.gamma - 1.0) / (16.0 * k.t));

    let n = ov.n.unwrap_or(n_certified);
    let q0 = ov.q0.unwrap_or(q0_certified);
    let eps1 = ov.eps1.unwrap_or(eps1_certified);
    if n < 2 || q0 == 0 || !(eps1 > 0.0) {
        return Err(Error::InvalidArgument("overrides need N ≥ 2, q0 ≥ 1 and ε1 > 0".into()));
    }
    let mu_f = mu_formula(k, n, q0, eps1);
    let mu = match ov.mu {
        Some(m) if !(m > 0.0 && m <= 0.25) => {
            return Err(Error::InvalidArgument(format!("μ = {m} must lie in (0, 1/4]")));
        }
        Some(m) => m,
        None => mu_f,
    };
    let co = (k.p0 * q0) as i32;
    let babs = b.abs();
    let gamma_lip = 2.0 * mu * k.gamma1.powi(n as i32) * babs / (k.c0 * k.rho.powi(co + 2) * eps1);
    let s = 1.0 / (k.c0 * k.c0 * k.rho.powi(co + 1));
    let d_s = k.gibbs_c1 / k.gibbs_c2 * (-(k.p0 as f64) * k.g_sup * (s.ln() / k.rho.ln().abs() + 1.0)).exp();
    let eps_prime = d_s / ((e * eps1 / k.c0).powi(2)).exp();
    let eps2 = eps_prime * mu * (-(n as f64) * k.t).exp() / 4.0;
    let a0_decay = if k.c_pert > 0.0 { eps2.ln_1p() / (k.c_pert * n as f64) } else { f64::INFINITY };
    let delta_prime = k.r0;
    let banner = (!ov.is_empty()).then(|| {
        let mut parts = Vec::new();
        if let Some(v) = ov.n {
            parts.push(format!("N = {v} (certified {n_certified})"));
        }
        if let Some(v) = ov.q0 {
            parts.push(format!("q0 = {v} (certified {q0_certified})"));
        }
        if let Some(v) = ov.eps1 {
            parts.push(format!("eps1 = {v} (certified {eps1_certified:e})"));
        }
        if let Some(v) = ov.mu {
            parts.push(format!("mu = {v} (formula {mu_f:e})"));
        }
        format!("CONSTANTS NOT CERTIFIED: user overrides {}", parts.join(", "))
    });
    Ok(DolgopyatParams {
        b,
        e,
        n_bound,
        n,
        n_certified,
        q0,
        q0_certified,
        eps1,
        eps1_certified,
        mu,
        mu_formula: mu_f,
        gamma_lip,
        s,
        d_s,
        eps_prime,
        eps2,
        a0: k.a_max.min(a0_decay),
        delta_prime,
        b0: (eps1 / delta_prime).max(1.0),
        c2_phase: k.delta_hat * k.rho / 16.0,
        n_satisfies_bound: n >= k.n0 && k.gamma.powi(n as i32) >= n_bound,
        eps1_satisfies_bound: eps1 <= eps1_certified,
        mu_satisfies_bound: mu <= mu_f,
        q0_satisfies_bound: THETA0 < THETA1 - 32.0 * k.rho.powi(q0 as i32 - 1),
        certified: ov.is_empty(),
        banner,
        inputs: *k,
    })
}

/// `J ⊆ {1, 2} × D-block indices`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IndexSet {
    pub members: Vec<(u8, usize)>,
    pub dense: bool,
}

impl IndexSet {
    pub fn empty() -> Self {
        IndexSet { members: Vec::new(), dense: false }
    }

    /// `{(i, j)}` for every D block.
    pub fn all(scheme: &PartitionScheme, i: u8) -> Self {
        IndexSet { members: (0..scheme.d_blocks.len()).map(|j| (i, j)).collect(), dense: !scheme.c_blocks.is_empty() }
    }

    /// Density: every C block contains a D block used by some member. Returns
    /// the first C block without one.
    pub fn first_gap(&self, scheme: &PartitionScheme) -> Option<usize> {
        let mut hit = vec![false; scheme.c_blocks.len()];
        for &(_, j) in &self.members {
            hit[scheme.parent[j]] = true;
        }
        hit.iter().position(|h| !h)
    }
}

/// `X_{i,j} = v_i(D_j)` as a word.
pub fn x_word(pair: &BranchPair, scheme: &PartitionScheme, i: u8, j: usize) -> Vec<u8> {
    let d = &scheme.d_blocks[j].word;
    let mut w = pair.word(i as usize, d[0]).to_vec();
    w.extend_from_slice(d);
    w
}

/// `β = 1 − μ Σ_{(i,j)∈J} 1_{X_{i,j}}` on the grid.
pub fn build_beta(grid: &Grid, pair: &BranchPair, scheme: &PartitionScheme, j: &IndexSet, mu: f64) -> Result<ScalarField> {
    if !(mu >= 0.0 && mu <= 0.25) {
        return Err(Error::InvalidArgument(format!("μ = {mu} must lie in [0, 1/4]")));
    }
    let d = grid.depth();
    let mut words: Vec<Vec<u8>> = Vec::with_capacity(j.members.len());
    for &(i, jj) in &j.members {
        if jj >= scheme.d_blocks.len() || !(i == 1 || i == 2) {
            return Err(Error::InvalidArgument(format!("({i}, {jj}) is not an index of the scheme")));
        }
        let w = x_word(pair, scheme, i, jj);
        if w.len() > d {
            return Err(Error::CapTooSmall { cap: scheme.cap, depth_limit: d });
        }
        words.push(w);
    }
    let mut sorted = words.clone();
    sorted.sort();
    for win in sorted.windows(2) {
        if win[1].starts_with(&win[0]) {
            return Err(Error::OverlappingSupports(format!("{:?} contains {:?}", win[0], win[1])));
        }
    }
    let mut beta = vec![1.0; grid.n_states()];
    for w in &words {
        for s in grid.states.prefix_range(w) {
            beta[s] = 1.0 - mu;
        }
    }
    Ok(ScalarField { depth: d, values: beta })
}

/// Lipschitz constant of `β` in D, pairs with distinct first symbols at distance 1.
pub fn beta_lip(grid: &Grid, beta: &ScalarField) -> Result<f64> {
    let range = beta.values.iter().fold(0.0f64, |m, v| m.max(1.0 - v));
    Ok(beta.lip_d(grid)?.max(range))
}

fn require_positive(h: &ScalarField) -> Result<()> {
    if let Some(i) = h.values.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::InvalidArgument(format!("H must be strictly positive (index {i})")));
    }
    Ok(())
}

/// `N_J H = M_a^N(β H)`.
pub fn apply_nj(op: &LabOperator<'_>, n: usize, beta: &ScalarField, h: &ScalarField) -> Result<ScalarField> {
    require_positive(h)?;
    if beta.depth != h.depth {
        return Err(Error::DepthMismatch { expected: h.depth, got: beta.depth });
    }
    let bh = ScalarField { depth: h.depth, values: beta.values.iter().zip(&h.values).map(|(b, v)| b * v).collect() };
    op.apply_modulus_n(&bh, n)
}

/// `H ∈ K_A`: `|H(u) − H(u')| ≤ A H(u') D(u, u')` for all `u, u'` sharing a
/// first symbol, decided exactly on the grid.
pub fn cone_membership(grid: &Grid, h: &ScalarField, a: f64) -> Result<bool> {
    require_positive(h)?;
    Ok(h.cone_constant(grid)? <= a * (1.0 + 1e-12))
}

/// Per-state data of the two branch paths `u ↦ v_i(u)` through the grid:
/// `f^(a)_N`, `τ_N` and the end state.
#[derive(Debug, Clone)]
pub struct PairPaths {
    pub f: Vec<[f64; 2]>,
    pub tau: Vec<[f64; 2]>,
    pub end: Vec<[usize; 2]>,
}

impl PairPaths {
    pub fn new(grid: &Grid, pair: &BranchPair, f_a: &[f64], tau: &[f64]) -> Result<Self> {
        let d = grid.depth();
        let rows: Vec<Result<([f64; 2], [f64; 2], [usize; 2])>> = (0..grid.n_states())
            .into_par_iter()
            .map(|u| {
                let c = grid.states.word(u)[0];
                let (mut fs, mut ts, mut ends) = ([0.0; 2], [0.0; 2], [0usize; 2]);
                let mut buf = Vec::with_capacity(d + 1);
                for i in 0..2 {
                    let mut state = u;
                    for &s in pair.word(i + 1, c).iter().rev() {
                        buf.clear();
                        buf.push(s);
                        buf.extend_from_slice(grid.states.word(state));
                        let e = grid.edges.index_of(&buf).ok_or_else(|| Error::NotAdmissible(buf.clone()))?;
                        fs[i] += f_a[e];
                        ts[i] += tau[e];
                        state = grid.edge_col(e);
                    }
                    ends[i] = state;
                }
                Ok((fs, ts, ends))
            })
            .collect();
        let mut out = PairPaths { f: Vec::new(), tau: Vec::new(), end: Vec::new() };
        for r in rows {
            let (f, t, e) = r?;
            out.f.push(f);
            out.tau.push(t);
            out.end.push(e);
        }
        Ok(out)
    }

    /// `(χ^(1)(u), χ^(2)(u))` with the phase convention of `L_ab`.
    pub fn chi(&self, u: usize, b: f64, mu: f64, h: &ComplexField, big_h: &ScalarField) -> (f64, f64) {
        let [e1, e2] = self.end[u];
        let w1 = self.f[u][0].exp();
        let w2 = self.f[u][1].exp();
        let z1 = Complex64::from_polar(w1, -b * self.tau[u][0]) * h.values[e1];
        let z2 = Complex64::from_polar(w2, -b * self.tau[u][1]) * h.values[e2];
        let num = (z1 + z2).norm();
        let (h1, h2) = (w1 * big_h.values[e1], w2 * big_h.values[e2]);
        (num / ((1.0 - mu) * h1 + h2), num / (h1 + (1.0 - mu) * h2))
    }

    /// `γ(u) = b[τ_N(v2 u) − τ_N(v1 u)]` on the grid.
    pub fn phase(&self, u: usize, b: f64) -> f64 {
        b * (self.tau[u][1] - self.tau[u][0])
    }
}

/// Includes `(1, j)` when `χ^(1) ≤ 1` on all of `Z_j`, otherwise `(2, j)` when
/// `χ^(2) ≤ 1` there; fails unless every C block receives a member.
pub fn dense_j_construct(
    grid: &Grid,
    paths: &PairPaths,
    scheme: &PartitionScheme,
    b: f64,
    mu: f64,
    h: &ComplexField,
    big_h: &ScalarField,
) -> Result<IndexSet> {
    require_positive(big_h)?;
    if h.depth != grid.depth() || big_h.depth != grid.depth() {
        return Err(Error::DepthMismatch { expected: grid.depth(), got: h.depth.max(big_h.depth) });
    }
    if scheme.max_d_len() > grid.depth() {
        return Err(Error::CapTooSmall { cap: scheme.cap, depth_limit: grid.depth() });
    }
    let picks: Vec<Option<(u8, usize)>> = scheme
        .d_blocks
        .par_iter()
        .enumerate()
        .map(|(j, blk)| {
            let (mut m1, mut m2) = (0.0f64, 0.0f64);
            for u in grid.states.prefix_range(&blk.word) {
                let (c1, c2) = paths.chi(u, b, mu, h, big_h);
                m1 = m1.max(c1);
                m2 = m2.max(c2);
            }
            if m1 <= 1.0 {
                Some((1, j))
            } else if m2 <= 1.0 {
                Some((2, j))
            } else {
                None
            }
        })
        .collect();
    let mut set = IndexSet { members: picks.into_iter().flatten().collect(), dense: false };
    if let Some(m) = set.first_gap(scheme) {
        return Err(Error::DensenessFailure { block: m, word: scheme.c_blocks[m].word.clone() });
    }
    set.dense = true;
    Ok(set)
}

/// `∫(N_J H)² dν / ∫H² dν`.
pub fn l2_ratio(nu: &Measure, nh: &ScalarField, h: &ScalarField) -> f64 {
    let sq = |v: &[f64]| nu.integrate(&v.iter().map(|x| x * x).collect::<Vec<_>>());
    sq(&nh.values) / sq(&h.values)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominationReport {
    /// Cylinders with `|L^N h| > N_J H`.
    pub violations: usize,
    /// Largest `|L^N h| − N_J H`.
    pub max_excess: f64,
    /// Largest `|ΔL^N h| / (N_J H(u') D)` over the pair set.
    pub lip_ratio: f64,
    pub lip_bound: f64,
    pub ok: bool,
}

/// Pointwise domination `|L^N h| ≤ N_J H` and its Lipschitz companion
/// `|L^N h(u) − L^N h(u')| ≤ E|b| N_J H(u') D(u, u')`.
pub fn verify_pointwise_domination(
    op: &LabOperator<'_>,
    pairs: &PairSet,
    n: usize,
    e_b: f64,
    h: &ComplexField,
    nh: &ScalarField,
) -> Result<DominationReport> {
    let lh = op.apply_n(h, n)?;
    let mut violations = 0;
    let mut max_excess = f64::NEG_INFINITY;
    for (z, &v) in lh.values.iter().zip(&nh.values) {
        let ex = z.norm() - v;
        max_excess = max_excess.max(ex);
        if ex > 1e-12 * v.abs().max(1e-300) {
            violations += 1;
        }
    }
    let lip_ratio = pairs.max_ratio(|i, j, d| (lh.values[i] - lh.values[j]).norm() / (nh.values[j] * d));
    Ok(DominationReport { violations, max_excess, lip_ratio, lip_bound: e_b, ok: violations == 0 && lip_ratio <= e_b * (1.0 + 1e-12) })
}

/// Runs the construction at one `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DolgopyatConfig {
    pub depth: usize,
    pub a: f64,
    pub b: f64,
    pub overrides: Overrides,
    pub increment_grid: usize,
    /// Grid depth of the Lasota-Yorke probe measuring `A₀`.
    pub probe_depth: usize,
    pub probe_trials: usize,
    pub seed: u64,
}

impl DolgopyatConfig {
    /// Desk parameters: depth 14, `N = 6`, `q0 = 2`, `ε1/|b| = 1/32`, `μ = 1/4`.
    pub fn desk(b: f64) -> Self {
        DolgopyatConfig {
            depth: 14,
            a: 0.0,
            b,
            overrides: Overrides { n: Some(6), q0: Some(2), eps1: Some(b.abs() / 32.0), mu: Some(0.25) },
            increment_grid: 1024,
            probe_depth: 10,
            probe_trials: 2,
            seed: 7,
        }
    }
}

/// Every ingredient of the construction at a fixed `(a, b)`.
pub struct Dolgopyat {
    pub cfg: DolgopyatConfig,
    pub susp: Suspension,
    pub p: f64,
    pub state: ThermoState,
    pub nu: Measure,
    pub pair: BranchPair,
    pub increment: IncrementReport,
    pub consts: SystemConstants,
    pub params: DolgopyatParams,
    pub scheme: Result<PartitionScheme>,
    paths: PairPaths,
}

impl Dolgopyat {
    pub fn new(sys: &SymbolicSystem, f: &FieldSpec, tau: &FieldSpec, cfg: DolgopyatConfig) -> Result<Self> {
        let real = sys.require_realization()?;
        let susp = Suspension::new(sys, f.clone(), tau.clone(), cfg.depth, None)?;
        let p = susp.pressure_root(DEFAULT_TOL)?;
        let state = susp.state(p, cfg.a, DEFAULT_TOL)?;
        let nu = match &state.nu {
            Some(nu) => nu.clone(),
            None => susp.state(p, 0.0, DEFAULT_TOL)?.nu.expect("a = 0 carries the Gibbs measure"),
        };
        let n0 = sys.m0() + 1;
        let first_n = cfg.overrides.n.unwrap_or(n0);
        let mut pair = select_branch_pair(sys, first_n)?;
        let mut increment = temporal_increment_bound(sys, &pair, tau, cfg.increment_grid)?;

        let dist = sys.distortion_ratios(8)?;
        let rho = if real.all_affine() {
            real.branches.iter().map(|b| b.slope_bounds().0).fold(f64::INFINITY, f64::min)
        } else {
            dist.rho_est
        };
        let offsets = [-0.05, -0.01, 0.01, 0.05];
        let t = susp.t_constant(p, &[-0.05, 0.0, 0.05])?.t;
        let c_pert = susp.perturbation_constant(p, &offsets)?;
        let gibbs = susp.gibbs(p, cfg.depth.min(10))?;
        let probe = Suspension::new(sys, f.clone(), tau.clone(), cfg.probe_depth.min(cfg.depth), None)?;
        let probe_p = probe.pressure_root(DEFAULT_TOL)?;
        let ly = lasota_yorke_probe(&probe, probe_p, cfg.a, cfg.b.abs().max(1.0), cfg.probe_trials.max(1), cfg.seed)?;
        let r0 = (0..sys.alphabet_size() as u8)
            .map(|s| sys.diameter(&[s]))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(f64::INFINITY, f64::min)
            / 4.0;
        let g = susp.shifted(p);
        let consts = SystemConstants {
            c0: real.constants.c0,
            gamma: real.constants.gamma,
            gamma1: real.constants.gamma1,
            rho,
            p0: dist.p0_est,
            delta_hat: increment.delta_hat,
            t,
            a0_ly: ly.a0_est.max(1.0),
            c_pert,
            gibbs_c1: gibbs.c1,
            gibbs_c2: gibbs.c2,
            g_sup: g.iter().fold(0.0f64, |m, v| m.max(v.abs())),
            r0,
            a_max: susp.a_max,
            n0,
        };
        let params = compute_params(&consts, cfg.b, &cfg.overrides)?;
        if params.n != pair.n {
            pair = select_branch_pair(sys, params.n)?;
            increment = temporal_increment_bound(sys, &pair, tau, cfg.increment_grid)?;
        }
        let scheme = build_partition(
            sys,
            PartitionSpec {
                b: cfg.b,
                eps1: params.eps1,
                rho,
                p0: consts.p0,
                q0: params.q0,
                delta_prime: params.delta_prime,
                depth_limit: 40,
            },
        );
        let paths = PairPaths::new(&susp.grid, &pair, &state.f_a, &susp.tau)?;
        Ok(Dolgopyat { cfg, susp, p, state, nu, pair, increment, consts, params, scheme, paths })
    }

    pub fn grid(&self) -> &Grid {
        &self.susp.grid
    }

    pub fn scheme(&self) -> Result<&PartitionScheme> {
        self.scheme.as_ref().map_err(Clone::clone)
    }

    pub fn paths(&self) -> &PairPaths {
        &self.paths
    }

    pub fn operator(&self) -> Result<LabOperator<'_>> {
        LabOperator::new(&self.susp, &self.state, self.cfg.b)
    }

    /// `E|b|`.
    pub fn cone_bound(&self) -> f64 {
        self.params.e * self.cfg.b.abs()
    }

    pub fn beta(&self, j: &IndexSet) -> Result<ScalarField> {
        build_beta(self.grid(), &self.pair, self.scheme()?, j, self.params.mu)
    }

    pub fn apply_nj(&self, j: &IndexSet, h: &ScalarField) -> Result<ScalarField> {
        let beta = self.beta(j)?;
        apply_nj(&self.operator()?, self.params.n, &beta, h)
    }

    pub fn dense_j(&self, h: &ComplexField, big_h: &ScalarField) -> Result<IndexSet> {
        dense_j_construct(self.grid(), &self.paths, self.scheme()?, self.cfg.b, self.params.mu, h, big_h)
    }

    /// Random `H ∈ K_{E|b|}` with a companion `h = H·e^{iφ}` whose phase has
    /// D-Lipschitz constant at most `E|b|/4`.
    pub fn random_pair(&self, rng: &mut impl Rng) -> Result<(ComplexField, ScalarField)> {
        let grid = self.grid();
        let eb = self.cone_bound();
        let big_h = random_cone_function(grid, eb / 2.0, rng)?;
        let phase = random_cone_function(grid, (eb / 4.0).exp_m1(), rng)?;
        let shift = rng.gen_range(0.0..std::f64::consts::TAU);
        let h = ComplexField {
            depth: grid.depth(),
            values: big_h
                .values
                .iter()
                .zip(&phase.values)
                .map(|(&v, &ph)| Complex64::from_polar(v, ph.ln() + shift))
                .collect(),
        };
        Ok((h, big_h))
    }

    /// `γ(x) = b Φ(x)` range over sampled points of a block.
    fn phase_range(&self, tau: &FieldSpec, blk: &Block) -> Result<(f64, f64)> {
        let c = blk.word[0];
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s in 0..3 {
            let x = blk.lo + blk.diam() * s as f64 / 2.0;
            let g = self.cfg.b * phase_increment(&self.grid().sys, &self.pair, tau, c, x)?;
            lo = lo.min(g);
            hi = hi.max(g);
        }
        Ok((lo, hi))
    }

    /// Phase gap over separable D pairs of a partition built with `q0`: in one
    /// dimension `D_j`, `D_j'` in `C_m` are separable when some of their points
    /// are at distance at least `diam(C_m)/2`.
    pub fn phase_gap(&self, q0: usize) -> Result<PhaseGapReport> {
        let scheme = build_partition(
            &self.grid().sys,
            PartitionSpec { q0, ..self.scheme()?.spec },
        )?;
        let tau = &self.susp.tau_spec;
        let ranges = scheme
            .d_blocks
            .par_iter()
            .map(|blk| self.phase_range(tau, blk))
            .collect::<Result<Vec<_>>>()?;
        let required = self.params.c2_phase * self.params.eps1;
        let per_block: Vec<(usize, usize, f64)> = scheme
            .children
            .par_iter()
            .enumerate()
            .map(|(m, kids)| {
                let half = 0.5 * scheme.c_blocks[m].diam();
                let (mut pairs, mut viol, mut min_gap) = (0usize, 0usize, f64::INFINITY);
                for j in kids.clone() {
                    for jj in j + 1..kids.end {
                        let (a, b) = (&scheme.d_blocks[j], &scheme.d_blocks[jj]);
                        if (b.hi - a.lo).max(a.hi - b.lo) < half {
                            continue;
                        }
                        pairs += 1;
                        let (ra, rb) = (ranges[j], ranges[jj]);
                        let gap = (rb.0 - ra.1).max(ra.0 - rb.1).max(0.0);
                        min_gap = min_gap.min(gap);
                        if gap < required {
                            viol += 1;
                        }
                    }
                }
                (pairs, viol, min_gap)
            })
            .collect();
        let pairs = per_block.iter().map(|x| x.0).sum();
        let violations = per_block.iter().map(|x| x.1).sum();
        let min_gap = per_block.iter().map(|x| x.2).fold(f64::INFINITY, f64::min);
        Ok(PhaseGapReport { q0, pairs, violations, min_gap, required, ok: violations == 0 && pairs > 0 })
    }

    /// Largest spread of `γ` over a single `Z_j` of the working partition.
    pub fn phase_spread(&self) -> Result<f64> {
        let scheme = self.scheme()?;
        let tau = &self.susp.tau_spec;
        let spreads = scheme
            .d_blocks
            .par_iter()
            .map(|blk| self.phase_range(tau, blk).map(|(lo, hi)| hi - lo))
            .collect::<Result<Vec<_>>>()?;
        Ok(spreads.into_iter().fold(0.0, f64::max))
    }

    /// Iterates `h_{m+1} = L^N h_m`, `H_{m+1} = N_{J_m} H_m` from `h = H = 1`.
    pub fn envelope(&self, steps: usize) -> Result<EnvelopeReport> {
        let grid = self.grid();
        let op = self.operator()?;
        let mut h = ComplexField::constant(grid, Complex64::new(1.0, 0.0));
        let mut big_h = ScalarField::constant(grid, 1.0);
        let mut h_sq = vec![self.nu.integrate_sq_modulus(&h.values)];
        let mut big_sq = vec![self.nu.integrate(&big_h.values.iter().map(|x| x * x).collect::<Vec<_>>())];
        let mut domination_violations = 0;
        let mut dense_failure = None;
        for step in 0..steps {
            let j = match self.dense_j(&h, &big_h) {
                Ok(j) => j,
                Err(Error::DensenessFailure { .. }) => {
                    dense_failure = Some(step);
                    break;
                }
                Err(e) => return Err(e),
            };
            big_h = apply_nj(&op, self.params.n, &self.beta(&j)?, &big_h)?;
            h = op.apply_n(&h, self.params.n)?;
            domination_violations += h
                .values
                .iter()
                .zip(&big_h.values)
                .filter(|(z, v)| z.norm() > **v * (1.0 + 1e-12))
                .count();
            h_sq.push(self.nu.integrate_sq_modulus(&h.values));
            big_sq.push(self.nu.integrate(&big_h.values.iter().map(|x| x * x).collect::<Vec<_>>()));
        }
        let rho_hat = big_sq.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
        let ok = dense_failure.is_none()
            && domination_violations == 0
            && rho_hat < 1.0
            && h_sq.iter().zip(&big_sq).all(|(a, b)| *a <= b * (1.0 + 1e-12))
            && big_sq.iter().enumerate().all(|(m, v)| *v <= big_sq[0] * rho_hat.powi(m as i32) * (1.0 + 1e-12));
        Ok(EnvelopeReport { h_sq, big_h_sq: big_sq, rho_hat, domination_violations, dense_failure, ok })
    }

    /// The full battery of checks.
    pub fn run_suite(&self, suite: &SuiteConfig) -> Result<DolgopyatReport> {
        let grid = self.grid();
        let sys = &grid.sys;
        let scheme = self.scheme()?;
        let op = self.operator()?;
        let pairs = PairSet::new(grid)?;
        let eb = self.cone_bound();
        let partition = check_partition(sys, scheme)?;

        let j_all = IndexSet::all(scheme, 1);
        let beta = self.beta(&j_all)?;
        let (bmin, bmax) = beta.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let lip = beta_lip(grid, &beta)?;
        let beta_report = BetaReport {
            min: bmin,
            max: bmax,
            lip,
            gamma_lip: self.params.gamma_lip,
            ok: bmin >= 1.0 - self.params.mu - 1e-15 && bmax <= 1.0 && lip <= self.params.gamma_lip,
        };

        let mut rng = ChaCha8Rng::seed_from_u64(suite.seed);
        let mut cone_worst = 0.0f64;
        let mut cone_fail = 0;
        for _ in 0..suite.cone_trials {
            let big_h = random_cone_function(grid, eb, &mut rng)?;
            let out = apply_nj(&op, self.params.n, &beta, &big_h)?;
            let c = out.cone_constant(grid)?;
            cone_worst = cone_worst.max(c);
            if !cone_membership(grid, &out, eb)? {
                cone_fail += 1;
            }
        }
        let cone = ConeReport { trials: suite.cone_trials, failures: cone_fail, worst: cone_worst, bound: eb, ok: cone_fail == 0 };

        let mut ratios = Vec::with_capacity(suite.l2_trials);
        let mut dense_failures = Vec::new();
        let mut dom_violations = 0;
        let mut dom_excess = f64::NEG_INFINITY;
        let mut dom_lip = 0.0f64;
        let mut pre_worst = 0.0f64;
        for t in 0..suite.l2_trials {
            let big_h = random_cone_function(grid, eb, &mut rng)?;
            let rot = Complex64::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU));
            let h = ComplexField { depth: big_h.depth, values: big_h.values.iter().map(|&v| rot * v).collect() };
            pre_worst = pre_worst.max(big_h.cone_constant(grid)?);
            let j = match self.dense_j(&h, &big_h) {
                Ok(j) => j,
                Err(Error::DensenessFailure { block, word }) => {
                    dense_failures.push((t, block, word));
                    continue;
                }
                Err(e) => return Err(e),
            };
            let nh = apply_nj(&op, self.params.n, &self.beta(&j)?, &big_h)?;
            ratios.push(l2_ratio(&self.nu, &nh, &big_h));
            let dom = verify_pointwise_domination(&op, &pairs, self.params.n, eb, &h, &nh)?;
            dom_violations += dom.violations;
            dom_excess = dom_excess.max(dom.max_excess);
            dom_lip = dom_lip.max(dom.lip_ratio);
        }
        let mut phase_successes = 0;
        for _ in 0..suite.l2_trials {
            let (h, big_h) = self.random_pair(&mut rng)?;
            let pre = pairs.max_ratio(|i, j, d| (h.values[i] - h.values[j]).norm() / (big_h.values[j] * d));
            pre_worst = pre_worst.max(pre);
            match self.dense_j(&h, &big_h) {
                Ok(j) => {
                    phase_successes += 1;
                    let nh = apply_nj(&op, self.params.n, &self.beta(&j)?, &big_h)?;
                    let dom = verify_pointwise_domination(&op, &pairs, self.params.n, eb, &h, &nh)?;
                    dom_violations += dom.violations;
                    dom_excess = dom_excess.max(dom.max_excess);
                    dom_lip = dom_lip.max(dom.lip_ratio);
                }
                Err(Error::DensenessFailure { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
        let l2 = L2Report {
            ratios: ratios.clone(),
            max_ratio,
            certified_bound: 1.0 - self.params.eps2,
            ok: dense_failures.is_empty() && !ratios.is_empty() && max_ratio < 1.0,
        };
        let dense = DenseReport {
            trials: suite.l2_trials,
            failures: dense_failures,
            random_phase_trials: suite.l2_trials,
            random_phase_successes: phase_successes,
            precondition_worst: pre_worst,
            precondition_bound: eb,
        };
        let domination = DominationReport {
            violations: dom_violations,
            max_excess: dom_excess,
            lip_ratio: dom_lip,
            lip_bound: eb,
            ok: dom_violations == 0 && dom_lip <= eb * (1.0 + 1e-12),
        };
        let phase_gap = self.phase_gap(self.params.q0_certified).map_err(|e| e.to_string());
        let spread = self.phase_spread()?;
        let envelope = self.envelope(suite.envelope_steps)?;
        Ok(DolgopyatReport {
            banner: self.params.banner.clone(),
            a: self.cfg.a,
            b: self.cfg.b,
            depth: self.cfg.depth,
            pressure_root: self.p,
            params: self.params.clone(),
            increment: self.increment.clone(),
            pair: self.pair.clone(),
            branch_identity_error: branch_identity_error(sys, &self.pair, 17)?,
            c_blocks: scheme.c_blocks.len(),
            d_blocks: scheme.d_blocks.len(),
            partition,
            beta: beta_report,
            cone,
            dense,
            l2,
            domination,
            phase_gap,
            phase_spread: SpreadReport { max_spread: spread, bound: 0.125, ok: spread < 0.125 },
            envelope,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub cone_trials: usize,
    pub l2_trials: usize,
    pub envelope_steps: usize,
    pub seed: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig { cone_trials: 50, l2_trials: 20, envelope_steps: 6, seed: 11 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetaReport {
    pub min: f64,
    pub max: f64,
    pub lip: f64,
    pub gamma_lip: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConeReport {
    pub trials: usize,
    pub failures: usize,
    /// Largest cone constant of `N_J H`.
    pub worst: f64,
    pub bound: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DenseReport {
    pub trials: usize,
    /// `(trial, C block, word)` where no dense J was found.
    pub failures: Vec<(usize, usize, Vec<u8>)>,
    /// Pairs `h = H e^{iφ}` with a non-constant random phase; density is not
    /// guaranteed for them at desk constants, so only the count is reported.
    pub random_phase_trials: usize,
    pub random_phase_successes: usize,
    /// Largest measured constant in the hypotheses on `(h, H)`.
    pub precondition_worst: f64,
    pub precondition_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct L2Report {
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    /// `1 − ε2` from the measured constants.
    pub certified_bound: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseGapReport {
    pub q0: usize,
    pub pairs: usize,
    pub violations: usize,
    pub min_gap: f64,
    pub required: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpreadReport {
    pub max_spread: f64,
    pub bound: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeReport {
    /// `∫|L^{Nm} h|² dν`.
    pub h_sq: Vec<f64>,
    /// `∫H_m² dν`.
    pub big_h_sq: Vec<f64>,
    pub rho_hat: f64,
    pub domination_violations: usize,
    /// Step at which no dense `J` existed for the iterated pair; the
    /// envelope stops there.
    pub dense_failure: Option<usize>,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DolgopyatReport {
    pub banner: Option<String>,
    pub a: f64,
    pub b: f64,
    pub depth: usize,
    pub pressure_root: f64,
    pub params: DolgopyatParams,
    pub increment: IncrementReport,
    pub pair: BranchPair,
    pub branch_identity_error: f64,
    pub c_blocks: usize,
    pub d_blocks: usize,
    pub partition: PartitionCheck,
    pub beta: BetaReport,
    pub cone: ConeReport,
    pub dense: DenseReport,
    pub l2: L2Report,
    pub domination: DominationReport,
    /// Error text when the certified-q0 partition is out of reach.
    pub phase_gap: std::result::Result<PhaseGapReport, String>,
    pub phase_spread: SpreadReport,
    pub envelope: EnvelopeReport,
}

impl DolgopyatReport {
    /// The acceptance checks at desk parameters.
    pub fn all_ok(&self) -> bool {
        self.partition.ok && self.beta.ok && self.cone.ok && self.l2.ok && self.domination.ok
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::{golden_mean, uniform_full_shift};

    #[test]
    fn full_shift_pair() {
        let sys = uniform_full_shift(2);
        let p = select_branch_pair(&sys, 3).unwrap();
        assert_eq!(p.word(1, 0), &[0, 0, 0]);
        assert_eq!(p.word(2, 0), &[1, 0, 0]);
        let im = p.images(&sys, 0).unwrap();
        assert_eq!(im[0], (0.0, 0.125));
        assert_eq!(im[1], (0.5, 0.625));
        assert!(branch_identity_error(&sys, &p, 9).unwrap() < 1e-12);
    }

    #[test]
    fn golden_pair_is_admissible_and_disjoint() {
        let sys = golden_mean(0.4, 0.5).unwrap();
        let p = select_branch_pair(&sys, 3).unwrap();
        for c in 0..2u8 {
            for i in 1..=2 {
                let mut w = p.word(i, c).to_vec();
                w.push(c);
                assert!(sys.is_admissible(&w));
            }
            let [a, b] = p.images(&sys, c).unwrap();
            assert!(a.1 <= b.0 || b.1 <= a.0);
        }
        assert!(select_branch_pair(&sys, 1).is_err());
    }

    #[test]
    fn dyadic_partition_example() {
        let sys = uniform_full_shift(2);
        let spec = PartitionSpec { b: 10.0, eps1: 1.0, rho: 0.5, p0: 1, q0: 2, delta_prime: 0.125, depth_limit: 30 };
        let s = build_partition(&sys, spec).unwrap();
        assert_eq!(s.c_blocks.len(), 16);
        assert!(s.c_blocks.iter().all(|c| c.word.len() == 4 && c.diam() == 1.0 / 16.0));
        assert_eq!(s.d_blocks.len(), 64);
        assert!(s.d_blocks.iter().all(|c| c.word.len() == 6));
        let check = check_partition(&sys, &s).unwrap();
        assert!(check.exact && check.ok);
    }

    #[test]
    fn increments_of_lattice_and_quadratic_roofs() {
        let sys = uniform_full_shift(2);
        let p = select_branch_pair(&sys, 6).unwrap();
        let c = temporal_increment_bound(&sys, &p, &FieldSpec::Const(1.0), 64).unwrap();
        assert!(c.degenerate && c.delta_hat == 0.0);
        let aff = temporal_increment_bound(&sys, &p, &FieldSpec::expr("1 + x/2").unwrap(), 64).unwrap();
        assert!(aff.degenerate);
        let q = temporal_increment_bound(&sys, &p, &FieldSpec::expr("1 + x^2/2").unwrap(), 1024).unwrap();
        assert!(!q.degenerate && q.converged);
        // Φ(x) = 1/8 + x/128 for this pair.
        assert!((q.delta_hat - 1.0 / 128.0).abs() < 1e-9);
    }

    #[test]
    fn beta_values() {
        let sys = uniform_full_shift(2);
        let grid = Grid::new(&sys, 12);
        let pair = select_branch_pair(&sys, 3).unwrap();
        let spec = PartitionSpec { b: 10.0, eps1: 1.0, rho: 0.5, p0: 1, q0: 2, delta_prime: 0.125, depth_limit: 30 };
        let s = build_partition(&sys, spec).unwrap();
        let b0 = build_beta(&grid, &pair, &s, &IndexSet::empty(), 0.25).unwrap();
        assert!(b0.values.iter().all(|&v| v == 1.0));
        let one = IndexSet { members: vec![(1, 5)], dense: false };
        let b1 = build_beta(&grid, &pair, &s, &one, 0.25).unwrap();
        let x = x_word(&pair, &s, 1, 5);
        for u in 0..grid.n_states() {
            let expect = if grid.states.word(u).starts_with(&x) { 0.75 } else { 1.0 };
            assert_eq!(b1.values[u], expect);
        }
        let dup = IndexSet { members: vec![(1, 5), (1, 5)], dense: false };
        assert!(matches!(build_beta(&grid, &pair, &s, &dup, 0.25), Err(Error::OverlappingSupports(_))));
    }

    #[test]
    fn degenerate_roof_refused() {
        let k = SystemConstants {
            c0: 1.0,
            gamma: 2.0,
            gamma1: 2.0,
            rho: 0.5,
            p0: 1,
            delta_hat: 0.0,
            t: 1.0,
            a0_ly: 1.0,
            c_pert: 1.0,
            gibbs_c1: 1.0,
            gibbs_c2: 1.0,
            g_sup: 1.0,
            r0: 0.125,
            a_max: 0.1,
            n0: 2,
        };
        assert!(matches!(compute_params(&k, 20.0, &Overrides::default()), Err(Error::DegenerateRoof(_))));
        let k = SystemConstants { delta_hat: 1.0 / 128.0, ..k };
        let p = compute_params(&k, 20.0, &Overrides::default()).unwrap();
        assert!(p.certified && p.banner.is_none());
        assert!(p.n >= k.n0 && 2f64.powi(p.n as i32) >= p.n_bound);
        assert!(p.mu > 0.0 && p.mu <= 0.25);
        assert_eq!(p.q0_certified, 11);
    }

    #[test]
    fn cone_membership_examples() {
        let sys = uniform_full_shift(2);
        let grid = Grid::new(&sys, 8);
        let one = ScalarField::constant(&grid, 1.0);
        assert!(cone_membership(&grid, &one, 0.0).unwrap());
        let e = grid.sample_states(&FieldSpec::expr("exp(x)").unwrap()).unwrap();
        assert!(cone_membership(&grid, &e, 2.0).unwrap());
        let mut ind = one.clone();
        ind.values[0] = 0.0;
        assert!(cone_membership(&grid, &ind, 2.0).is_err());
    }

    #[test]
    fn affine_roof_cohomology_witness() {
        let sys = uniform_full_shift(2);
        let r = cohomology_residual(&sys, &FieldSpec::expr("1 + x/2").unwrap(), &FieldSpec::expr("x/2").unwrap(), 33).unwrap();
        assert!((r[0].0 - 1.0).abs() < 1e-12 && (r[0].1 - 1.0).abs() < 1e-12);
        assert!((r[1].0 - 1.5).abs() < 1e-12 && (r[1].1 - 1.5).abs() < 1e-12);
    }
}
