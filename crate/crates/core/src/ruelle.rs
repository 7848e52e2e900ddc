//! Normalized complex transfer operators `L_ab = L_{f^(a) − ibτ}`, the norm
//! `‖·‖_{Lip,b}`, Lasota-Yorke probes and contraction sweeps over `(a, b)`.

use std::fmt::Write as _;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ComplexField, Grid, Measure, ScalarField};
use crate::thermo::{Suspension, ThermoState, DEFAULT_TOL};

/// `L_ab` on a depth-`d` grid.
#[derive(Debug, Clone)]
pub struct LabOperator<'g> {
    pub grid: &'g Grid,
    pub a: f64,
    pub b: f64,
    weights: Vec<Complex64>,
    moduli: Vec<f64>,
}

impl<'g> LabOperator<'g> {
    pub fn new(susp: &'g Suspension, state: &ThermoState, b: f64) -> Result<Self> {
        if state.depth != susp.depth() {
            return Err(Error::DepthMismatch { expected: susp.depth(), got: state.depth });
        }
        let moduli: Vec<f64> = state.f_a.iter().map(|f| f.exp()).collect();
        let weights = moduli
            .iter()
            .zip(&susp.tau)
            .map(|(&m, &t)| Complex64::from_polar(m, -b * t))
            .collect();
        Ok(LabOperator { grid: &susp.grid, a: state.a, b, weights, moduli })
    }

    fn check(&self, depth: usize) -> Result<()> {
        if depth != self.grid.depth() {
            return Err(Error::DepthMismatch { expected: self.grid.depth(), got: depth });
        }
        Ok(())
    }

    pub fn apply(&self, h: &ComplexField) -> Result<ComplexField> {
        self.check(h.depth)?;
        Ok(ComplexField { depth: h.depth, values: self.grid.apply_complex(&self.weights, &h.values) })
    }

    pub fn apply_n(&self, h: &ComplexField, n: usize) -> Result<ComplexField> {
        self.check(h.depth)?;
        let mut v = h.values.clone();
        for _ in 0..n {
            v = self.grid.apply_complex(&self.weights, &v);
        }
        Ok(ComplexField { depth: h.depth, values: v })
    }

    /// `M_a^n H`.
    pub fn apply_modulus_n(&self, h: &ScalarField, n: usize) -> Result<ScalarField> {
        self.check(h.depth)?;
        let mut v = h.values.clone();
        for _ in 0..n {
            v = self.grid.apply_weights(&self.moduli, &v);
        }
        Ok(ScalarField { depth: h.depth, values: v })
    }

    /// `(∫|L_ab^{Nm} h|² dν)^{1/2}` for `m = 1..=m_max`.
    pub fn iterate_norms(&self, h: &ComplexField, n: usize, m_max: usize, nu: &Measure) -> Result<Vec<f64>> {
        Ok(self.iterate(h, n, m_max, nu, false)?.0)
    }

    /// L² norms and, when `track_lip`, `‖·‖_{Lip,b}` norms of the iterates.
    pub fn iterate(&self, h: &ComplexField, n: usize, m_max: usize, nu: &Measure, track_lip: bool) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check(h.depth)?;
        let mut cur = h.clone();
        let mut l2 = Vec::with_capacity(m_max);
        let mut lip = Vec::new();
        for _ in 0..m_max {
            cur = self.apply_n(&cur, n)?;
            l2.push(nu.integrate_sq_modulus(&cur.values).sqrt());
            if track_lip {
                lip.push(lip_norm_b(self.grid, &cur, self.b)?);
            }
        }
        Ok((l2, lip))
    }

    /// Largest `|L_ab^m h| − M_a^m |h|` over the grid.
    pub fn domination_check(&self, h: &ComplexField, m: usize) -> Result<f64> {
        let l = self.apply_n(h, m)?;
        let mh = self.apply_modulus_n(&h.modulus(), m)?;
        Ok(l.values.iter().zip(&mh.values).fold(f64::NEG_INFINITY, |acc, (x, y)| acc.max(x.norm() - y)))
    }
}

/// `‖h‖₀ + Lip_D(h)/|b|`.
pub fn lip_norm_b(grid: &Grid, h: &ComplexField, b: f64) -> Result<f64> {
    let b = b.abs();
    if b < 1.0 {
        return Err(Error::InvalidArgument(format!("|b| = {b} is below 1")));
    }
    Ok(h.sup_norm() + h.lip_d(grid)? / b)
}

/// The default test functions: the constant 1, a depth-3 indicator and
/// `e^{ix}` at the realized coordinates.
pub fn default_h_family(grid: &Grid) -> Result<Vec<(String, ComplexField)>> {
    let sys = &grid.sys;
    let depth = grid.depth();
    let one = ComplexField::constant(grid, Complex64::new(1.0, 0.0));
    let w3 = sys.admissible_words(3.min(depth));
    let target = &w3[w3.len() / 2];
    let ind = ComplexField {
        depth,
        values: (0..grid.n_states())
            .map(|i| Complex64::new(if grid.states.word(i).starts_with(target) { 1.0 } else { 0.0 }, 0.0))
            .collect(),
    };
    let osc = ComplexField {
        depth,
        values: (0..grid.n_states())
            .map(|i| Ok(Complex64::from_polar(1.0, sys.coordinate(grid.states.word(i))?)))
            .collect::<Result<_>>()?,
    };
    let name: String = target.iter().map(|s| char::from(b'0' + s)).collect();
    Ok(vec![("one".into(), one), (format!("indicator_{name}"), ind), ("exp_ix".into(), osc)])
}

/// Rescales `h` so that `‖h‖_{Lip,b} ≤ 1`.
pub fn rescale_lip_b(grid: &Grid, h: &ComplexField, b: f64) -> Result<ComplexField> {
    let n = lip_norm_b(grid, h, b)?;
    let mut out = h.clone();
    if n > 1.0 {
        out.scale(1.0 / n);
    }
    Ok(out)
}

/// Per-function iterate data in one sweep cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub name: String,
    /// `(∫|L^{Nm}h|²dν)^{1/2}`, `m = 1..=m_max`.
    pub l2: Vec<f64>,
    /// `‖L^{Nm}h‖_{Lip,b}`, `m = 1..=m_max`.
    pub lip_b: Vec<f64>,
    pub rho_hat: f64,
    pub fit_residual: f64,
    pub strictly_decreasing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub a: f64,
    pub b: f64,
    pub trajectories: Vec<Trajectory>,
    /// Worst `ρ̂` over the test functions.
    pub rho_hat: f64,
    /// All test functions decay strictly.
    pub monotone: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub depth: usize,
    pub n: usize,
    pub m_max: usize,
    pub p: f64,
    pub cells: Vec<SweepCell>,
    /// Largest relative change of the first cell's norms when recomputed at
    /// depth `d + 2`.
    pub refinement_error: Option<f64>,
}

/// Slope and RMS residual of the least-squares line through `(m, ln v_m)`
/// over `m ≥ 2` (the first point is treated as transient).
fn log_slope(values: &[f64]) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = values
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, v)| **v > 0.0)
        .map(|(i, v)| ((i + 1) as f64, v.ln()))
        .collect();
    if pts.len() < 2 {
        return (f64::NAN, f64::NAN);
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let rms = (pts.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum::<f64>() / n).sqrt();
    (slope, rms)
}

/// `ρ̂` with `∫|L^{Nm}h|²dν ≈ const·ρ̂^m`, fitted from the L² norms, and the
/// RMS residual of the log fit.
pub fn fit_rho(l2: &[f64]) -> (f64, f64) {
    let (slope, rms) = log_slope(l2);
    ((2.0 * slope).exp(), 2.0 * rms)
}

/// Runs `L_ab^{Nm}` on every test function in every `(a, b)` cell.
pub fn contraction_sweep(
    susp: &Suspension,
    p: f64,
    a_list: &[f64],
    b_list: &[f64],
    n: usize,
    m_max: usize,
    h_family: &[(String, ComplexField)],
) -> Result<SweepResult> {
    if n == 0 || m_max == 0 {
        return Err(Error::InvalidArgument("N and m_max must be positive".into()));
    }
    let states: Vec<ThermoState> = a_list.iter().map(|&a| susp.state(p, a, DEFAULT_TOL)).collect::<Result<_>>()?;
    let nu = susp.state(p, 0.0, DEFAULT_TOL)?.nu.expect("a = 0 carries the Gibbs measure");
    susp.grid.tree()?;
    let jobs: Vec<(usize, f64)> = (0..a_list.len()).flat_map(|i| b_list.iter().map(move |&b| (i, b))).collect();
    let cells = jobs
        .par_iter()
        .map(|&(i, b)| {
            let op = LabOperator::new(susp, &states[i], b)?;
            let mut trajectories = Vec::with_capacity(h_family.len());
            for (name, h) in h_family {
                let h = rescale_lip_b(&susp.grid, h, b.abs().max(1.0))?;
                let (l2, lip_b) = op.iterate(&h, n, m_max, &nu, b.abs() >= 1.0)?;
                let (rho_hat, fit_residual) = fit_rho(&l2);
                let start = nu.integrate_sq_modulus(&h.values).sqrt();
                let strictly_decreasing = std::iter::once(&start).chain(&l2).collect::<Vec<_>>().windows(2).all(|w| w[1] < w[0]);
                trajectories.push(Trajectory { name: name.clone(), l2, lip_b, rho_hat, fit_residual, strictly_decreasing });
            }
            let rho_hat = trajectories.iter().map(|t| t.rho_hat).fold(f64::NEG_INFINITY, f64::max);
            let monotone = trajectories.iter().all(|t| t.strictly_decreasing);
            Ok(SweepCell { a: a_list[i], b, trajectories, rho_hat, monotone })
        })
        .collect::<Result<Vec<_>>>()?;
    let refinement_error = refinement_audit(susp, a_list, b_list, n, m_max, &cells)?;
    Ok(SweepResult { depth: susp.depth(), n, m_max, p, cells, refinement_error })
}

/// Recomputes the first cell at depth `d + 2` with `h ≡ 1`.
fn refinement_audit(
    susp: &Suspension,
    a_list: &[f64],
    b_list: &[f64],
    n: usize,
    m_max: usize,
    cells: &[SweepCell],
) -> Result<Option<f64>> {
    let (Some(&a), Some(&b), Some(cell)) = (a_list.first(), b_list.first(), cells.first()) else {
        return Ok(None);
    };
    let fine = Suspension::new(susp.sys(), susp.f_spec.clone(), susp.tau_spec.clone(), susp.depth() + 2, Some(susp.tau_min))?;
    let pf = fine.pressure_root(1e-12)?;
    let st = fine.state(pf, a, DEFAULT_TOL)?;
    let nu = fine.state(pf, 0.0, DEFAULT_TOL)?.nu.expect("a = 0 carries the Gibbs measure");
    let op = LabOperator::new(&fine, &st, b)?;
    let one = ComplexField::constant(&fine.grid, Complex64::new(1.0, 0.0));
    let fine_l2 = op.iterate_norms(&one, n, m_max, &nu)?;
    let coarse = cell.trajectories.iter().find(|t| t.name == "one").map(|t| &t.l2);
    Ok(coarse.map(|c| {
        c.iter().zip(&fine_l2).fold(0.0f64, |m, (x, y)| m.max((x - y).abs() / x.abs().max(y.abs()).max(f64::MIN_POSITIVE)))
    }))
}

impl SweepResult {
    /// CSV with columns `a,b,m,l2_norm,rho_hat,lip_b_norm,monotone_flag`, one
    /// row per cell and `m`, using the worst test function of the cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("a,b,m,l2_norm,rho_hat,lip_b_norm,monotone_flag\n");
        for c in &self.cells {
            for m in 0..self.m_max {
                let l2 = c.trajectories.iter().map(|t| t.l2[m]).fold(0.0f64, f64::max);
                let lip = c.trajectories.iter().filter_map(|t| t.lip_b.get(m).copied()).fold(f64::NAN, f64::max);
                let _ = writeln!(out, "{},{},{},{:.15e},{:.15},{:.15e},{}", c.a, c.b, m + 1, l2, c.rho_hat, lip, c.monotone);
            }
        }
        out
    }
}

/// Fit of `‖L_ab^{Nm}h‖_{Lip,b} ≤ C ρ^m |b|^ε` over the sweep (`m` counts
/// blocks of `N` steps).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionFit {
    pub c: f64,
    pub rho: f64,
    pub epsilon: f64,
    /// Fitted growth exponent of the envelope constant in `|b|`.
    pub growth_exponent: f64,
    /// `ρ < 1`; otherwise the fit failed (the lattice outcome).
    pub contracting: bool,
    /// Cells that attain `ρ` and `C`.
    pub rho_witness: (f64, f64),
    pub c_witness: (f64, f64),
    pub cells_used: usize,
}

/// `ρ` is the largest per-cell decay factor of the `‖·‖_{Lip,b}` iterates over
/// cells with `|b| ≥ b_min`. With `C_b(ε) = max_m ‖L^{Nm}h‖_{Lip,b}/(ρ^m|b|^ε)`,
/// the growth exponent of `C_b(0)` in `|b|` is the least-squares slope of
/// `ln C_b(0)` against `ln|b|` (clipped at 0); the reported `ε` is the smallest
/// grid value at least that slope (the largest grid value if none is), and
/// `C = max_b C_b(ε)`.
pub fn eventually_contracting_report(sweep: &SweepResult, eps_grid: &[f64], b_min: f64) -> Result<ContractionFit> {
    let cells: Vec<&SweepCell> = sweep.cells.iter().filter(|c| c.b.abs() >= b_min.max(1.0)).collect();
    if cells.is_empty() || eps_grid.is_empty() {
        return Err(Error::InvalidArgument("no sweep cells with |b| at least b_min, or empty epsilon grid".into()));
    }
    let mut rho = 0.0f64;
    let mut rho_witness = (f64::NAN, f64::NAN);
    for c in &cells {
        for t in &c.trajectories {
            let (r, _) = fit_lip(&t.lip_b);
            if r > rho {
                rho = r;
                rho_witness = (c.a, c.b);
            }
        }
    }
    let c_cell = |c: &SweepCell, eps: f64| -> f64 {
        c.trajectories
            .iter()
            .flat_map(|t| t.lip_b.iter().enumerate())
            .map(|(m, v)| v / (rho.powi(m as i32 + 1) * c.b.abs().powf(eps)))
            .fold(0.0f64, f64::max)
    };
    let pts: Vec<(f64, f64)> = cells.iter().map(|c| (c.b.abs().ln(), c_cell(c, 0.0).ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let growth = if sxx > 0.0 { pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx } else { 0.0 };
    let mut grid: Vec<f64> = eps_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let epsilon = grid.iter().copied().find(|&e| e >= growth.max(0.0)).unwrap_or(grid[grid.len() - 1]);
    let (mut c_fit, mut c_witness) = (0.0f64, (f64::NAN, f64::NAN));
    for c in &cells {
        let need = c_cell(c, epsilon);
        if need > c_fit {
            c_fit = need;
            c_witness = (c.a, c.b);
        }
    }
    Ok(ContractionFit {
        c: c_fit,
        rho,
        epsilon,
        growth_exponent: growth,
        contracting: rho < 1.0,
        rho_witness,
        c_witness,
        cells_used: cells.len(),
    })
}

/// Per-block decay factor of `‖L^{Nm}h‖_{Lip,b}`.
fn fit_lip(lip_b: &[f64]) -> (f64, f64) {
    let (slope, rms) = log_slope(lip_b);
    (slope.exp(), rms)
}

/// Measured Lasota-Yorke constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LasotaYorke {
    /// Smallest `A₀` for the cone estimate over all trials.
    pub a0_cone: f64,
    /// Smallest `A₀` for the complex estimate over all trials.
    pub a0_complex: f64,
    pub a0_est: f64,
    pub gamma: f64,
    pub t: f64,
}

/// Random positive `H` with `H ∈ K_B`, built from a random tree-structured
/// logarithm whose D-Lipschitz constant is below `ln(1 + B)`.
pub fn random_cone_function(grid: &Grid, b: f64, rng: &mut impl Rng) -> Result<ScalarField> {
    let tree = grid.tree()?;
    let d = grid.depth();
    let mut incr: Vec<Vec<f64>> = Vec::with_capacity(d);
    for l in 1..=d {
        let ws = tree.level(l);
        incr.push((0..ws.len()).map(|i| rng.gen_range(-1.0..1.0) * tree.diam(l, i)).collect());
    }
    let mut phi = vec![0.0; grid.n_states()];
    for (i, v) in phi.iter_mut().enumerate() {
        let w = grid.states.word(i);
        for l in 1..=d {
            let j = tree.level(l).index_of(&w[..l]).expect("prefix admissible");
            *v += incr[l - 1][j];
        }
    }
    let lip = tree.lip_real(&grid.states, &phi);
    let target = (1.0 + b).ln() * rng.gen_range(0.5..1.0);
    if lip > 0.0 {
        for v in &mut phi {
            *v *= target / lip;
        }
    }
    Ok(ScalarField { depth: d, values: phi.iter().map(|x| x.exp()).collect() })
}

/// Measures the smallest `A₀` satisfying both Lasota-Yorke inequalities on
/// random cone functions `H ∈ K_B`, `B ∈ {1, 10, 100}`, and random complex `h`
/// dominated by `H`, over pairs `u, u'` with a common first symbol and
/// `m = 1..=5`. Uses every such pair up to 2048 states, otherwise sibling
/// representative pairs.
pub fn lasota_yorke_probe(susp: &Suspension, p: f64, a: f64, b: f64, trials: usize, seed: u64) -> Result<LasotaYorke> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    if b.abs() < 1.0 {
        return Err(Error::InvalidArgument(format!("|b| = {} is below 1", b.abs())));
    }
    let grid = &susp.grid;
    let gamma = grid.sys.require_realization()?.constants.gamma;
    let t = susp.t_constant(p, &[a])?.t;
    let state = susp.state(p, a, DEFAULT_TOL)?;
    let op = LabOperator::new(susp, &state, b)?;
    let pairs = PairSet::new(grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut a0_cone, mut a0_complex) = (0.0f64, 0.0f64);
    for _ in 0..trials {
        for &bb in &[1.0, 10.0, 100.0] {
            let h_cone = random_cone_function(grid, bb, &mut rng)?;
            let b_meas = h_cone.cone_constant(grid)?;
            let phase: Vec<f64> = random_cone_function(grid, bb, &mut rng)?.values.iter().map(|v| v.ln()).collect();
            let h = ComplexField {
                depth: grid.depth(),
                values: h_cone
                    .values
                    .iter()
                    .zip(&phase)
                    .map(|(&hv, &ph)| Complex64::from_polar(hv * rng.gen_range(0.5..1.0), ph))
                    .collect(),
            };
            let b_h = pairs.max_ratio(|i, j, dd| (h.values[i] - h.values[j]).norm() / (h_cone.values[j] * dd));
            let mut mh = h_cone.clone();
            let mut mabs = h.modulus();
            let mut lh = h.clone();
            for m in 1..=5 {
                mh = op.apply_modulus_n(&mh, 1)?;
                mabs = op.apply_modulus_n(&mabs, 1)?;
                lh = op.apply(&lh)?;
                let denom_a = b_meas / gamma.powi(m) + t / (gamma - 1.0);
                let ra = pairs.max_ratio(|i, j, dd| (mh.values[i] - mh.values[j]).abs() / (mh.values[j] * dd));
                a0_cone = a0_cone.max(ra / denom_a);
                let rb = pairs.max_ratio(|i, j, dd| {
                    let rhs = b_h / gamma.powi(m) * mh.values[j] + b.abs() * mabs.values[j];
                    (lh.values[i] - lh.values[j]).norm() / (rhs * dd)
                });
                a0_complex = a0_complex.max(rb);
            }
        }
    }
    Ok(LasotaYorke { a0_cone, a0_complex, a0_est: a0_cone.max(a0_complex), gamma, t })
}

/// Pairs of states with a common first symbol, with their D-distance.
pub struct PairSet {
    pairs: Vec<(u32, u32, f64)>,
}

impl PairSet {
    pub fn new(grid: &Grid) -> Result<Self> {
        let tree = grid.tree()?;
        let sys = &grid.sys;
        let states = &grid.states;
        let mut pairs = Vec::new();
        let exhaustive = grid.n_states() <= 2048;
        for l in 1..grid.depth() {
            let ws = tree.level(l);
            for p in 0..ws.len() {
                let parent = ws.word(p);
                let dd = tree.diam(l, p);
                let ranges: Vec<std::ops::Range<usize>> = sys
                    .successors(*parent.last().unwrap())
                    .iter()
                    .map(|&s| {
                        let mut c = parent.to_vec();
                        c.push(s);
                        states.prefix_range(&c)
                    })
                    .collect();
                for x in 0..ranges.len() {
                    for y in 0..ranges.len() {
                        if x == y {
                            continue;
                        }
                        if exhaustive {
                            for i in ranges[x].clone() {
                                for j in ranges[y].clone() {
                                    pairs.push((i as u32, j as u32, dd));
                                }
                            }
                        } else {
                            pairs.push((ranges[x].start as u32, ranges[y].start as u32, dd));
                        }
                    }
                }
            }
        }
        Ok(PairSet { pairs })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Largest `f(i, j, D(u_i, u_j))` over ordered pairs.
    pub fn max_ratio(&self, f: impl Fn(usize, usize, f64) -> f64 + Sync) -> f64 {
        self.pairs
            .par_iter()
            .map(|&(i, j, d)| f(i as usize, j as usize, d))
            .reduce(|| 0.0f64, f64::max)
    }
}

/// Random complex field with entries in the unit disc.
pub fn random_complex(grid: &Grid, rng: &mut impl Rng) -> ComplexField {
    ComplexField {
        depth: grid.depth(),
        values: (0..grid.n_states())
            .map(|_| Complex64::from_polar(rng.gen_range(0.0..1.0), rng.gen_range(0.0..std::f64::consts::TAU)))
            .collect(),
    }
}
