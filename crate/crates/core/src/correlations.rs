//! Correlation functions of the suspension flow under the Gibbs measure,
//! estimated along long sampled orbits, and exponential-decay fits.

use num_complex::Complex64;
use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::field::FieldSpec;
use crate::symbolic::{SymbolicSystem, WordSpace};
use crate::thermo::{Suspension, ThermoState};

/// Sampling step as a fraction of the smallest roof value.
pub const STEP_FRACTION: f64 = 0.1;
/// Batches used for the batch-means standard error.
pub const BATCHES: usize = 20;
/// A fit point must exceed this many standard errors.
pub const NOISE_SIGMAS: f64 = 3.0;
/// Longest lag allowed, as a fraction of the total flow time.
pub const MAX_LAG_FRACTION: f64 = 0.01;
/// Symbols generated past the last orbit point, so its coordinate is resolved.
const PAD: usize = 64;
/// Fit window used for the quadratic-roof decay check.
pub const DECAY_WINDOW: (f64, f64) = (2.0, 12.0);
const BLOCK: usize = 1 << 16;

/// Depth-`d` Markov chain whose stationary law is the Gibbs measure on
/// depth-`d` cylinders.
#[derive(Debug, Clone)]
pub struct MarkovApprox {
    pub depth: usize,
    pub sys: SymbolicSystem,
    pub tau: FieldSpec,
    pub states: WordSpace,
    pub stationary: Vec<f64>,
    /// For each state, `(next state, appended symbol, probability)`.
    pub transitions: Vec<Vec<(u32, u8, f64)>>,
    /// Largest `|Σ_j P(i, j) − 1|` before renormalizing rows.
    pub row_defect: f64,
    pub tau_min: f64,
    pub tau_max: f64,
}

/// Successor kernel `P(w, w') = e^{f^(0)(wt)} ν(w') / ν(w)` with `w' = σ(wt)`.
pub fn markov_approximation(susp: &Suspension, state: &ThermoState) -> Result<MarkovApprox> {
    if state.a != 0.0 {
        return Err(Error::InvalidArgument(format!("Markov approximation needs a = 0, got {}", state.a)));
    }
    if state.depth != susp.depth() {
        return Err(Error::DepthMismatch { expected: susp.depth(), got: state.depth });
    }
    let grid = &susp.grid;
    let nu = state.nu.as_ref().expect("a = 0 carries the Gibbs measure");
    let total: f64 = nu.weights.iter().sum();
    let stationary: Vec<f64> = nu.weights.iter().map(|w| w / total).collect();
    let d = grid.depth();
    let mut row_defect = 0.0f64;
    let transitions = (0..grid.n_states())
        .map(|c| {
            let mut out: Vec<(u32, u8, f64)> = grid
                .col_edges(c)
                .map(|e| {
                    let r = grid.edge_row(e);
                    let p = state.f_a[e].exp() * stationary[r] / stationary[c];
                    (r as u32, grid.edges.word(e)[d], p)
                })
                .collect();
            let s: f64 = out.iter().map(|t| t.2).sum();
            row_defect = row_defect.max((s - 1.0).abs());
            for t in &mut out {
                t.2 /= s;
            }
            out
        })
        .collect();
    Ok(MarkovApprox {
        depth: d,
        sys: grid.sys.clone(),
        tau: susp.tau_spec.clone(),
        states: grid.states.clone(),
        stationary,
        transitions,
        row_defect,
        tau_min: susp.tau_min,
        tau_max: susp.tau_max(),
    })
}

impl MarkovApprox {
    /// Solves the pressure root of `f` against `τ` at `depth` and builds the chain.
    pub fn gibbs(sys: &SymbolicSystem, f: &FieldSpec, tau: &FieldSpec, depth: usize) -> Result<Self> {
        let susp = Suspension::new(sys, f.clone(), tau.clone(), depth, None)?;
        let p = susp.pressure_root(1e-12)?;
        markov_approximation(&susp, &susp.state(p, 0.0, 1e-13)?)
    }

    /// `max_w |(πP)(w) − π(w)|`.
    pub fn stationarity_error(&self) -> f64 {
        let mut next = vec![0.0; self.stationary.len()];
        for (i, row) in self.transitions.iter().enumerate() {
            for &(j, _, p) in row {
                next[j as usize] += self.stationary[i] * p;
            }
        }
        next.iter().zip(&self.stationary).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// A stationary orbit segment of the base and its flow clock.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitSample {
    pub seed: u64,
    /// `x_k` starts with `symbols[k..]`.
    pub symbols: Vec<u8>,
    /// Realized coordinates of `x_k` (empty without a geometric realization).
    pub coords: Vec<f64>,
    /// `times[k] = τ(x_0) + … + τ(x_{k−1})`, so `times.len() = symbols.len() + 1`.
    pub times: Vec<f64>,
    pub tau_min: f64,
}

impl OrbitSample {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn flow_time(&self) -> f64 {
        *self.times.last().unwrap()
    }
}

/// Draws `len` consecutive points of a stationary orbit of the chain.
pub fn sample_orbit(approx: &MarkovApprox, len: usize, seed: u64) -> OrbitSample {
    let len = len.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = WeightedIndex::new(&approx.stationary).expect("stationary vector is a probability vector");
    let steps: Vec<(Vec<(u32, u8)>, WeightedIndex<f64>)> = approx
        .transitions
        .iter()
        .map(|row| {
            let dist = WeightedIndex::new(row.iter().map(|t| t.2)).expect("transition rows are probability vectors");
            (row.iter().map(|t| (t.0, t.1)).collect(), dist)
        })
        .collect();
    let pad = PAD.max(approx.tau.local_depth().unwrap_or(1));
    let total = len + pad;
    let mut state = start.sample(&mut rng);
    let mut symbols = approx.states.word(state).to_vec();
    symbols.reserve(total.saturating_sub(symbols.len()));
    while symbols.len() < total {
        let (targets, dist) = &steps[state];
        let (next, sym) = targets[dist.sample(&mut rng)];
        symbols.push(sym);
        state = next as usize;
    }
    let sys = &approx.sys;
    let coords = match sys.realization() {
        Some(r) => {
            let mut x = sys.coordinate(&symbols[len..]).expect("realized system");
            let mut out = vec![0.0; len];
            for k in (0..len).rev() {
                x = r.branches[symbols[k] as usize].apply(x);
                out[k] = x;
            }
            out
        }
        None => Vec::new(),
    };
    let increments: Vec<f64> = match &approx.tau {
        FieldSpec::Const(c) => vec![*c; len],
        FieldSpec::Expr(e) => coords.iter().map(|&x| e.eval(x)).collect(),
        FieldSpec::Table { depth, values } => {
            let table = WordSpace::new(sys, *depth);
            (0..len)
                .map(|k| values[table.index_of(&symbols[k..k + depth]).expect("admissible orbit word")])
                .collect()
        }
    };
    let mut times = Vec::with_capacity(len + 1);
    let mut t = 0.0;
    times.push(t);
    for v in &increments {
        t += v;
        times.push(t);
    }
    symbols.truncate(len);
    let seen = increments.iter().cloned().fold(f64::INFINITY, f64::min);
    OrbitSample { seed, symbols, coords, times, tau_min: seen.min(approx.tau_min) }
}

/// An observable `A(x, h)` of the realized coordinate and the flow height,
/// optionally complex-valued.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    pub re: Expression,
    pub im: Option<Expression>,
}

impl Observable {
    pub fn real(source: &str) -> Result<Self> {
        Ok(Observable { re: Expression::parse(source)?, im: None })
    }

    pub fn complex(re: &str, im: &str) -> Result<Self> {
        Ok(Observable { re: Expression::parse(re)?, im: Some(Expression::parse(im)?) })
    }

    #[inline]
    pub fn eval(&self, x: f64, h: f64) -> Complex64 {
        Complex64::new(self.re.eval2(x, h), self.im.as_ref().map_or(0.0, |e| e.eval2(x, h)))
    }

    /// `sup|A| + Lip(A)` over `[0, 1] × [0, h_max]`, by finite differences on
    /// a 65 × 65 grid.
    pub fn lipschitz_norm(&self, h_max: f64) -> f64 {
        let n = 64;
        let (dx, dh) = (1.0 / n as f64, h_max / n as f64);
        let v = |i: usize, j: usize| self.eval(i as f64 * dx, j as f64 * dh);
        let (mut sup, mut lip) = (0.0f64, 0.0f64);
        for i in 0..=n {
            for j in 0..=n {
                let a = v(i, j);
                sup = sup.max(a.norm());
                if i < n {
                    lip = lip.max((v(i + 1, j) - a).norm() / dx);
                }
                if j < n && dh > 0.0 {
                    lip = lip.max((v(i, j + 1) - a).norm() / dh);
                }
            }
        }
        sup + lip
    }
}

/// Exponential fit `|C(t)| ≈ C_amp e^{−c t}` on a window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub c_amp: f64,
    pub c_rate: f64,
    pub r2: f64,
    pub window: (f64, f64),
    pub points: usize,
    /// `c_rate > 0` and `r² ≥ 0.9`.
    pub passes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationCurve {
    /// Lags actually used: multiples of `step`.
    pub t: Vec<f64>,
    /// `(Re, Im)` of `C(t)`.
    pub c: Vec<(f64, f64)>,
    /// Batch-means standard error of `C(t)` (modulus of the complex error).
    pub stderr: Vec<f64>,
    /// Number of flow-time samples.
    pub samples: usize,
    pub orbit_length: usize,
    pub flow_time: f64,
    pub step: f64,
    pub seed: u64,
    /// `sup|A| + Lip(A)` and the same for `B`.
    pub norm_a: f64,
    pub norm_b: f64,
    pub fit: Option<DecayFit>,
}

impl CorrelationCurve {
    pub fn modulus(&self) -> Vec<f64> {
        self.c.iter().map(|&(re, im)| re.hypot(im)).collect()
    }

    /// Columns `t, C(t), stderr` (`C` as real and imaginary parts).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,c_re,c_im,abs_c,stderr\n");
        for i in 0..self.t.len() {
            let (re, im) = self.c[i];
            out.push_str(&format!("{},{},{},{},{}\n", self.t[i], re, im, re.hypot(im), self.stderr[i]));
        }
        out
    }
}

#[derive(Default, Clone)]
struct BlockSums {
    sum_a: Complex64,
    sum_b: Complex64,
    prod: Vec<Complex64>,
    count: Vec<usize>,
}

/// `C(t) = ∫ A · B∘φ_t − ∫A ∫B` estimated from flow-time samples at step
/// `τ_min/10` along the orbit: the lag-`k` products are averaged over all
/// sample pairs `(m, m + k)` inside the orbit, the means over all samples.
pub fn suspension_correlation(
    sample: &OrbitSample,
    a: &Observable,
    b: &Observable,
    t_grid: &[f64],
) -> Result<CorrelationCurve> {
    if sample.coords.is_empty() {
        return Err(Error::NoRealization);
    }
    if t_grid.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::InvalidArgument("lags must be non-negative".into()));
    }
    let total = sample.flow_time();
    let t_max = t_grid.iter().cloned().fold(0.0, f64::max);
    if t_max > MAX_LAG_FRACTION * total {
        return Err(Error::InsufficientSample { t_max, total });
    }
    let step = STEP_FRACTION * sample.tau_min;
    let m_total = (total / step).ceil() as usize;
    let m_total = if (m_total as f64) * step >= total { m_total } else { m_total + 1 };
    let lags: Vec<usize> = t_grid.iter().map(|t| (t / step).round() as usize).collect();
    let k_max = lags.iter().cloned().max().unwrap_or(0);
    let n_blocks = BATCHES.max(m_total.div_ceil(BLOCK)).min(m_total);
    let block = m_total.div_ceil(n_blocks);
    let n_blocks = m_total.div_ceil(block);

    let eval_range = |lo: usize, hi: usize, obs: &Observable| -> Vec<Complex64> {
        let mut k = sample.times.partition_point(|&t| t <= lo as f64 * step).saturating_sub(1);
        (lo..hi)
            .map(|m| {
                let s = m as f64 * step;
                while sample.times[k + 1] <= s {
                    k += 1;
                }
                obs.eval(sample.coords[k], s - sample.times[k])
            })
            .collect()
    };
    let blocks: Vec<BlockSums> = (0..n_blocks)
        .into_par_iter()
        .map(|i| {
            let lo = i * block;
            let hi = ((i + 1) * block).min(m_total);
            let av = eval_range(lo, hi, a);
            let bv = eval_range(lo, (hi + k_max).min(m_total), b);
            let mut out = BlockSums {
                sum_a: av.iter().sum(),
                sum_b: bv[..hi - lo].iter().sum(),
                prod: vec![Complex64::new(0.0, 0.0); lags.len()],
                count: vec![0; lags.len()],
            };
            for (j, &k) in lags.iter().enumerate() {
                let end = (hi - lo).min(bv.len().saturating_sub(k));
                out.prod[j] = av[..end].iter().zip(&bv[k..k + end]).map(|(x, y)| x * y).sum();
                out.count[j] = end;
            }
            out
        })
        .collect();

    let n = m_total as f64;
    let mean_a: Complex64 = blocks.iter().map(|b| b.sum_a).sum::<Complex64>() / n;
    let mean_b: Complex64 = blocks.iter().map(|b| b.sum_b).sum::<Complex64>() / n;
    let centre = mean_a * mean_b;
    let batches = BATCHES.min(n_blocks);
    let mut c = Vec::with_capacity(lags.len());
    let mut stderr = Vec::with_capacity(lags.len());
    for j in 0..lags.len() {
        let prod: Complex64 = blocks.iter().map(|b| b.prod[j]).sum();
        let count: usize = blocks.iter().map(|b| b.count[j]).sum();
        if count == 0 {
            return Err(Error::InsufficientSample { t_max, total });
        }
        let est = prod / count as f64 - centre;
        let mut per_batch = vec![(Complex64::new(0.0, 0.0), 0usize); batches];
        for (i, bl) in blocks.iter().enumerate() {
            let slot = &mut per_batch[i * batches / n_blocks];
            slot.0 += bl.prod[j];
            slot.1 += bl.count[j];
        }
        let vals: Vec<Complex64> =
            per_batch.iter().filter(|p| p.1 > 0).map(|p| p.0 / p.1 as f64 - centre).collect();
        let se = if vals.len() > 1 {
            let mean: Complex64 = vals.iter().sum::<Complex64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / (vals.len() - 1) as f64;
            (var / vals.len() as f64).sqrt()
        } else {
            f64::INFINITY
        };
        c.push((est.re, est.im));
        stderr.push(se);
    }
    let h_max = sample.times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    Ok(CorrelationCurve {
        t: lags.iter().map(|&k| k as f64 * step).collect(),
        c,
        stderr,
        samples: m_total,
        orbit_length: sample.len(),
        flow_time: total,
        step,
        seed: sample.seed,
        norm_a: a.lipschitz_norm(h_max),
        norm_b: b.lipschitz_norm(h_max),
        fit: None,
    })
}

/// Least squares of `ln|C(t)|` against `t` over the lags in `window`.
pub fn fit_decay_rate(curve: &CorrelationCurve, window: (f64, f64)) -> Result<DecayFit> {
    let modulus = curve.modulus();
    let pts: Vec<(f64, f64)> = (0..curve.t.len())
        .filter(|&i| curve.t[i] >= window.0 - 1e-12 && curve.t[i] <= window.1 + 1e-12)
        .map(|i| {
            if modulus[i] > NOISE_SIGMAS * curve.stderr[i] && modulus[i] > 0.0 {
                Ok((curve.t[i], modulus[i].ln()))
            } else {
                Err(Error::BelowNoiseFloor)
            }
        })
        .collect::<Result<_>>()?;
    if pts.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "window [{}, {}] holds {} lags, need at least 3",
            window.0,
            window.1,
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sty: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sty / stt;
    // A flat curve has nothing for the trend to explain.
    let r2 = if syy <= 1e-24 * n { 0.0 } else { (sty * sty / (stt * syy)).min(1.0) };
    let c_rate = -slope;
    Ok(DecayFit {
        c_amp: (my - slope * mt).exp(),
        c_rate,
        r2,
        window,
        points: pts.len(),
        passes: c_rate > 0.0 && r2 >= 0.9,
    })
}

/// Lags `0, 0.5, …, 16`.
pub fn default_lag_grid() -> Vec<f64> {
    (0..=32).map(|i| i as f64 * 0.5).collect()
}

/// One correlation curve per seed, each fitted on `window`.
pub fn correlation_replicas(
    approx: &MarkovApprox,
    len: usize,
    seeds: &[u64],
    a: &Observable,
    b: &Observable,
    t_grid: &[f64],
    window: (f64, f64),
) -> Result<Vec<(CorrelationCurve, Result<DecayFit>)>> {
    seeds
        .iter()
        .map(|&seed| {
            let sample = sample_orbit(approx, len, seed);
            let mut curve = suspension_correlation(&sample, a, b, t_grid)?;
            let fit = fit_decay_rate(&curve, window);
            curve.fit = fit.as_ref().ok().copied();
            Ok((curve, fit))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::{golden_mean, uniform_full_shift};

    fn fair_coin(depth: usize, tau: FieldSpec) -> MarkovApprox {
        MarkovApprox::gibbs(&uniform_full_shift(2), &FieldSpec::zero(), &tau, depth).unwrap()
    }

    #[test]
    fn fair_coin_kernel() {
        let m = fair_coin(3, FieldSpec::Const(1.0));
        for row in &m.transitions {
            assert_eq!(row.len(), 2);
            for t in row {
                assert!((t.2 - 0.5).abs() < 1e-12);
            }
        }
        assert!(m.stationary.iter().all(|p| (p - 0.125).abs() < 1e-12));
    }

    #[test]
    fn bernoulli_kernel_weights() {
        let f = FieldSpec::Table { depth: 1, values: vec![(1.0f64 / 3.0).ln(), (2.0f64 / 3.0).ln()] };
        let m = MarkovApprox::gibbs(&uniform_full_shift(2), &f, &FieldSpec::Const(1.0), 2).unwrap();
        for (i, row) in m.transitions.iter().enumerate() {
            for &(_, sym, p) in row {
                let want = if sym == 0 { 1.0 / 3.0 } else { 2.0 / 3.0 };
                assert!((p - want).abs() < 1e-10, "state {i} symbol {sym}: {p}");
            }
        }
    }

    #[test]
    fn golden_mean_parry_kernel() {
        let sys = golden_mean(0.5, 0.5).unwrap();
        let m = MarkovApprox::gibbs(&sys, &FieldSpec::zero(), &FieldSpec::Const(1.0), 4).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        // Parry chain: after 0 the next symbol is 0 with probability 1/φ.
        for (i, row) in m.transitions.iter().enumerate() {
            if *m.states.word(i).last().unwrap() == 0 {
                let p0 = row.iter().find(|t| t.1 == 0).unwrap().2;
                assert!((p0 - 1.0 / phi).abs() < 1e-10);
            } else {
                assert_eq!(row.len(), 1);
            }
        }
        assert!(m.stationarity_error() < 1e-10);
        // Parry measure of the cylinder [0] is φ²/(1 + φ²).
        let nu0: f64 = (0..m.states.len()).filter(|&i| m.states.word(i)[0] == 0).map(|i| m.stationary[i]).sum();
        assert!((nu0 - phi * phi / (1.0 + phi * phi)).abs() < 1e-10);
    }

    #[test]
    fn single_point_orbit() {
        let m = fair_coin(2, FieldSpec::expr("1 + x^2/2").unwrap());
        let s = sample_orbit(&m, 1, 3);
        assert_eq!(s.symbols.len(), 1);
        assert_eq!(s.times.len(), 2);
        assert!((s.times[1] - (1.0 + s.coords[0].powi(2) / 2.0)).abs() < 1e-15);
    }

    #[test]
    fn coordinates_follow_symbols() {
        let m = fair_coin(3, FieldSpec::Const(1.0));
        let s = sample_orbit(&m, 200, 5);
        for k in 0..199 {
            let half = if s.symbols[k] == 0 { 0.0 } else { 0.5 };
            assert!((s.coords[k] - (half + s.coords[k + 1] / 2.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn constant_observables_are_uncorrelated() {
        let m = fair_coin(3, FieldSpec::expr("1 + x^2/2").unwrap());
        let s = sample_orbit(&m, 5000, 1);
        let a = Observable::real("2.5").unwrap();
        let c = suspension_correlation(&s, &a, &a, &[0.0, 1.0, 3.0]).unwrap();
        assert!(c.modulus().iter().all(|v| *v < 1e-12));
    }

    #[test]
    fn long_lags_need_long_orbits() {
        let m = fair_coin(3, FieldSpec::Const(1.0));
        let s = sample_orbit(&m, 100, 1);
        let a = Observable::real("x").unwrap();
        assert!(matches!(suspension_correlation(&s, &a, &a, &[0.0, 2.0]), Err(Error::InsufficientSample { .. })));
    }

    #[test]
    fn synthetic_exponential_fit() {
        let t: Vec<f64> = (0..30).map(|i| i as f64 * 0.5).collect();
        let curve = CorrelationCurve {
            c: t.iter().map(|t| (0.5 * (-0.3 * t).exp(), 0.0)).collect(),
            stderr: vec![0.0; t.len()],
            t,
            samples: 0,
            orbit_length: 0,
            flow_time: 0.0,
            step: 0.5,
            seed: 0,
            norm_a: 0.0,
            norm_b: 0.0,
            fit: None,
        };
        let fit = fit_decay_rate(&curve, (1.0, 10.0)).unwrap();
        assert!((fit.c_rate - 0.3).abs() < 1e-6);
        assert!((fit.c_amp - 0.5).abs() < 1e-6);
        assert!(fit.r2 > 0.9999 && fit.passes);
    }

    #[test]
    fn noise_floor_is_enforced() {
        let t = vec![0.0, 1.0, 2.0, 3.0];
        let curve = CorrelationCurve {
            c: vec![(1.0, 0.0), (0.1, 0.0), (0.01, 0.0), (0.001, 0.0)],
            stderr: vec![0.001; 4],
            t,
            samples: 0,
            orbit_length: 0,
            flow_time: 0.0,
            step: 1.0,
            seed: 0,
            norm_a: 0.0,
            norm_b: 0.0,
            fit: None,
        };
        assert_eq!(fit_decay_rate(&curve, (0.0, 3.0)), Err(Error::BelowNoiseFloor));
        assert!(fit_decay_rate(&curve, (0.0, 2.0)).unwrap().c_rate > 0.0);
    }
}
