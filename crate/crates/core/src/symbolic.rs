//! Subshifts of finite type with interval realizations.
//!
//! Words are counted in symbols: a word of `n` symbols spans a cylinder of
//! length `n - 1` in the classical indexing. Inverse branches compose with the
//! first symbol outermost, so the cylinder of `w0 w1 .. w(n-1)` is
//! `g_{w0} ∘ g_{w1} ∘ .. ∘ g_{w(n-1)}([0, 1])` and shifting a cylinder gives the
//! cylinder of its tail.
//!
//! | API (symbols `n`) | classical length `m` |
//! |-------------------|----------------------|
//! | `n`               | `n - 1`              |
//! | co-length `q`     | co-length `q`        |

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expression;

/// Sequences in the realized coordinate agree once they share this many symbols
/// past both prefixes; used to decide equality of representatives.
const EQUALITY_HORIZON: usize = 96;

/// Inverse branch `[0, 1] -> [0, 1]` attached to one symbol.
#[derive(Debug, Clone, PartialEq)]
pub enum Branch {
    /// `x ↦ a·x + b`.
    Affine { a: f64, b: f64 },
    /// Nonlinear branch with declared derivative bounds.
    Expr { map: Expression, deriv_min: f64, deriv_max: f64 },
}

impl Branch {
    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        match self {
            Branch::Affine { a, b } => a * x + b,
            Branch::Expr { map, .. } => map.eval(x),
        }
    }

    pub fn slope_bounds(&self) -> (f64, f64) {
        match self {
            Branch::Affine { a, .. } => (*a, *a),
            Branch::Expr { deriv_min, deriv_max, .. } => (*deriv_min, *deriv_max),
        }
    }

    pub fn is_affine(&self) -> bool {
        matches!(self, Branch::Affine { .. })
    }

    fn validate(&self, symbol: usize) -> Result<()> {
        let bad = |reason: String| Error::InvalidBranch { symbol, reason };
        let (lo, hi) = self.slope_bounds();
        if !(lo > 0.0 && lo <= hi && hi < 1.0) {
            return Err(bad(format!("derivative bounds [{lo}, {hi}] must satisfy 0 < lo <= hi < 1")));
        }
        let (g0, g1) = (self.apply(0.0), self.apply(1.0));
        if !(g0 >= -1e-12 && g1 <= 1.0 + 1e-12 && g0 < g1) {
            return Err(bad(format!("image [{g0}, {g1}] is not an increasing subinterval of [0, 1]")));
        }
        if let Branch::Expr { .. } = self {
            let steps = 1024;
            let h = 1.0 / steps as f64;
            let slack = 1e-6;
            for i in 0..steps {
                let x = i as f64 * h;
                let slope = (self.apply(x + h) - self.apply(x)) / h;
                if !(slope >= lo * (1.0 - slack) && slope <= hi * (1.0 + slack)) {
                    return Err(bad(format!("slope {slope} at x = {x} outside [{lo}, {hi}]")));
                }
            }
        }
        Ok(())
    }
}

/// Two-sided expansion constants `c0 γ^m d <= d(σ^m ·) <= γ1^m d / c0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpansionConstants {
    pub c0: f64,
    pub gamma: f64,
    pub gamma1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub branches: Vec<Branch>,
    pub constants: ExpansionConstants,
    /// Realized coordinate of the smallest-successor continuation from each symbol.
    anchors: Vec<f64>,
}

impl Realization {
    pub fn all_affine(&self) -> bool {
        self.branches.iter().all(Branch::is_affine)
    }
}

/// Branches plus optional declared constants, before validation.
#[derive(Debug, Clone, Default)]
pub struct RealizationSpec {
    pub branches: Vec<Branch>,
    pub constants: Option<ExpansionConstants>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolicSystem {
    k: usize,
    matrix: Vec<Vec<u8>>,
    m0: usize,
    successors: Vec<Vec<u8>>,
    realization: Option<Realization>,
}

impl SymbolicSystem {
    pub fn build(k: usize, matrix: Vec<Vec<u8>>, realization: Option<RealizationSpec>) -> Result<Self> {
        if k == 0 || k > 255 {
            return Err(Error::BadMatrix { k, reason: "alphabet size must be in 1..=255".into() });
        }
        if matrix.len() != k || matrix.iter().any(|r| r.len() != k) {
            return Err(Error::BadMatrix { k, reason: "wrong shape".into() });
        }
        if matrix.iter().flatten().any(|&v| v > 1) {
            return Err(Error::BadMatrix { k, reason: "entries must be 0 or 1".into() });
        }
        for i in 0..k {
            if matrix[i].iter().all(|&v| v == 0) {
                return Err(Error::EmptyRowOrColumn { kind: "row", index: i });
            }
            if (0..k).all(|r| matrix[r][i] == 0) {
                return Err(Error::EmptyRowOrColumn { kind: "column", index: i });
            }
        }
        let m0 = primitivity_exponent(&matrix).ok_or(Error::NotAperiodic(k * k))?;
        let successors: Vec<Vec<u8>> = (0..k)
            .map(|i| (0..k).filter(|&j| matrix[i][j] == 1).map(|j| j as u8).collect())
            .collect();
        let mut system = SymbolicSystem { k, matrix, m0, successors, realization: None };
        if let Some(spec) = realization {
            system.realization = Some(system.validate_realization(spec)?);
        }
        Ok(system)
    }

    fn validate_realization(&self, spec: RealizationSpec) -> Result<Realization> {
        if spec.branches.len() != self.k {
            return Err(Error::InvalidBranch {
                symbol: spec.branches.len().min(self.k),
                reason: format!("expected {} branches, got {}", self.k, spec.branches.len()),
            });
        }
        for (s, b) in spec.branches.iter().enumerate() {
            b.validate(s)?;
        }
        for i in 0..self.k {
            let succ = &self.successors[i];
            for (x, &a) in succ.iter().enumerate() {
                for &b in &succ[x + 1..] {
                    let (ba, bb) = (&spec.branches[a as usize], &spec.branches[b as usize]);
                    let (a0, a1) = (ba.apply(0.0), ba.apply(1.0));
                    let (b0, b1) = (bb.apply(0.0), bb.apply(1.0));
                    if a0.max(b0) < a1.min(b1) - 1e-12 {
                        return Err(Error::RealizationOverlap { symbol: i, a: a as usize, b: b as usize });
                    }
                }
            }
        }
        let anchors = continuation_anchors(&spec.branches, &self.successors);
        let mut realization = Realization {
            branches: spec.branches,
            constants: ExpansionConstants { c0: 1.0, gamma: 2.0, gamma1: 2.0 },
            anchors,
        };
        let measured = measure_expansion(self, &realization);
        if let Some(declared) = spec.constants {
            if declared.c0 > measured.c0 * (1.0 + 1e-9)
                || declared.gamma > measured.gamma * (1.0 + 1e-9)
                || declared.gamma1 < measured.gamma1 * (1.0 - 1e-9)
            {
                return Err(Error::InvalidBranch {
                    symbol: 0,
                    reason: format!("declared constants {declared:?} violate measured bounds {measured:?}"),
                });
            }
            realization.constants = declared;
        } else {
            realization.constants = measured;
        }
        Ok(realization)
    }

    pub fn alphabet_size(&self) -> usize {
        self.k
    }

    pub fn matrix(&self) -> &[Vec<u8>] {
        &self.matrix
    }

    /// Smallest `M0` with all entries of `A^M0` positive.
    pub fn m0(&self) -> usize {
        self.m0
    }

    pub fn successors(&self, symbol: u8) -> &[u8] {
        &self.successors[symbol as usize]
    }

    #[inline]
    pub fn allowed(&self, a: u8, b: u8) -> bool {
        self.matrix[a as usize][b as usize] == 1
    }

    pub fn realization(&self) -> Option<&Realization> {
        self.realization.as_ref()
    }

    pub fn require_realization(&self) -> Result<&Realization> {
        self.realization.as_ref().ok_or(Error::NoRealization)
    }

    pub fn is_admissible(&self, word: &[u8]) -> bool {
        word.iter().all(|&s| (s as usize) < self.k) && word.windows(2).all(|w| self.allowed(w[0], w[1]))
    }

    /// All admissible words of `n` symbols in lexicographic order.
    pub fn admissible_words(&self, n: usize) -> Vec<Vec<u8>> {
        let space = WordSpace::new(self, n);
        (0..space.len()).map(|i| space.word(i).to_vec()).collect()
    }

    #[inline]
    pub fn smallest_successor(&self, symbol: u8) -> u8 {
        self.successors[symbol as usize][0]
    }

    /// Extends `prefix` to `n` symbols with the smallest-successor rule.
    pub fn continue_word(&self, prefix: &[u8], n: usize) -> Vec<u8> {
        let mut out = prefix.to_vec();
        while out.len() < n {
            let last = *out.last().expect("non-empty prefix");
            out.push(self.smallest_successor(last));
        }
        out
    }

    /// Realized coordinate of the point whose symbols start with `prefix` and then
    /// follow the smallest-successor continuation.
    pub fn coordinate(&self, prefix: &[u8]) -> Result<f64> {
        let r = self.require_realization()?;
        let (last, init) = prefix.split_last().ok_or_else(|| Error::InvalidArgument("empty word".into()))?;
        let mut x = r.anchors[*last as usize];
        for &s in init.iter().rev() {
            x = r.branches[s as usize].apply(x);
        }
        Ok(x)
    }

    /// Applies the composed inverse branch of `word` to a realized coordinate.
    pub fn compose(&self, word: &[u8], x: f64) -> Result<f64> {
        let r = self.require_realization()?;
        Ok(word.iter().rev().fold(x, |y, &s| r.branches[s as usize].apply(y)))
    }

    /// Interval `[lo, hi]` of the cylinder of `word`.
    pub fn interval(&self, word: &[u8]) -> Result<(f64, f64)> {
        Ok((self.compose(word, 0.0)?, self.compose(word, 1.0)?))
    }

    pub fn cylinder_of(&self, word: &[u8]) -> Result<Cylinder> {
        if word.is_empty() || !self.is_admissible(word) {
            return Err(Error::NotAdmissible(word.to_vec()));
        }
        let (lo, hi) = self.interval(word)?;
        Ok(Cylinder { word: word.to_vec(), lo, hi })
    }

    /// All co-length-`q` subcylinders of `c`, lexicographically.
    pub fn subcylinders(&self, c: &Cylinder, q: usize) -> Result<Vec<Cylinder>> {
        let mut words = vec![c.word.clone()];
        for _ in 0..q {
            words = words
                .into_iter()
                .flat_map(|w| {
                    let last = *w.last().unwrap();
                    self.successors(last).iter().map(move |&s| {
                        let mut e = w.clone();
                        e.push(s);
                        e
                    })
                })
                .collect();
        }
        words.iter().map(|w| self.cylinder_of(w)).collect()
    }

    pub fn representative(&self, c: &Cylinder) -> PointRep {
        PointRep::new(self, c.word.clone())
    }

    pub fn diameter(&self, word: &[u8]) -> Result<f64> {
        let (lo, hi) = self.interval(word)?;
        Ok(hi - lo)
    }

    /// Cylinder metric: diameter of the smallest cylinder containing both points,
    /// `1` when the first symbols differ.
    pub fn metric_d(&self, x: &PointRep, y: &PointRep) -> Result<f64> {
        let horizon = x.prefix.len().max(y.prefix.len()) + EQUALITY_HORIZON;
        let xs = self.continue_word(&x.prefix, horizon);
        let ys = self.continue_word(&y.prefix, horizon);
        let common = xs.iter().zip(&ys).take_while(|(a, b)| a == b).count();
        if common == 0 {
            return Ok(1.0);
        }
        if common == horizon {
            return Ok(0.0);
        }
        self.diameter(&xs[..common])
    }

    /// Metric axioms of `D` over the representatives of all cylinders of
    /// `depth` symbols, `d ≤ D` for the realized distance, and the indicator
    /// bound `|χ_C(x) − χ_C(y)| ≤ D(x, y)/diam(C)` for every cylinder `C` of at
    /// most `depth` symbols.
    pub fn metric_suite(&self, depth: usize) -> Result<MetricReport> {
        self.require_realization()?;
        let words = self.admissible_words(depth.max(1));
        let pts: Vec<PointRep> = words.iter().map(|w| PointRep::new(self, w.clone())).collect();
        let n = pts.len();
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                d[i * n + j] = self.metric_d(&pts[i], &pts[j])?;
            }
        }
        let slack = 1e-15;
        let mut r = MetricReport { points: n, triples: n * n * n, ..Default::default() };
        for i in 0..n {
            for j in 0..n {
                let dij = d[i * n + j];
                if (i == j) != (dij == 0.0) {
                    r.identity_violations += 1;
                }
                if dij != d[j * n + i] {
                    r.symmetry_violations += 1;
                }
                let x = (pts[i].coord.unwrap() - pts[j].coord.unwrap()).abs();
                if x > dij + slack {
                    r.distance_violations += 1;
                }
                for k in 0..n {
                    if d[i * n + k] > dij + d[j * n + k] + slack {
                        r.triangle_violations += 1;
                    }
                }
            }
        }
        for len in 1..=depth.max(1) {
            for c in self.admissible_words(len) {
                let diam = self.diameter(&c)?;
                let inside: Vec<bool> = words.iter().map(|w| w.starts_with(&c)).collect();
                r.cylinders += 1;
                for i in 0..n {
                    for j in 0..n {
                        if inside[i] != inside[j] && 1.0 > d[i * n + j] / diam + slack {
                            r.indicator_violations += 1;
                        }
                    }
                }
            }
        }
        r.ok = r.identity_violations + r.symmetry_violations + r.triangle_violations + r.distance_violations + r.indicator_violations == 0;
        Ok(r)
    }

    /// Min/max diameter ratios of co-length-1 subcylinders over all cylinders of
    /// at most `n_max` symbols, plus the smallest co-length `p0` whose ratios all
    /// fall below the minimal co-length-1 ratio.
    pub fn distortion_ratios(&self, n_max: usize) -> Result<DistortionReport> {
        self.require_realization()?;
        if n_max < 2 {
            return Err(Error::InvalidArgument("n_max must be at least 2".into()));
        }
        let mut ratio_min = f64::INFINITY;
        let mut ratio_max = 0.0f64;
        for n in 1..n_max {
            for w in self.admissible_words(n) {
                let d = self.diameter(&w)?;
                for &s in self.successors(*w.last().unwrap()) {
                    let mut e = w.clone();
                    e.push(s);
                    let r = self.diameter(&e)? / d;
                    ratio_min = ratio_min.min(r);
                    ratio_max = ratio_max.max(r);
                }
            }
        }
        let rho = ratio_min;
        let tol = 1e-12;
        let base = n_max.min(6);
        let mut p0 = None;
        for q in 1..=32 {
            let mut worst = 0.0f64;
            for n in 1..=base {
                for w in self.admissible_words(n) {
                    let d = self.diameter(&w)?;
                    for e in extensions(self, &w, q) {
                        worst = worst.max(self.diameter(&e)? / d);
                    }
                }
            }
            if worst <= rho * (1.0 + tol) {
                p0 = Some(q);
                break;
            }
        }
        let p0 = p0.ok_or_else(|| Error::InvalidArgument("no co-length up to 32 contracts below rho".into()))?;
        Ok(DistortionReport { ratio_min, ratio_max, p0_est: p0, rho_est: rho })
    }

    /// Fits `diam <= c1 · rho1^m` and `diam >= c_low / gamma1^m` over all cylinders of
    /// at most `n_max` symbols, with `m = n - 1`.
    pub fn cylinder_bounds(&self, n_max: usize) -> Result<CylinderBounds> {
        let r = self.require_realization()?;
        let rho1 = r.branches.iter().map(|b| b.slope_bounds().1).fold(0.0, f64::max);
        let gamma1 = r.constants.gamma1;
        let mut c1 = 0.0f64;
        let mut c_low = f64::INFINITY;
        for n in 1..=n_max {
            let m = (n - 1) as i32;
            for w in self.admissible_words(n) {
                let d = self.diameter(&w)?;
                c1 = c1.max(d / rho1.powi(m));
                c_low = c_low.min(d * gamma1.powi(m));
            }
        }
        Ok(CylinderBounds { c1, rho1, c_low, gamma1 })
    }
}

fn extensions(sys: &SymbolicSystem, w: &[u8], q: usize) -> Vec<Vec<u8>> {
    let mut out = vec![w.to_vec()];
    for _ in 0..q {
        out = out
            .into_iter()
            .flat_map(|e| {
                let last = *e.last().unwrap();
                sys.successors(last).iter().map(move |&s| {
                    let mut x = e.clone();
                    x.push(s);
                    x
                })
            })
            .collect();
    }
    out
}

/// Smallest `m <= k^2` with `A^m > 0`, computed over booleans.
fn primitivity_exponent(a: &[Vec<u8>]) -> Option<usize> {
    let k = a.len();
    let mut power: Vec<Vec<bool>> = a.iter().map(|r| r.iter().map(|&v| v == 1).collect()).collect();
    for m in 1..=k * k {
        if power.iter().flatten().all(|&v| v) {
            return Some(m);
        }
        let next = (0..k)
            .map(|i| (0..k).map(|j| (0..k).any(|l| power[i][l] && a[l][j] == 1)).collect())
            .collect();
        power = next;
    }
    None
}

fn continuation_anchors(branches: &[Branch], successors: &[Vec<u8>]) -> Vec<f64> {
    let k = branches.len();
    let mut z = vec![0.5; k];
    for _ in 0..10_000 {
        let next: Vec<f64> = (0..k).map(|s| branches[s].apply(z[successors[s][0] as usize])).collect();
        let moved = next.iter().zip(&z).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        z = next;
        if moved == 0.0 {
            break;
        }
    }
    z
}

/// Measures `(c0, γ, γ1)` from branch slopes and secant expansion ratios of
/// composed branches up to six symbols.
fn measure_expansion(sys: &SymbolicSystem, r: &Realization) -> ExpansionConstants {
    let (mut smin, mut smax) = (f64::INFINITY, 0.0f64);
    for b in &r.branches {
        let (lo, hi) = b.slope_bounds();
        smin = smin.min(lo);
        smax = smax.max(hi);
    }
    let gamma = 1.0 / smax;
    let gamma1 = 1.0 / smin;
    if r.all_affine() {
        return ExpansionConstants { c0: 1.0, gamma, gamma1 };
    }
    let grid: Vec<f64> = (0..=8).map(|i| i as f64 / 8.0).collect();
    let mut c0 = 1.0f64;
    let mut frontier: Vec<Vec<u8>> = (0..sys.k as u8).map(|s| vec![s]).collect();
    for m in 1..=6 {
        for w in &frontier {
            let img: Vec<f64> = grid
                .iter()
                .map(|&x| w.iter().rev().fold(x, |y, &s| r.branches[s as usize].apply(y)))
                .collect();
            for i in 0..grid.len() - 1 {
                let ratio = (grid[i + 1] - grid[i]) / (img[i + 1] - img[i]);
                c0 = c0.min(ratio / gamma.powi(m)).min(gamma1.powi(m) / ratio);
            }
        }
        frontier = frontier
            .iter()
            .flat_map(|w| {
                let first = w[0];
                (0..sys.k as u8).filter(move |&s| sys.allowed(s, first)).map(move |s| {
                    let mut e = vec![s];
                    e.extend_from_slice(w);
                    e
                })
            })
            .collect();
    }
    ExpansionConstants { c0, gamma, gamma1 }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cylinder {
    pub word: Vec<u8>,
    pub lo: f64,
    pub hi: f64,
}

impl Cylinder {
    pub fn diameter(&self) -> f64 {
        self.hi - self.lo
    }

    /// Half-open membership; the right endpoint belongs to the neighbour on the
    /// right except at the end of the unit interval.
    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && (x < self.hi || (self.hi >= 1.0 && x <= self.hi))
    }
}

/// A point given by a symbol prefix and the smallest-successor continuation.
#[derive(Debug, Clone, PartialEq)]
pub struct PointRep {
    pub prefix: Vec<u8>,
    /// Realized coordinate, when the system has a realization.
    pub coord: Option<f64>,
}

impl PointRep {
    pub fn new(sys: &SymbolicSystem, prefix: Vec<u8>) -> Self {
        let coord = sys.coordinate(&prefix).ok();
        PointRep { prefix, coord }
    }

    /// First `n` symbols of the point.
    pub fn symbols(&self, sys: &SymbolicSystem, n: usize) -> Vec<u8> {
        let mut w = sys.continue_word(&self.prefix, n.max(1));
        w.truncate(n);
        w
    }

    /// The point `σ^j(self)`.
    pub fn shift(&self, sys: &SymbolicSystem, j: usize) -> PointRep {
        let w = sys.continue_word(&self.prefix, j + 1);
        let tail = w[j..].to_vec();
        PointRep::new(sys, if j < self.prefix.len() { self.prefix[j..].to_vec() } else { tail })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct MetricReport {
    pub points: usize,
    pub triples: usize,
    pub cylinders: usize,
    pub identity_violations: usize,
    pub symmetry_violations: usize,
    pub triangle_violations: usize,
    /// Pairs with realized distance above `D`.
    pub distance_violations: usize,
    pub indicator_violations: usize,
    pub ok: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistortionReport {
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub p0_est: usize,
    pub rho_est: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CylinderBounds {
    pub c1: f64,
    pub rho1: f64,
    pub c_low: f64,
    pub gamma1: f64,
}

/// Admissible words of a fixed number of symbols, in lexicographic order, with
/// base-`k` codes for lookup.
#[derive(Debug, Clone)]
pub struct WordSpace {
    k: usize,
    depth: usize,
    codes: Vec<u64>,
    symbols: Vec<u8>,
}

impl WordSpace {
    pub fn new(sys: &SymbolicSystem, depth: usize) -> Self {
        assert!(depth >= 1, "word spaces need at least one symbol");
        let k = sys.k;
        let bits = (k as f64).log2().ceil().max(1.0) as usize;
        assert!(bits * depth <= 64, "depth {depth} too large for alphabet {k}");
        let mut words: Vec<Vec<u8>> = (0..k as u8).map(|s| vec![s]).collect();
        for _ in 1..depth {
            words = words
                .into_iter()
                .flat_map(|w| {
                    let last = *w.last().unwrap();
                    sys.successors(last).iter().map(move |&s| {
                        let mut e = w.clone();
                        e.push(s);
                        e
                    })
                })
                .collect();
        }
        let codes = words.iter().map(|w| encode(k, w)).collect();
        let symbols = words.concat();
        WordSpace { k, depth, codes, symbols }
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    #[inline]
    pub fn word(&self, i: usize) -> &[u8] {
        &self.symbols[i * self.depth..(i + 1) * self.depth]
    }

    pub fn index_of(&self, word: &[u8]) -> Option<usize> {
        if word.len() != self.depth {
            return None;
        }
        self.codes.binary_search(&encode(self.k, word)).ok()
    }

    /// Index range of the words that start with `prefix`.
    pub fn prefix_range(&self, prefix: &[u8]) -> std::ops::Range<usize> {
        let p = prefix.len().min(self.depth);
        let scale = (self.k as u64).pow((self.depth - p) as u32);
        let lo = encode(self.k, &prefix[..p]) * scale;
        let hi = lo + scale;
        let a = self.codes.partition_point(|&c| c < lo);
        let b = self.codes.partition_point(|&c| c < hi);
        a..b
    }
}

#[inline]
fn encode(k: usize, word: &[u8]) -> u64 {
    word.iter().fold(0u64, |acc, &s| acc * k as u64 + s as u64)
}

/// Full shift on `k` symbols with equal affine branches `x ↦ (x + s)/k`.
pub fn uniform_full_shift(k: usize) -> SymbolicSystem {
    let branches = (0..k)
        .map(|s| Branch::Affine { a: 1.0 / k as f64, b: s as f64 / k as f64 })
        .collect();
    SymbolicSystem::build(k, vec![vec![1; k]; k], Some(RealizationSpec { branches, constants: None }))
        .expect("full shift is valid")
}

/// Golden-mean shift `[[1,1],[1,0]]` with branches `r0·x` and `r1·x + 1 - r1`.
pub fn golden_mean(r0: f64, r1: f64) -> Result<SymbolicSystem> {
    SymbolicSystem::build(
        2,
        vec![vec![1, 1], vec![1, 0]],
        Some(RealizationSpec {
            branches: vec![Branch::Affine { a: r0, b: 0.0 }, Branch::Affine { a: r1, b: 1.0 - r1 }],
            constants: None,
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dyadic() -> SymbolicSystem {
        uniform_full_shift(2)
    }

    #[test]
    fn build_validates_matrices() {
        assert_eq!(dyadic().m0(), 1);
        let g = SymbolicSystem::build(2, vec![vec![1, 1], vec![1, 0]], None).unwrap();
        assert_eq!(g.m0(), 2);
        assert_eq!(
            SymbolicSystem::build(2, vec![vec![1, 0], vec![0, 1]], None),
            Err(Error::NotAperiodic(4))
        );
        assert!(matches!(
            SymbolicSystem::build(2, vec![vec![1, 1], vec![0, 0]], None),
            Err(Error::EmptyRowOrColumn { kind: "row", index: 1 })
        ));
        assert!(matches!(
            SymbolicSystem::build(2, vec![vec![1, 0], vec![1, 0]], None),
            Err(Error::EmptyRowOrColumn { kind: "column", index: 1 })
        ));
        // Permutation matrices are irreducible but periodic.
        assert!(matches!(
            SymbolicSystem::build(2, vec![vec![0, 1], vec![1, 0]], None),
            Err(Error::NotAperiodic(_))
        ));
    }

    #[test]
    fn overlapping_branches_are_rejected() {
        let spec = RealizationSpec {
            branches: vec![Branch::Affine { a: 0.6, b: 0.0 }, Branch::Affine { a: 0.5, b: 0.5 }],
            constants: None,
        };
        assert_eq!(
            SymbolicSystem::build(2, vec![vec![1, 1], vec![1, 1]], Some(spec)),
            Err(Error::RealizationOverlap { symbol: 0, a: 0, b: 1 })
        );
    }

    #[test]
    fn nonlinear_branch_slope_is_checked() {
        let map = Expression::parse("0.4*x + 0.1*x^2").unwrap();
        let ok = Branch::Expr { map: map.clone(), deriv_min: 0.4, deriv_max: 0.6 };
        assert!(ok.validate(0).is_ok());
        let tight = Branch::Expr { map, deriv_min: 0.4, deriv_max: 0.5 };
        assert!(tight.validate(0).is_err());
    }

    #[test]
    fn admissible_word_counts() {
        assert_eq!(dyadic().admissible_words(3).len(), 8);
        let g = golden_mean(0.4, 0.5).unwrap();
        assert_eq!(g.admissible_words(3).len(), 5);
        assert_eq!(g.admissible_words(1), vec![vec![0], vec![1]]);
    }

    #[test]
    fn dyadic_cylinders() {
        let s = dyadic();
        let c = s.cylinder_of(&[0, 1]).unwrap();
        assert_eq!((c.lo, c.hi), (0.25, 0.5));
        assert_eq!(s.cylinder_of(&[0, 0, 0]).unwrap().diameter(), 0.125);
        assert_eq!(s.cylinder_of(&[1, 1, 2]), Err(Error::NotAdmissible(vec![1, 1, 2])));
        let g = golden_mean(0.4, 0.5).unwrap();
        assert_eq!(g.cylinder_of(&[1, 1]), Err(Error::NotAdmissible(vec![1, 1])));
        let d = g.cylinder_of(&[0, 1, 0, 0]).unwrap().diameter();
        assert!((d - 0.4 * 0.5 * 0.4 * 0.4).abs() < 1e-15);
    }

    #[test]
    fn subcylinder_examples() {
        let s = dyadic();
        let c0 = s.cylinder_of(&[0]).unwrap();
        let subs: Vec<_> = s.subcylinders(&c0, 1).unwrap().into_iter().map(|c| c.word).collect();
        assert_eq!(subs, vec![vec![0, 0], vec![0, 1]]);
        let c1 = s.cylinder_of(&[1]).unwrap();
        let subs = s.subcylinders(&c1, 2).unwrap();
        assert_eq!(subs.len(), 4);
        assert!(subs.iter().all(|c| c.diameter() == 0.125));
        let g = golden_mean(0.4, 0.5).unwrap();
        let c = g.cylinder_of(&[1]).unwrap();
        assert_eq!(g.subcylinders(&c, 1).unwrap().len(), 1);
    }

    #[test]
    fn representatives() {
        let s = dyadic();
        let r = s.representative(&s.cylinder_of(&[1]).unwrap());
        assert_eq!(r.symbols(&s, 4), vec![1, 0, 0, 0]);
        assert_eq!(r.coord, Some(0.5));
        assert_eq!(s.representative(&s.cylinder_of(&[0, 1]).unwrap()).coord, Some(0.25));
        let g = golden_mean(0.4, 0.5).unwrap();
        let r = g.representative(&g.cylinder_of(&[1]).unwrap());
        assert_eq!(r.symbols(&g, 4), vec![1, 0, 0, 0]);
        // 1 0 0 0 ... realizes g_1(0) = 0.5 since 0 is the fixed point of g_0.
        assert!((r.coord.unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn metric_examples() {
        let s = dyadic();
        let x = PointRep::new(&s, vec![0, 1, 1, 1, 1, 1]);
        let y = PointRep::new(&s, vec![0, 1, 0, 1, 0, 1]);
        assert_eq!(s.metric_d(&x, &y).unwrap(), 0.25);
        assert_eq!(s.metric_d(&x, &x).unwrap(), 0.0);
        let z = PointRep::new(&s, vec![1]);
        assert_eq!(s.metric_d(&x, &z).unwrap(), 1.0);
        // Same point, different prefix lengths.
        let a = PointRep::new(&s, vec![1]);
        let b = PointRep::new(&s, vec![1, 0, 0]);
        assert_eq!(s.metric_d(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn distortion_examples() {
        let rep = dyadic().distortion_ratios(6).unwrap();
        assert_eq!((rep.ratio_min, rep.ratio_max, rep.p0_est), (0.5, 0.5, 1));
        let rep = golden_mean(0.4, 0.5).unwrap().distortion_ratios(8).unwrap();
        assert!((rep.ratio_min - 0.4).abs() < 1e-12);
        assert!((rep.ratio_max - 0.5).abs() < 1e-12);
        assert_eq!(rep.p0_est, 2);
        assert_eq!(
            SymbolicSystem::build(2, vec![vec![1; 2]; 2], None).unwrap().distortion_ratios(4),
            Err(Error::NoRealization)
        );
    }

    #[test]
    fn word_space_lookup_and_prefix_ranges() {
        let g = golden_mean(0.4, 0.5).unwrap();
        let ws = WordSpace::new(&g, 4);
        assert_eq!(ws.len(), 8);
        for i in 0..ws.len() {
            assert_eq!(ws.index_of(ws.word(i)), Some(i));
        }
        let r = ws.prefix_range(&[0, 1]);
        assert!(r.clone().all(|i| ws.word(i).starts_with(&[0, 1])));
        assert_eq!(r.len(), 2);
        assert_eq!(ws.index_of(&[1, 1, 0, 0]), None);
    }
}
