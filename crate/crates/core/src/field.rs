//! Cylinder discretizations: functions constant on depth-`d` cylinders, the
//! sparse one-step preimage structure, and Lipschitz estimates in the metric D.

use num_complex::Complex64;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::symbolic::{SymbolicSystem, WordSpace};

/// How a potential, roof or observable is specified.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldSpec {
    Const(f64),
    /// Locally constant on cylinders of `depth` symbols; values follow the
    /// lexicographic order of admissible words.
    Table { depth: usize, values: Vec<f64> },
    /// Function of the realized coordinate `x`.
    Expr(Expression),
}

impl FieldSpec {
    pub fn zero() -> Self {
        FieldSpec::Const(0.0)
    }

    pub fn expr(source: &str) -> Result<Self> {
        Ok(FieldSpec::Expr(Expression::parse(source)?))
    }

    /// Depth at which the field is exactly locally constant, if any.
    pub fn local_depth(&self) -> Option<usize> {
        match self {
            FieldSpec::Const(_) => Some(1),
            FieldSpec::Table { depth, .. } => Some(*depth),
            FieldSpec::Expr(_) => None,
        }
    }

    pub fn validate(&self, sys: &SymbolicSystem) -> Result<()> {
        match self {
            FieldSpec::Table { depth, values } => {
                let n = WordSpace::new(sys, *depth).len();
                if values.len() != n {
                    return Err(Error::InvalidArgument(format!(
                        "depth-{depth} table needs {n} values, got {}",
                        values.len()
                    )));
                }
                Ok(())
            }
            FieldSpec::Expr(_) => sys.require_realization().map(|_| ()),
            FieldSpec::Const(_) => Ok(()),
        }
    }

    /// Value at the point with symbol prefix `word` (continued by the
    /// smallest-successor rule).
    pub fn eval_word(&self, sys: &SymbolicSystem, word: &[u8]) -> Result<f64> {
        match self {
            FieldSpec::Const(c) => Ok(*c),
            FieldSpec::Table { depth, values } => {
                let w = sys.continue_word(word, *depth);
                let space = WordSpace::new(sys, *depth);
                let i = space.index_of(&w[..*depth]).ok_or_else(|| Error::NotAdmissible(w.clone()))?;
                Ok(values[i])
            }
            FieldSpec::Expr(e) => Ok(e.eval(sys.coordinate(word)?)),
        }
    }

    /// Values on every word of `space`.
    pub fn sample(&self, sys: &SymbolicSystem, space: &WordSpace) -> Result<Vec<f64>> {
        self.validate(sys)?;
        match self {
            FieldSpec::Const(c) => Ok(vec![*c; space.len()]),
            FieldSpec::Table { depth, values } => {
                let table = WordSpace::new(sys, *depth);
                (0..space.len())
                    .map(|i| {
                        let w = sys.continue_word(space.word(i), *depth);
                        table.index_of(&w[..*depth]).map(|j| values[j]).ok_or_else(|| Error::NotAdmissible(w))
                    })
                    .collect()
            }
            FieldSpec::Expr(e) => (0..space.len()).map(|i| Ok(e.eval(sys.coordinate(space.word(i))?))).collect(),
        }
    }

    /// Value at a realized coordinate (expressions only) or at a symbolic point.
    pub fn eval_coord(&self, x: f64) -> Option<f64> {
        match self {
            FieldSpec::Const(c) => Some(*c),
            FieldSpec::Expr(e) => Some(e.eval(x)),
            FieldSpec::Table { .. } => None,
        }
    }

    /// Range over the representatives of depth-`depth` cylinders.
    pub fn range(&self, sys: &SymbolicSystem, depth: usize) -> Result<(f64, f64)> {
        let space = WordSpace::new(sys, depth.max(self.local_depth().unwrap_or(1)));
        let v = self.sample(sys, &space)?;
        Ok(v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x))))
    }
}

/// The one-step preimage structure at depth `d`.
///
/// States are admissible words of `d` symbols; edges are words `v` of `d + 1`
/// symbols, with `σ(v)` truncated to `d` symbols as the row and `v` truncated to
/// `d` symbols as the column. A potential sampled on edges makes the transfer
/// operator the sparse matrix `row <- Σ e^{g(edge)} h(col)`.
#[derive(Debug, Clone)]
pub struct Grid {
    pub sys: SymbolicSystem,
    pub states: WordSpace,
    pub edges: WordSpace,
    edge_row: Vec<u32>,
    edge_col: Vec<u32>,
    by_row: Vec<u32>,
    row_ptr: Vec<usize>,
    by_col: Vec<u32>,
    col_ptr: Vec<usize>,
    tree: OnceLock<std::result::Result<CylinderTree, Error>>,
}

/// Below this many states the operators run on one thread.
const PAR_THRESHOLD: usize = 4096;

fn csr(keys: &[u32], n: usize) -> (Vec<u32>, Vec<usize>) {
    let mut order: Vec<u32> = (0..keys.len() as u32).collect();
    order.sort_by_key(|&e| (keys[e as usize], e));
    let mut ptr = vec![0usize; n + 1];
    for &r in keys {
        ptr[r as usize + 1] += 1;
    }
    for i in 0..n {
        ptr[i + 1] += ptr[i];
    }
    (order, ptr)
}

impl Grid {
    pub fn new(sys: &SymbolicSystem, depth: usize) -> Self {
        let states = WordSpace::new(sys, depth);
        let edges = WordSpace::new(sys, depth + 1);
        let mut edge_row = Vec::with_capacity(edges.len());
        let mut edge_col = Vec::with_capacity(edges.len());
        for e in 0..edges.len() {
            let v = edges.word(e);
            edge_row.push(states.index_of(&v[1..]).expect("tail admissible") as u32);
            edge_col.push(states.index_of(&v[..depth]).expect("head admissible") as u32);
        }
        let (by_row, row_ptr) = csr(&edge_row, states.len());
        let (by_col, col_ptr) = csr(&edge_col, states.len());
        Grid { sys: sys.clone(), states, edges, edge_row, edge_col, by_row, row_ptr, by_col, col_ptr, tree: OnceLock::new() }
    }

    pub fn depth(&self) -> usize {
        self.states.depth()
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    #[inline]
    pub fn edge_row(&self, e: usize) -> usize {
        self.edge_row[e] as usize
    }

    #[inline]
    pub fn edge_col(&self, e: usize) -> usize {
        self.edge_col[e] as usize
    }

    /// Edges whose row is `r`, in increasing edge order.
    #[inline]
    pub fn row_edges(&self, r: usize) -> impl Iterator<Item = usize> + '_ {
        self.by_row[self.row_ptr[r]..self.row_ptr[r + 1]].iter().map(|&e| e as usize)
    }

    /// Cylinder diameters up to the edge depth `d + 1`, built on first use.
    pub fn tree(&self) -> Result<&CylinderTree> {
        self.tree
            .get_or_init(|| CylinderTree::new(&self.sys, self.depth() + 1))
            .as_ref()
            .map_err(|e| e.clone())
    }

    /// Edges whose column is `c`, in increasing edge order.
    #[inline]
    pub fn col_edges(&self, c: usize) -> impl Iterator<Item = usize> + '_ {
        self.by_col[self.col_ptr[c]..self.col_ptr[c + 1]].iter().map(|&e| e as usize)
    }

    /// Samples a field on edges (`d + 1` symbols).
    pub fn sample_edges(&self, f: &FieldSpec) -> Result<Vec<f64>> {
        f.sample(&self.sys, &self.edges)
    }

    /// Samples a field on states (`d` symbols).
    pub fn sample_states(&self, f: &FieldSpec) -> Result<ScalarField> {
        Ok(ScalarField { depth: self.depth(), values: f.sample(&self.sys, &self.states)? })
    }

    /// Row-wise gather `out[r] = Σ_{e in row r} w[e] x[col(e)]`. Each row sums
    /// its edges in increasing edge order, so the result does not depend on the
    /// thread count.
    fn gather<T>(&self, w: &[T], x: &[T]) -> Vec<T>
    where
        T: Copy + Send + Sync + std::iter::Sum<T> + std::ops::Mul<Output = T>,
    {
        let row = |r: usize| self.row_edges(r).map(|e| w[e] * x[self.edge_col(e)]).sum();
        if self.n_states() >= PAR_THRESHOLD {
            (0..self.n_states()).into_par_iter().map(row).collect()
        } else {
            (0..self.n_states()).map(row).collect()
        }
    }

    /// Real transfer operator with edge weights (not logs).
    pub fn apply_weights(&self, w: &[f64], h: &[f64]) -> Vec<f64> {
        self.gather(w, h)
    }

    /// Real transfer operator with edge log-weights.
    pub fn apply_real(&self, log_w: &[f64], h: &[f64]) -> Vec<f64> {
        let w: Vec<f64> = log_w.iter().map(|g| g.exp()).collect();
        self.gather(&w, h)
    }

    pub fn apply_complex(&self, w: &[Complex64], h: &[Complex64]) -> Vec<Complex64> {
        self.gather(w, h)
    }

    /// Adjoint action on a row vector: `(μ L)[col] = Σ_row μ[row] w(edge)`.
    pub fn apply_adjoint(&self, w: &[f64], mu: &[f64]) -> Vec<f64> {
        let col = |c: usize| self.col_edges(c).map(|e| mu[self.edge_row(e)] * w[e]).sum();
        if self.n_states() >= PAR_THRESHOLD {
            (0..self.n_states()).into_par_iter().map(col).collect()
        } else {
            (0..self.n_states()).map(col).collect()
        }
    }

    /// Index of the state reached by prefixing `word` to state `u` and truncating.
    pub fn prefix_state(&self, word: &[u8], u: usize) -> Option<usize> {
        let d = self.depth();
        let mut w = word.to_vec();
        w.extend_from_slice(self.states.word(u));
        w.truncate(d);
        self.states.index_of(&w)
    }
}

/// Real function constant on depth-`d` cylinders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    pub depth: usize,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn constant(grid: &Grid, c: f64) -> Self {
        ScalarField { depth: grid.depth(), values: vec![c; grid.n_states()] }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Exact Lipschitz constant in D over pairs with a common first symbol.
    pub fn lip_d(&self, grid: &Grid) -> Result<f64> {
        check_depth(grid, self.depth)?;
        Ok(grid.tree()?.lip_real(&grid.states, &self.values))
    }

    /// Smallest `A` with `|H(u) − H(u')| ≤ A H(u') D(u,u')` for all pairs with a
    /// common first symbol; infinite unless every value is positive.
    pub fn cone_constant(&self, grid: &Grid) -> Result<f64> {
        check_depth(grid, self.depth)?;
        Ok(grid.tree()?.cone_constant(&grid.states, &self.values))
    }
}

/// Complex function constant on depth-`d` cylinders.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub depth: usize,
    pub values: Vec<Complex64>,
}

impl ComplexField {
    pub fn constant(grid: &Grid, c: Complex64) -> Self {
        ComplexField { depth: grid.depth(), values: vec![c; grid.n_states()] }
    }

    pub fn from_real(f: &ScalarField) -> Self {
        ComplexField { depth: f.depth, values: f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect() }
    }

    pub fn modulus(&self) -> ScalarField {
        ScalarField { depth: self.depth, values: self.values.iter().map(|v| v.norm()).collect() }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.norm()))
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.values {
            *v *= s;
        }
    }

    /// Lipschitz estimate in D over sibling representatives: for every cylinder
    /// and every pair of its one-symbol extensions, the difference of values at
    /// their representatives divided by the parent diameter.
    pub fn lip_d(&self, grid: &Grid) -> Result<f64> {
        check_depth(grid, self.depth)?;
        Ok(grid.tree()?.lip_siblings(&grid.sys, &grid.states, &self.values))
    }
}

/// Admissible words and cylinder diameters at every level `1..=depth`.
#[derive(Debug, Clone)]
pub struct CylinderTree {
    levels: Vec<WordSpace>,
    diam: Vec<Vec<f64>>,
}

impl CylinderTree {
    pub fn new(sys: &SymbolicSystem, depth: usize) -> Result<Self> {
        sys.require_realization()?;
        let mut levels = Vec::with_capacity(depth);
        let mut diam = Vec::with_capacity(depth);
        for l in 1..=depth {
            let ws = WordSpace::new(sys, l);
            diam.push((0..ws.len()).map(|i| sys.diameter(ws.word(i))).collect::<Result<Vec<_>>>()?);
            levels.push(ws);
        }
        Ok(CylinderTree { levels, diam })
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// Words of `l ≥ 1` symbols.
    pub fn level(&self, l: usize) -> &WordSpace {
        &self.levels[l - 1]
    }

    /// Diameter of the `i`-th word of `l` symbols.
    pub fn diam(&self, l: usize, i: usize) -> f64 {
        self.diam[l - 1][i]
    }

    /// Exact Lipschitz constant in D over pairs with a common first symbol of
    /// a function constant on the cylinders of `space`: the largest value range
    /// inside a cylinder divided by its diameter.
    pub fn lip_real(&self, space: &WordSpace, values: &[f64]) -> f64 {
        self.fold_prefixes(space, values, |lo, hi, d| if hi > lo { (hi - lo) / d } else { 0.0 })
    }

    /// Exact cone constant: the largest `max/min − 1` inside a cylinder divided
    /// by its diameter.
    pub fn cone_constant(&self, space: &WordSpace, values: &[f64]) -> f64 {
        if values.iter().any(|&v| !(v > 0.0)) {
            return f64::INFINITY;
        }
        self.fold_prefixes(space, values, |lo, hi, d| (hi / lo - 1.0) / d)
    }

    fn fold_prefixes(&self, space: &WordSpace, values: &[f64], ratio: impl Fn(f64, f64, f64) -> f64) -> f64 {
        assert!(space.depth() <= self.depth());
        let mut best = 0.0f64;
        for l in 1..space.depth() {
            let ws = self.level(l);
            for p in 0..ws.len() {
                let (lo, hi) = values[space.prefix_range(ws.word(p))]
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
                best = best.max(ratio(lo, hi, self.diam(l, p)));
            }
        }
        best
    }

    /// Lipschitz estimate over pairs of sibling representatives.
    pub fn lip_siblings(&self, sys: &SymbolicSystem, space: &WordSpace, values: &[Complex64]) -> f64 {
        assert!(space.depth() <= self.depth());
        let mut lip = 0.0f64;
        let mut child = Vec::with_capacity(space.depth());
        let mut reps = Vec::new();
        for l in 1..space.depth() {
            let ws = self.level(l);
            for p in 0..ws.len() {
                let parent = ws.word(p);
                let succ = sys.successors(*parent.last().unwrap());
                if succ.len() < 2 {
                    continue;
                }
                reps.clear();
                for &s in succ {
                    child.clear();
                    child.extend_from_slice(parent);
                    child.push(s);
                    reps.push(values[space.prefix_range(&child).start]);
                }
                let mut spread = 0.0f64;
                for i in 0..reps.len() {
                    for j in i + 1..reps.len() {
                        spread = spread.max((reps[i] - reps[j]).norm());
                    }
                }
                lip = lip.max(spread / self.diam(l, p));
            }
        }
        lip
    }
}

fn check_depth(grid: &Grid, depth: usize) -> Result<()> {
    if grid.depth() != depth {
        return Err(Error::DepthMismatch { expected: grid.depth(), got: depth });
    }
    Ok(())
}

/// Probability weights on depth-`d` cylinders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measure {
    pub depth: usize,
    pub weights: Vec<f64>,
}

impl Measure {
    /// Mass of the cylinder of `word` (at most `depth` symbols).
    pub fn of_word(&self, grid: &Grid, word: &[u8]) -> f64 {
        self.weights[grid.states.prefix_range(word)].iter().sum()
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.weights.iter().zip(f).map(|(w, v)| w * v).sum()
    }

    pub fn integrate_sq_modulus(&self, f: &[Complex64]) -> f64 {
        self.weights.iter().zip(f).map(|(w, v)| w * v.norm_sqr()).sum()
    }
}
