//! Auxiliary channels `P(W | X)` built from a chain of per-variable factors.
//!
//! Each auxiliary variable is drawn from a factor conditioned on `X` and on
//! variables generated before it. Omitting a parent from a factor imposes a
//! conditional independence by construction, which is how structural Markov
//! constraints are enforced without penalty terms. The product of factors is
//! flattened into one [`CondPmf`] from `X` to all auxiliary variables.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::pmf::strides;
use crate::prob::{Alphabet, CondPmf};

/// A factor's parent: the source or an earlier auxiliary variable
/// (by output position).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parent {
    X,
    Var(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum FactorKind {
    /// Row-stochastic table, rows indexed by the parents (row-major).
    Free(Vec<f64>),
    /// Always symbol 0.
    Const,
    /// Equal to `X`.
    CopyX,
    /// Equal to another auxiliary variable.
    CopyOf(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    pub var: usize,
    pub parents: Vec<Parent>,
    pub kind: FactorKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactoredAux {
    x_size: usize,
    labels: Vec<String>,
    sizes: Vec<usize>,
    factors: Vec<Factor>,
}

impl FactoredAux {
    /// `factors` must list every output variable once, in generation order.
    pub fn new(x_size: usize, labels: Vec<String>, sizes: Vec<usize>, factors: Vec<Factor>) -> Result<Self> {
        if labels.len() != sizes.len() || factors.len() != sizes.len() {
            return Err(Error::InvalidArgument("one label, size and factor per variable".into()));
        }
        let mut done = vec![false; sizes.len()];
        for f in &factors {
            if f.var >= sizes.len() || done[f.var] {
                return Err(Error::InvalidArgument("factor variables must be distinct".into()));
            }
            for p in &f.parents {
                if let Parent::Var(k) = p {
                    if *k >= sizes.len() || !done[*k] {
                        return Err(Error::InvalidArgument(
                            "factor parent generated after its child".into(),
                        ));
                    }
                }
            }
            let s = sizes[f.var];
            match &f.kind {
                FactorKind::Free(t) => {
                    let rows = rows_of(x_size, &sizes, &f.parents);
                    if t.len() != rows * s {
                        return Err(Error::ShapeMismatch {
                            expected: rows * s,
                            got: t.len(),
                        });
                    }
                    for (r, row) in t.chunks(s).enumerate() {
                        let sum: f64 = row.iter().sum();
                        if row.iter().any(|v| !v.is_finite() || *v < 0.0) || (sum - 1.0).abs() > 1e-9 {
                            return Err(Error::RowNotNormalized { row: r, sum });
                        }
                    }
                }
                FactorKind::Const => {}
                FactorKind::CopyX => {
                    if s < x_size {
                        return Err(Error::InvalidArgument(format!(
                            "`{}` cannot copy X: alphabet too small",
                            labels[f.var]
                        )));
                    }
                }
                FactorKind::CopyOf(k) => {
                    if *k >= sizes.len() || !done[*k] || sizes[*k] > s {
                        return Err(Error::InvalidArgument(format!(
                            "`{}` cannot copy variable {k}",
                            labels[f.var]
                        )));
                    }
                }
            }
            done[f.var] = true;
        }
        Ok(Self {
            x_size,
            labels,
            sizes,
            factors,
        })
    }

    pub fn x_size(&self) -> usize {
        self.x_size
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    /// Indices of factors with free tables.
    pub fn free_factors(&self) -> Vec<usize> {
        (0..self.factors.len())
            .filter(|&i| matches!(self.factors[i].kind, FactorKind::Free(_)))
            .collect()
    }

    pub fn factor_rows(&self, i: usize) -> usize {
        rows_of(self.x_size, &self.sizes, &self.factors[i].parents)
    }

    pub fn var_size(&self, i: usize) -> usize {
        self.sizes[self.factors[i].var]
    }

    pub fn table_mut(&mut self, i: usize) -> Option<&mut Vec<f64>> {
        match &mut self.factors[i].kind {
            FactorKind::Free(t) => Some(t),
            _ => None,
        }
    }

    pub fn table(&self, i: usize) -> Option<&[f64]> {
        match &self.factors[i].kind {
            FactorKind::Free(t) => Some(t),
            _ => None,
        }
    }

    /// Flatten to `P(w_0, .., w_k | x)` with outputs in label order.
    pub fn to_cond(&self) -> CondPmf {
        let cols: usize = self.sizes.iter().product();
        let st = strides(&self.sizes);
        let mut mass = vec![0.0; self.x_size * cols];
        let mut w = vec![0usize; self.sizes.len()];
        for x in 0..self.x_size {
            self.fill(x, 0, 1.0, &mut w, &st, &mut mass[x * cols..(x + 1) * cols]);
        }
        // rows are exact products of normalized factors; renormalize away rounding
        for row in mass.chunks_mut(cols) {
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= s);
        }
        let from = vec![Alphabet::new("X", self.x_size).expect("x_size >= 1")];
        let to = self
            .labels
            .iter()
            .zip(&self.sizes)
            .map(|(l, &s)| Alphabet::new(l.clone(), s).expect("sizes >= 1"))
            .collect();
        CondPmf::new(from, to, mass).expect("factor product is row-stochastic")
    }

    fn fill(&self, x: usize, depth: usize, p: f64, w: &mut [usize], st: &[usize], out: &mut [f64]) {
        if depth == self.factors.len() {
            let c: usize = w.iter().zip(st).map(|(a, b)| a * b).sum();
            out[c] += p;
            return;
        }
        let f = &self.factors[depth];
        match &f.kind {
            FactorKind::Const => {
                w[f.var] = 0;
                self.fill(x, depth + 1, p, w, st, out);
            }
            FactorKind::CopyX => {
                w[f.var] = x;
                self.fill(x, depth + 1, p, w, st, out);
            }
            FactorKind::CopyOf(k) => {
                w[f.var] = w[*k];
                self.fill(x, depth + 1, p, w, st, out);
            }
            FactorKind::Free(t) => {
                let s = self.sizes[f.var];
                let row = self.parent_row(x, w, &f.parents);
                for v in 0..s {
                    let q = t[row * s + v];
                    if q > 0.0 {
                        w[f.var] = v;
                        self.fill(x, depth + 1, p * q, w, st, out);
                    }
                }
            }
        }
    }

    fn parent_row(&self, x: usize, w: &[usize], parents: &[Parent]) -> usize {
        parents.iter().fold(0, |acc, p| match p {
            Parent::X => acc * self.x_size + x,
            Parent::Var(k) => acc * self.sizes[*k] + w[*k],
        })
    }

    /// Replace every free table with one that copies its `X` parent
    /// (symbol `x mod size`), or symbol 0 when `X` is not a parent.
    pub fn anchor(&self) -> Self {
        let mut out = self.clone();
        for i in self.free_factors() {
            let rows = self.factor_rows(i);
            let s = self.var_size(i);
            let parents = self.factors[i].parents.clone();
            let x_pos = parents.iter().position(|p| *p == Parent::X);
            let mut t = vec![0.0; rows * s];
            for r in 0..rows {
                let v = match x_pos {
                    Some(pos) => {
                        let inner: usize = parents[pos + 1..]
                            .iter()
                            .map(|p| match p {
                                Parent::X => self.x_size,
                                Parent::Var(k) => self.sizes[*k],
                            })
                            .product();
                        ((r / inner) % self.x_size) % s
                    }
                    None => 0,
                };
                t[r * s + v] = 1.0;
            }
            *out.table_mut(i).expect("free") = t;
        }
        out
    }

    /// Replace every free table with rows drawn uniformly from the simplex.
    pub fn randomized<R: Rng + ?Sized>(&self, rng: &mut R) -> Self {
        let mut out = self.clone();
        for i in self.free_factors() {
            let s = self.var_size(i);
            let t = out.table_mut(i).expect("free");
            for row in t.chunks_mut(s) {
                let e: Vec<f64> = (0..s).map(|_| Exp1.sample(rng)).collect();
                let sum: f64 = e.iter().sum();
                row.iter_mut().zip(&e).for_each(|(r, v)| *r = v / sum);
            }
        }
        out
    }

    /// Convex combination `t·self + (1−t)·other` of the free tables
    /// (both must share the same structure).
    pub fn mix(&self, other: &Self, t: f64) -> Self {
        let mut out = self.clone();
        for i in self.free_factors() {
            let b = other.table(i).expect("same structure");
            let a = out.table_mut(i).expect("free");
            a.iter_mut().zip(b).for_each(|(x, y)| *x = t * *x + (1.0 - t) * y);
        }
        out
    }

    /// Total number of free parameters (table entries).
    pub fn free_len(&self) -> usize {
        self.free_factors().iter().map(|&i| self.factor_rows(i) * self.var_size(i)).sum()
    }
}

fn rows_of(x_size: usize, sizes: &[usize], parents: &[Parent]) -> usize {
    parents
        .iter()
        .map(|p| match p {
            Parent::X => x_size,
            Parent::Var(k) => sizes[*k],
        })
        .product()
}

/// A free factor initialised to the uniform table.
pub fn free_uniform(x_size: usize, sizes: &[usize], var: usize, parents: Vec<Parent>) -> Factor {
    let rows = rows_of(x_size, sizes, &parents);
    let s = sizes[var];
    Factor {
        var,
        parents,
        kind: FactorKind::Free(vec![1.0 / s as f64; rows * s]),
    }
}

pub fn fixed(var: usize, kind: FactorKind) -> Factor {
    Factor {
        var,
        parents: Vec::new(),
        kind,
    }
}
