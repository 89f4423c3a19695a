use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symbols are indices into an [`Alphabet`].
pub type Symbol = u16;

/// Tolerance on `Σ p = 1` accepted at construction.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// A finite alphabet `{0, .., size-1}` with a short label such as `"X"` or `"W1"`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alphabet {
    label: String,
    size: usize,
}

impl Alphabet {
    pub fn new(label: impl Into<String>, size: usize) -> Result<Self> {
        let label = label.into();
        if size == 0 {
            return Err(Error::EmptyAlphabet { label });
        }
        Ok(Self { label, size })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn relabeled(&self, label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            size: self.size,
        }
    }
}

pub(crate) fn product_len(axes: &[Alphabet]) -> usize {
    axes.iter().map(Alphabet::size).product()
}

/// Row-major strides: the last axis varies fastest.
pub(crate) fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

/// Advance a multi-index in row-major order. Returns false after the last cell.
pub(crate) fn next_index(idx: &mut [usize], shape: &[usize]) -> bool {
    for i in (0..idx.len()).rev() {
        idx[i] += 1;
        if idx[i] < shape[i] {
            return true;
        }
        idx[i] = 0;
    }
    false
}

fn validate_mass(mass: &[f64]) -> Result<()> {
    for (index, &value) in mass.iter().enumerate() {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::InvalidMass { index, value });
        }
    }
    Ok(())
}

#[derive(Deserialize)]
struct RawJoint {
    axes: Vec<Alphabet>,
    mass: Vec<f64>,
}

/// A joint pmf over an ordered list of alphabets, stored densely in
/// row-major order (last axis fastest).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawJoint")]
pub struct JointPmf {
    axes: Vec<Alphabet>,
    mass: Vec<f64>,
}

impl TryFrom<RawJoint> for JointPmf {
    type Error = Error;

    fn try_from(raw: RawJoint) -> Result<Self> {
        JointPmf::new(raw.axes, raw.mass)
    }
}

impl JointPmf {
    pub fn new(axes: Vec<Alphabet>, mass: Vec<f64>) -> Result<Self> {
        let expected = product_len(&axes);
        if mass.len() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                got: mass.len(),
            });
        }
        validate_mass(&mass)?;
        let sum: f64 = mass.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NotNormalized { sum });
        }
        Ok(Self { axes, mass })
    }

    /// Normalize a non-negative table and build the pmf.
    pub fn from_weights(axes: Vec<Alphabet>, weights: Vec<f64>) -> Result<Self> {
        validate_mass(&weights)?;
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(Error::NotNormalized { sum });
        }
        Self::new(axes, weights.into_iter().map(|w| w / sum).collect())
    }

    pub fn uniform(axes: Vec<Alphabet>) -> Self {
        let len = product_len(&axes);
        Self {
            axes,
            mass: vec![1.0 / len as f64; len],
        }
    }

    pub fn point_mass(axes: Vec<Alphabet>, cell: &[usize]) -> Result<Self> {
        let len = product_len(&axes);
        let mut mass = vec![0.0; len];
        let shape: Vec<usize> = axes.iter().map(Alphabet::size).collect();
        if cell.len() != shape.len() || cell.iter().zip(&shape).any(|(c, s)| c >= s) {
            return Err(Error::InvalidArgument(format!(
                "cell {cell:?} outside shape {shape:?}"
            )));
        }
        let st = strides(&shape);
        let flat: usize = cell.iter().zip(&st).map(|(c, s)| c * s).sum();
        mass[flat] = 1.0;
        Ok(Self { axes, mass })
    }

    /// Independent product `self × other`; axes concatenate.
    pub fn product(&self, other: &JointPmf) -> JointPmf {
        let mut axes = self.axes.clone();
        axes.extend(other.axes.iter().cloned());
        let mut mass = Vec::with_capacity(self.mass.len() * other.mass.len());
        for &a in &self.mass {
            for &b in &other.mass {
                mass.push(a * b);
            }
        }
        JointPmf { axes, mass }
    }

    pub fn axes(&self) -> &[Alphabet] {
        &self.axes
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn rank(&self) -> usize {
        self.axes.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Alphabet::size).collect()
    }

    pub fn axis_index(&self, label: &str) -> Option<usize> {
        self.axes.iter().position(|a| a.label() == label)
    }

    pub fn flat_index(&self, cell: &[usize]) -> usize {
        let st = strides(&self.shape());
        cell.iter().zip(&st).map(|(c, s)| c * s).sum()
    }

    pub fn get(&self, cell: &[usize]) -> f64 {
        self.mass[self.flat_index(cell)]
    }

    /// Marginal mass on `keep` (in that order) without validation.
    pub(crate) fn marginal_mass(&self, keep: &[usize]) -> Vec<f64> {
        let shape = self.shape();
        let out_shape: Vec<usize> = keep.iter().map(|&k| shape[k]).collect();
        let out_strides = strides(&out_shape);
        let mut out = vec![0.0; out_shape.iter().product()];
        if keep.is_empty() {
            out[0] = self.mass.iter().sum();
            return out;
        }
        let mut idx = vec![0usize; shape.len()];
        for &m in &self.mass {
            let o: usize = keep
                .iter()
                .zip(&out_strides)
                .map(|(&k, s)| idx[k] * s)
                .sum();
            out[o] += m;
            next_index(&mut idx, &shape);
        }
        out
    }

    /// Sum out every axis not in `keep`. The result's axes follow `keep`'s order.
    pub fn marginalize(&self, keep: &[usize]) -> Result<JointPmf> {
        let mut seen = vec![false; self.rank()];
        if keep.is_empty() {
            return Err(Error::InvalidSelection);
        }
        for &k in keep {
            if k >= self.rank() || seen[k] {
                return Err(Error::InvalidSelection);
            }
            seen[k] = true;
        }
        Ok(JointPmf {
            axes: keep.iter().map(|&k| self.axes[k].clone()).collect(),
            mass: self.marginal_mass(keep),
        })
    }

    /// Marginal over axes looked up by label.
    pub fn marginal_by_labels(&self, labels: &[&str]) -> Result<JointPmf> {
        let keep = labels
            .iter()
            .map(|l| {
                self.axis_index(l)
                    .ok_or_else(|| Error::AlphabetMismatch(format!("no axis labelled `{l}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        self.marginalize(&keep)
    }
}

/// Free-function form of [`JointPmf::marginalize`].
pub fn marginalize(p: &JointPmf, keep: &[usize]) -> Result<JointPmf> {
    p.marginalize(keep)
}

#[derive(Deserialize)]
struct RawCond {
    from_axes: Vec<Alphabet>,
    to_axes: Vec<Alphabet>,
    mass: Vec<f64>,
}

/// A conditional pmf. Rows are indexed by the `from` symbols (row-major),
/// each row is a pmf over the `to` symbols (row-major).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCond")]
pub struct CondPmf {
    from_axes: Vec<Alphabet>,
    to_axes: Vec<Alphabet>,
    mass: Vec<f64>,
}

impl TryFrom<RawCond> for CondPmf {
    type Error = Error;

    fn try_from(raw: RawCond) -> Result<Self> {
        CondPmf::new(raw.from_axes, raw.to_axes, raw.mass)
    }
}

impl CondPmf {
    pub fn new(from_axes: Vec<Alphabet>, to_axes: Vec<Alphabet>, mass: Vec<f64>) -> Result<Self> {
        let rows = product_len(&from_axes);
        let cols = product_len(&to_axes);
        if mass.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                expected: rows * cols,
                got: mass.len(),
            });
        }
        validate_mass(&mass)?;
        for (row, chunk) in mass.chunks(cols).enumerate() {
            let sum: f64 = chunk.iter().sum();
            if (sum - 1.0).abs() > NORMALIZATION_TOL {
                return Err(Error::RowNotNormalized { row, sum });
            }
        }
        Ok(Self {
            from_axes,
            to_axes,
            mass,
        })
    }

    /// Every input maps to the same output cell.
    pub fn constant(from_axes: Vec<Alphabet>, to_axes: Vec<Alphabet>, cell: usize) -> Result<Self> {
        let rows = product_len(&from_axes);
        let cols = product_len(&to_axes);
        if cell >= cols {
            return Err(Error::InvalidArgument(format!("cell {cell} >= {cols}")));
        }
        let mut mass = vec![0.0; rows * cols];
        for r in 0..rows {
            mass[r * cols + cell] = 1.0;
        }
        Self::new(from_axes, to_axes, mass)
    }

    /// Deterministic map given as `row -> output cell`.
    pub fn deterministic(
        from_axes: Vec<Alphabet>,
        to_axes: Vec<Alphabet>,
        map: &[usize],
    ) -> Result<Self> {
        let rows = product_len(&from_axes);
        let cols = product_len(&to_axes);
        if map.len() != rows || map.iter().any(|&c| c >= cols) {
            return Err(Error::InvalidArgument(
                "deterministic map has wrong length or range".into(),
            ));
        }
        let mut mass = vec![0.0; rows * cols];
        for (r, &c) in map.iter().enumerate() {
            mass[r * cols + c] = 1.0;
        }
        Self::new(from_axes, to_axes, mass)
    }

    /// Binary symmetric channel with crossover `q` between two binary alphabets.
    pub fn bsc(from: Alphabet, to: Alphabet, q: f64) -> Result<Self> {
        if from.size() != 2 || to.size() != 2 || !(0.0..=1.0).contains(&q) {
            return Err(Error::InvalidArgument("bsc needs binary alphabets and q in [0,1]".into()));
        }
        Self::new(vec![from], vec![to], vec![1.0 - q, q, q, 1.0 - q])
    }

    pub fn from_axes(&self) -> &[Alphabet] {
        &self.from_axes
    }

    pub fn to_axes(&self) -> &[Alphabet] {
        &self.to_axes
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn rows(&self) -> usize {
        product_len(&self.from_axes)
    }

    pub fn cols(&self) -> usize {
        product_len(&self.to_axes)
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.mass[r * c..(r + 1) * c]
    }
}

/// Joint of `px` and `cond`: `p(a, b) = px(a) · cond(b | a_from)`.
///
/// `cond`'s input axes are matched to `px`'s axes by label and size, so the
/// conditioning may use any subset of `px`'s variables. The output axes are
/// `px`'s axes followed by `cond`'s output axes, and marginalizing the
/// output axes away returns `px` exactly.
pub fn compose(px: &JointPmf, cond: &CondPmf) -> Result<JointPmf> {
    let positions = cond
        .from_axes
        .iter()
        .map(|a| {
            px.axes
                .iter()
                .position(|b| b == a)
                .ok_or_else(|| {
                    Error::AlphabetMismatch(format!(
                        "conditioning axis `{}` (size {}) not present in the joint",
                        a.label(),
                        a.size()
                    ))
                })
        })
        .collect::<Result<Vec<_>>>()?;
    for a in &cond.to_axes {
        if px.axes.iter().any(|b| b.label() == a.label()) {
            return Err(Error::AlphabetMismatch(format!(
                "output axis `{}` already present in the joint",
                a.label()
            )));
        }
    }
    let shape = px.shape();
    let from_shape: Vec<usize> = cond.from_axes.iter().map(Alphabet::size).collect();
    let from_strides = strides(&from_shape);
    let cols = cond.cols();
    let mut mass = Vec::with_capacity(px.mass.len() * cols);
    let mut idx = vec![0usize; shape.len()];
    for &m in &px.mass {
        let row: usize = positions
            .iter()
            .zip(&from_strides)
            .map(|(&p, s)| idx[p] * s)
            .sum();
        mass.extend(cond.row(row).iter().map(|c| m * c));
        next_index(&mut idx, &shape);
    }
    let mut axes = px.axes.clone();
    axes.extend(cond.to_axes.iter().cloned());
    Ok(JointPmf { axes, mass })
}
