use super::pmf::{strides, JointPmf, Symbol};
use crate::error::{Error, Result};

/// Slack absorbing floating-point error in the count bounds.
const BOUND_EPS: f64 = 1e-9;

/// Strong typicality test for length-`n` tuples against a fixed pmf.
///
/// A tuple is typical iff every cell's empirical frequency is within
/// `delta` of its probability and zero-probability cells are unoccupied.
/// The bounds are precomputed as integer counts per cell.
#[derive(Clone, Debug)]
pub struct TypicalityTest {
    n: usize,
    shape: Vec<usize>,
    lo: Vec<u32>,
    hi: Vec<u32>,
}

impl TypicalityTest {
    pub fn new(p: &JointPmf, n: usize, delta: f64) -> Result<Self> {
        Self::from_mass(p.mass(), p.shape(), n, delta)
    }

    pub(crate) fn from_mass(mass: &[f64], shape: Vec<usize>, n: usize, delta: f64) -> Result<Self> {
        if n == 0 || delta.is_nan() || delta <= 0.0 {
            return Err(Error::InvalidArgument("typicality needs n >= 1 and delta > 0".into()));
        }
        let nf = n as f64;
        let (lo, hi) = mass
            .iter()
            .map(|&p| {
                if p <= 0.0 {
                    return (0, 0);
                }
                let lo = (nf * (p - delta) - BOUND_EPS).ceil().max(0.0);
                let hi = (nf * (p + delta) + BOUND_EPS).floor().min(nf);
                (lo as u32, hi as u32)
            })
            .unzip();
        Ok(Self { n, shape, lo, hi })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    /// Test a stream of flat cell indices, stopping at the first cell whose
    /// count exceeds its upper bound. `counts` is scratch of the cell count.
    pub fn check_cells<I: IntoIterator<Item = usize>>(&self, cells: I, counts: &mut Vec<u32>) -> bool {
        counts.clear();
        counts.resize(self.hi.len(), 0);
        let mut len = 0usize;
        for c in cells {
            counts[c] += 1;
            if counts[c] > self.hi[c] {
                return false;
            }
            len += 1;
        }
        debug_assert_eq!(len, self.n);
        counts.iter().zip(&self.lo).all(|(c, l)| c >= l)
    }

    /// Test a tuple of equal-length sequences, one per axis.
    pub fn check(&self, seqs: &[&[Symbol]]) -> Result<bool> {
        validate(seqs, &self.shape)?;
        if seqs[0].len() != self.n {
            return Err(Error::LengthMismatch(vec![seqs[0].len(), self.n]));
        }
        let st = strides(&self.shape);
        let mut counts = Vec::new();
        Ok(self.check_cells(
            (0..self.n).map(|i| seqs.iter().zip(&st).map(|(s, k)| s[i] as usize * k).sum()),
            &mut counts,
        ))
    }
}

fn validate(seqs: &[&[Symbol]], shape: &[usize]) -> Result<()> {
    if seqs.len() != shape.len() {
        return Err(Error::AxisCount {
            expected: shape.len(),
            got: seqs.len(),
        });
    }
    let lens: Vec<usize> = seqs.iter().map(|s| s.len()).collect();
    if lens.is_empty() || lens[0] == 0 || lens.iter().any(|&l| l != lens[0]) {
        return Err(Error::LengthMismatch(lens));
    }
    for (s, &k) in seqs.iter().zip(shape) {
        if s.iter().any(|&v| v as usize >= k) {
            return Err(Error::InvalidArgument("symbol outside its alphabet".into()));
        }
    }
    Ok(())
}

/// Joint empirical type (relative frequencies, row-major over `shape`).
pub fn empirical_type(seqs: &[&[Symbol]], shape: &[usize]) -> Result<Vec<f64>> {
    validate(seqs, shape)?;
    let st = strides(shape);
    let n = seqs[0].len();
    let mut t = vec![0.0; shape.iter().product()];
    for i in 0..n {
        let c: usize = seqs.iter().zip(&st).map(|(s, k)| s[i] as usize * k).sum();
        t[c] += 1.0;
    }
    t.iter_mut().for_each(|v| *v /= n as f64);
    Ok(t)
}

/// Strong joint typicality of `seqs` (one sequence per axis of `p`).
pub fn is_jointly_typical(seqs: &[&[Symbol]], p: &JointPmf, delta: f64) -> Result<bool> {
    validate(seqs, &p.shape())?;
    TypicalityTest::new(p, seqs[0].len(), delta)?.check(seqs)
}
