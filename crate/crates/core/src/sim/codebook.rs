//! Codebook storage, conditional codeword generation and random binning.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::prob::pmf::strides;
use crate::prob::{JointPmf, Symbol, TypicalityTest};

/// Draws one symbol of a child variable given its parents' symbols.
/// Parent combinations with zero probability fall back to uniform.
#[derive(Clone, Debug)]
pub struct ConditionalSampler {
    parent_sizes: Vec<usize>,
    rows: Vec<WeightedIndex<f64>>,
}

impl ConditionalSampler {
    /// `joint` is marginalized onto `parents` followed by `child`.
    pub fn new(joint: &JointPmf, parents: &[usize], child: usize) -> Self {
        let mut keep = parents.to_vec();
        keep.push(child);
        let m = joint.marginal_mass(&keep);
        let shape = joint.shape();
        let parent_sizes: Vec<usize> = parents.iter().map(|&p| shape[p]).collect();
        let cs = shape[child];
        let rows = m
            .chunks(cs)
            .map(|row| {
                if row.iter().sum::<f64>() > 0.0 {
                    WeightedIndex::new(row.iter().map(|v| v.max(0.0))).expect("positive row")
                } else {
                    WeightedIndex::new(vec![1.0; cs]).expect("uniform")
                }
            })
            .collect();
        Self { parent_sizes, rows }
    }

    /// Fill `out` coordinate-wise given the parent sequences.
    pub fn sample_seq<R: Rng + ?Sized>(&self, parents: &[&[Symbol]], out: &mut [Symbol], rng: &mut R) {
        for (i, o) in out.iter_mut().enumerate() {
            let row = parents
                .iter()
                .zip(&self.parent_sizes)
                .fold(0usize, |acc, (p, &s)| acc * s + p[i] as usize);
            *o = self.rows[row].sample(rng) as Symbol;
        }
    }
}

/// Strong-typicality check of a tuple of sequences against a fixed marginal
/// of the composed joint.
#[derive(Clone, Debug)]
pub struct TupleTest {
    test: TypicalityTest,
    strides: Vec<usize>,
}

impl TupleTest {
    pub fn new(joint: &JointPmf, axes: &[usize], n: usize, delta: f64) -> crate::Result<Self> {
        let m = joint.marginalize(axes)?;
        let shape = m.shape();
        Ok(Self {
            test: TypicalityTest::new(&m, n, delta)?,
            strides: strides(&shape),
        })
    }

    /// `seqs` in the order of the axes given at construction.
    pub fn check(&self, seqs: &[&[Symbol]], counts: &mut Vec<u32>) -> bool {
        let n = self.test.n();
        let st = &self.strides;
        self.test.check_cells(
            (0..n).map(|i| seqs.iter().zip(st).map(|(s, k)| s[i] as usize * k).sum()),
            counts,
        )
    }
}

/// Balanced partition of `0..size` into `bins` groups after a random
/// permutation: group sizes differ by at most one.
pub fn random_bins<R: Rng + ?Sized>(size: usize, bins: usize, rng: &mut R) -> Binning {
    let mut perm: Vec<u32> = (0..size as u32).collect();
    perm.shuffle(rng);
    Binning::split(&perm, bins.clamp(1, size.max(1)))
}

/// A partition of codeword indices into bins.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Binning {
    pub bin_of: Vec<u32>,
    pub members: Vec<Vec<u32>>,
}

impl Binning {
    /// Contiguous balanced split of `order` into `bins` groups.
    pub fn split(order: &[u32], bins: usize) -> Self {
        let size = order.len();
        let mut bin_of = vec![0u32; size];
        let mut members = Vec::with_capacity(bins);
        let base = size / bins;
        let extra = size % bins;
        let mut pos = 0;
        for b in 0..bins {
            let len = base + usize::from(b < extra);
            let group: Vec<u32> = order[pos..pos + len].to_vec();
            for &c in &group {
                bin_of[c as usize] = b as u32;
            }
            members.push(group);
            pos += len;
        }
        Self { bin_of, members }
    }

    pub fn bins(&self) -> usize {
        self.members.len()
    }

    /// Every index lies in exactly one bin, and bin sizes sum to the total.
    pub fn is_partition(&self) -> bool {
        let total: usize = self.members.iter().map(Vec::len).sum();
        if total != self.bin_of.len() {
            return false;
        }
        let mut seen = vec![false; total];
        for (b, m) in self.members.iter().enumerate() {
            for &c in m {
                let c = c as usize;
                if c >= total || seen[c] || self.bin_of[c] as usize != b {
                    return false;
                }
                seen[c] = true;
            }
        }
        true
    }
}

/// `M` codewords of length `n`, stored contiguously.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Codebook {
    n: usize,
    data: Vec<Symbol>,
}

impl Codebook {
    pub fn with_capacity(n: usize, size: usize) -> Self {
        Self {
            n,
            data: Vec::with_capacity(n * size),
        }
    }

    pub fn push_with(&mut self, f: impl FnOnce(&mut [Symbol])) {
        let start = self.data.len();
        self.data.resize(start + self.n, 0);
        f(&mut self.data[start..]);
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, k: usize) -> &[Symbol] {
        &self.data[k * self.n..(k + 1) * self.n]
    }
}

/// `ceil(2^{n·exponent})`, saturating, as `u128`, together with its log2.
pub fn nominal_size(n: usize, exponent: f64) -> (f64, u128) {
    let log2 = n as f64 * exponent.max(0.0);
    let size = if log2 >= 127.0 {
        u128::MAX
    } else {
        (log2.exp2() - 1e-9).ceil().max(1.0) as u128
    };
    (log2, size)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn bins_partition_exactly() {
        let mut rng = rng_from_seed(3);
        for (size, bins) in [(10, 3), (7, 7), (5, 9), (1, 1), (100, 1)] {
            let b = random_bins(size, bins, &mut rng);
            assert!(b.is_partition());
            assert_eq!(b.bins(), bins.min(size));
            let lens: Vec<usize> = b.members.iter().map(Vec::len).collect();
            let (lo, hi) = (lens.iter().min().unwrap(), lens.iter().max().unwrap());
            assert!(hi - lo <= 1);
        }
    }

    #[test]
    fn nominal_sizes_round_up() {
        assert_eq!(nominal_size(10, 0.0).1, 1);
        assert_eq!(nominal_size(10, 0.1).1, 2);
        assert_eq!(nominal_size(10, 0.15).1, 3);
        assert_eq!(nominal_size(1000, 1.0).1, u128::MAX);
    }
}
