//! Entropy and (conditional) mutual information, in bits.

use super::pmf::JointPmf;
use crate::error::{Error, Result};

pub(crate) fn entropy_of(mass: &[f64]) -> f64 {
    let h: f64 = mass
        .iter()
        .map(|&p| {
            let p = p.max(0.0);
            if p > 0.0 {
                -p * p.log2()
            } else {
                0.0
            }
        })
        .sum();
    h.max(0.0)
}

/// Joint entropy over all axes of `p`.
pub fn entropy(p: &JointPmf) -> f64 {
    entropy_of(p.mass())
}

/// Entropy of the marginal on an axis set. The empty set has entropy 0.
/// Duplicate axes are merged, so `H(A ∪ A) = H(A)`.
pub(crate) fn entropy_on(p: &JointPmf, axes: &[usize]) -> f64 {
    let mut keep: Vec<usize> = axes.to_vec();
    keep.sort_unstable();
    keep.dedup();
    if keep.is_empty() {
        return 0.0;
    }
    entropy_of(&p.marginal_mass(&keep))
}

/// `I(A;B|C)` for axis groups of a single joint, with set-union semantics
/// so that `I(X;X|Z) = H(X|Z)`. Clamped at zero.
pub(crate) fn cmi_axes(p: &JointPmf, a: &[usize], b: &[usize], c: &[usize]) -> f64 {
    let union = |s: &[&[usize]]| -> Vec<usize> { s.iter().flat_map(|v| v.iter().copied()).collect() };
    let hac = entropy_on(p, &union(&[a, c]));
    let hbc = entropy_on(p, &union(&[b, c]));
    let hc = entropy_on(p, c);
    let habc = entropy_on(p, &union(&[a, b, c]));
    (hac + hbc - hc - habc).max(0.0)
}

/// `H(A|C)` for axis groups.
pub(crate) fn cond_entropy_axes(p: &JointPmf, a: &[usize], c: &[usize]) -> f64 {
    let ac: Vec<usize> = a.iter().chain(c).copied().collect();
    (entropy_on(p, &ac) - entropy_on(p, c)).max(0.0)
}

fn expect_rank(p: &JointPmf, n: usize) -> Result<()> {
    if p.rank() != n {
        return Err(Error::AxisCount {
            expected: n,
            got: p.rank(),
        });
    }
    Ok(())
}

/// `I(A;B)` for a two-axis pmf.
pub fn mutual_information(p: &JointPmf) -> Result<f64> {
    expect_rank(p, 2)?;
    Ok(cmi_axes(p, &[0], &[1], &[]))
}

/// `I(A;B|C)` for a three-axis pmf ordered `(A, B, C)`.
pub fn conditional_mutual_information(p: &JointPmf) -> Result<f64> {
    expect_rank(p, 3)?;
    Ok(cmi_axes(p, &[0], &[1], &[2]))
}

/// Tests `A - B - C` for a three-axis pmf ordered `(A, B, C)`: `I(A;C|B) <= tol`.
pub fn is_markov_chain(p: &JointPmf, tol: f64) -> Result<bool> {
    expect_rank(p, 3)?;
    Ok(cmi_axes(p, &[0], &[2], &[1]) <= tol)
}
