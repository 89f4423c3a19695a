//! Deterministic reconstruction maps and their Bayes-optimal synthesis.
//!
//! A decoder sees a tuple of symbols (side information plus auxiliary
//! codeword symbols) and emits one reconstruction symbol. For a given joint
//! law of `(X, args)`, the optimal map picks, for each argument tuple, the
//! reconstruction minimizing `Σ_x P(x, args) d(x, x̂)`; ties go to the
//! lowest index.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::pmf::strides;
use crate::prob::{DistortionMatrix, JointPmf};

/// Costs closer than this are treated as ties.
const TIE_EPS: f64 = 1e-12;

#[derive(Deserialize)]
struct RawDecoder {
    args: Vec<String>,
    arg_sizes: Vec<usize>,
    out_size: usize,
    map: Vec<u16>,
}

impl TryFrom<RawDecoder> for DecoderTable {
    type Error = Error;
    fn try_from(r: RawDecoder) -> Result<Self> {
        Self::new(r.args, r.arg_sizes, r.out_size, r.map)
    }
}

/// A total deterministic map from an argument tuple to a reconstruction symbol.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawDecoder")]
pub struct DecoderTable {
    /// Argument names, e.g. `["Y", "W1"]`.
    pub args: Vec<String>,
    pub arg_sizes: Vec<usize>,
    pub out_size: usize,
    /// Row-major over `arg_sizes` (last argument fastest).
    pub map: Vec<u16>,
}

impl DecoderTable {
    pub fn new(args: Vec<String>, arg_sizes: Vec<usize>, out_size: usize, map: Vec<u16>) -> Result<Self> {
        let rows: usize = arg_sizes.iter().product();
        if args.len() != arg_sizes.len() || map.len() != rows {
            return Err(Error::ShapeMismatch {
                expected: rows,
                got: map.len(),
            });
        }
        if map.iter().any(|&m| m as usize >= out_size) {
            return Err(Error::InvalidArgument("decoder output outside its alphabet".into()));
        }
        Ok(Self {
            args,
            arg_sizes,
            out_size,
            map,
        })
    }

    /// Map every argument tuple to `out`.
    pub fn constant(args: Vec<String>, arg_sizes: Vec<usize>, out_size: usize, out: u16) -> Result<Self> {
        let rows = arg_sizes.iter().product();
        Self::new(args, arg_sizes, out_size, vec![out; rows])
    }

    /// Output equals argument `k` (its alphabet must fit in the output).
    pub fn project(args: Vec<String>, arg_sizes: Vec<usize>, out_size: usize, k: usize) -> Result<Self> {
        if k >= arg_sizes.len() || arg_sizes[k] > out_size {
            return Err(Error::InvalidArgument("projection argument out of range".into()));
        }
        let st = strides(&arg_sizes);
        let rows: usize = arg_sizes.iter().product();
        let map = (0..rows).map(|r| ((r / st[k]) % arg_sizes[k]) as u16).collect();
        Self::new(args, arg_sizes, out_size, map)
    }

    pub fn row_index(&self, args: &[usize]) -> usize {
        args.iter()
            .zip(&self.arg_sizes)
            .fold(0, |acc, (&a, &s)| acc * s + a)
    }

    pub fn apply(&self, args: &[usize]) -> usize {
        self.map[self.row_index(args)] as usize
    }
}

/// `P(args, x)` laid out with `x` fastest: `m[row * |X| + x]`.
fn arg_x_table(joint: &JointPmf, x_axis: usize, args: &[usize]) -> Vec<f64> {
    let mut keep = args.to_vec();
    keep.push(x_axis);
    joint.marginal_mass(&keep)
}

fn check_axes(joint: &JointPmf, x_axis: usize, args: &[usize], d: &DistortionMatrix) -> Result<()> {
    if x_axis >= joint.rank() || args.iter().any(|&a| a >= joint.rank() || a == x_axis) {
        return Err(Error::InvalidSelection);
    }
    if joint.axes()[x_axis].size() != d.rows().size() {
        return Err(Error::AlphabetMismatch(format!(
            "source axis has {} symbols, distortion has {} rows",
            joint.axes()[x_axis].size(),
            d.rows().size()
        )));
    }
    Ok(())
}

/// Bayes-optimal decoder for argument axes `args` of `joint`, plus its
/// expected distortion.
pub fn synthesize(
    joint: &JointPmf,
    x_axis: usize,
    args: &[usize],
    d: &DistortionMatrix,
) -> Result<(DecoderTable, f64)> {
    check_axes(joint, x_axis, args, d)?;
    let nx = d.rows().size();
    let nc = d.cols().size();
    let m = arg_x_table(joint, x_axis, args);
    let mut map = Vec::with_capacity(m.len() / nx);
    let mut total = 0.0;
    for row in m.chunks(nx) {
        let mut best = 0usize;
        let mut best_cost = f64::INFINITY;
        for c in 0..nc {
            let cost: f64 = row.iter().enumerate().map(|(x, p)| p * d.get(x, c)).sum();
            if cost < best_cost - TIE_EPS {
                best = c;
                best_cost = cost;
            }
        }
        total += best_cost;
        map.push(best as u16);
    }
    let names = args.iter().map(|&a| joint.axes()[a].label().to_string()).collect();
    let sizes = args.iter().map(|&a| joint.axes()[a].size()).collect();
    Ok((DecoderTable::new(names, sizes, nc, map)?, total))
}

/// Expected distortion of a fixed decoder table on `joint`.
pub fn table_distortion(
    joint: &JointPmf,
    x_axis: usize,
    args: &[usize],
    d: &DistortionMatrix,
    table: &DecoderTable,
) -> Result<f64> {
    check_axes(joint, x_axis, args, d)?;
    let sizes: Vec<usize> = args.iter().map(|&a| joint.axes()[a].size()).collect();
    if sizes != table.arg_sizes || table.out_size != d.cols().size() {
        return Err(Error::AlphabetMismatch(format!(
            "decoder expects arguments {:?} -> {}, joint/distortion give {:?} -> {}",
            table.arg_sizes,
            table.out_size,
            sizes,
            d.cols().size()
        )));
    }
    let nx = d.rows().size();
    let m = arg_x_table(joint, x_axis, args);
    Ok(m.chunks(nx)
        .zip(&table.map)
        .map(|(row, &c)| row.iter().enumerate().map(|(x, p)| p * d.get(x, c as usize)).sum::<f64>())
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::{compose, Alphabet, CondPmf};

    fn ax(l: &str, n: usize) -> Alphabet {
        Alphabet::new(l, n).unwrap()
    }

    #[test]
    fn copy_argument_is_recovered() {
        let x = ax("X", 3);
        let p = compose(
            &JointPmf::new(vec![x.clone()], vec![0.2, 0.3, 0.5]).unwrap(),
            &CondPmf::deterministic(vec![x.clone()], vec![ax("W", 3)], &[0, 1, 2]).unwrap(),
        )
        .unwrap();
        let d = DistortionMatrix::hamming(x.clone(), ax("Xh", 3));
        let (t, dist) = synthesize(&p, 0, &[1], &d).unwrap();
        assert_eq!(t.map, vec![0, 1, 2]);
        assert_eq!(dist, 0.0);
        assert_eq!(table_distortion(&p, 0, &[1], &d, &t).unwrap(), 0.0);
    }

    #[test]
    fn ties_choose_lowest_index() {
        let x = ax("X", 2);
        let p = JointPmf::uniform(vec![x.clone()]);
        let d = DistortionMatrix::hamming(x.clone(), ax("Xh", 2));
        let (t, dist) = synthesize(&p, 0, &[], &d).unwrap();
        assert_eq!(t.map, vec![0]);
        assert!((dist - 0.5).abs() < 1e-15);
    }

    #[test]
    fn projection_helper() {
        let t = DecoderTable::project(vec!["Y".into(), "W".into()], vec![2, 3], 3, 1).unwrap();
        assert_eq!(t.apply(&[1, 2]), 2);
        assert_eq!(t.apply(&[0, 1]), 1);
        assert!(DecoderTable::project(vec!["Y".into()], vec![4], 3, 0).is_err());
    }
}
