//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use sirefine::{Alphabet, CondPmf, JointPmf, SourceSpec};

pub fn h2(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        0.0
    } else {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }
}

/// `-Σ p log2 p` over a flat table.
pub fn entropy_of(mass: &[f64]) -> f64 {
    mass.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.log2()).sum()
}

/// Minimum rate at Hamming distortion `d` for a binary source `(1-p, p)`,
/// by Blahut-Arimoto alternating minimization with a bisection on slope.
pub fn rate_distortion_ba(p1: f64, d: f64) -> f64 {
    let px = [1.0 - p1, p1];
    let run = |beta: f64| -> (f64, f64) {
        let mut q = [0.5, 0.5];
        let mut cond = [[0.0; 2]; 2];
        for _ in 0..5000 {
            for x in 0..2 {
                let w: Vec<f64> = (0..2)
                    .map(|xh| q[xh] * (-beta * if x == xh { 0.0 } else { 1.0 }).exp())
                    .collect();
                let s = w[0] + w[1];
                cond[x] = [w[0] / s, w[1] / s];
            }
            q = [
                px[0] * cond[0][0] + px[1] * cond[1][0],
                px[0] * cond[0][1] + px[1] * cond[1][1],
            ];
        }
        let mut dist = 0.0;
        let mut rate = 0.0;
        for x in 0..2 {
            for xh in 0..2 {
                let j = px[x] * cond[x][xh];
                if x != xh {
                    dist += j;
                }
                if j > 0.0 {
                    rate += j * (cond[x][xh] / q[xh]).log2();
                }
            }
        }
        (dist, rate)
    };
    let (mut lo, mut hi) = (0.0f64, 60.0f64);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if run(mid).0 > d {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    run(hi).1
}

pub fn random_row<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

pub fn random_stochastic<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Vec<f64> {
    (0..rows).flat_map(|_| random_row(rng, cols)).collect()
}

pub fn axes(labels: &[&str], sizes: &[usize]) -> Vec<Alphabet> {
    labels
        .iter()
        .zip(sizes)
        .map(|(l, &s)| Alphabet::new(*l, s).unwrap())
        .collect()
}

pub fn random_joint<R: Rng>(rng: &mut R, sizes: &[usize]) -> JointPmf {
    let labels = ["A", "B", "C", "D", "E"];
    let n: usize = sizes.iter().product();
    JointPmf::new(axes(&labels[..sizes.len()], sizes), random_row(rng, n)).unwrap()
}

/// Binary degraded source with random crossovers and a random prior.
pub fn random_degraded_binary<R: Rng>(rng: &mut R) -> SourceSpec {
    let p = 0.15 + 0.7 * rng.random::<f64>();
    let a = 0.02 + 0.3 * rng.random::<f64>();
    let b = 0.02 + 0.3 * rng.random::<f64>();
    SourceSpec::degraded(&[1.0 - p, p], &[1.0 - a, a, a, 1.0 - a], 2, &[1.0 - b, b, b, 1.0 - b], 2).unwrap()
}

/// Binary symmetric source with `Z = BSC(a)` of `X` and `Y = BSC(b)` of `Z`.
pub fn degraded_bss(a: f64, b: f64) -> SourceSpec {
    SourceSpec::degraded(&[0.5, 0.5], &[1.0 - a, a, a, 1.0 - a], 2, &[1.0 - b, b, b, 1.0 - b], 2).unwrap()
}

/// `P(X)` times a flat conditional table, computed cell by cell.
pub fn joint_with(px: &[f64], cond: &CondPmf) -> Vec<f64> {
    let cols = cond.cols();
    let mut out = Vec::with_capacity(px.len() * cols);
    for (x, &p) in px.iter().enumerate() {
        for c in 0..cols {
            out.push(p * cond.row(x)[c]);
        }
    }
    out
}

/// Sum of `mass` over flat cells grouped by `key(cell)`.
pub fn marginal_by<F: Fn(&[usize]) -> usize>(mass: &[f64], shape: &[usize], groups: usize, key: F) -> Vec<f64> {
    let mut out = vec![0.0; groups];
    let mut cell = vec![0usize; shape.len()];
    for &m in mass {
        out[key(&cell)] += m;
        for a in (0..shape.len()).rev() {
            cell[a] += 1;
            if cell[a] < shape[a] {
                break;
            }
            cell[a] = 0;
        }
    }
    out
}

/// `I(A;B|C)` from scratch, with `A`, `B`, `C` given as axis lists of the
/// table `mass` with `shape`.
pub fn cmi(mass: &[f64], shape: &[usize], a: &[usize], b: &[usize], c: &[usize]) -> f64 {
    let h = |axes: &[usize]| {
        let mut ax: Vec<usize> = axes.to_vec();
        ax.sort_unstable();
        ax.dedup();
        let sizes: Vec<usize> = ax.iter().map(|&i| shape[i]).collect();
        let groups: usize = sizes.iter().product();
        let m = marginal_by(mass, shape, groups, |cell| {
            ax.iter().zip(&sizes).fold(0, |acc, (&i, &s)| acc * s + cell[i])
        });
        entropy_of(&m)
    };
    let cat = |x: &[usize], y: &[usize]| [x, y].concat();
    (h(&cat(a, c)) + h(&cat(b, c)) - h(&cat(&cat(a, b), c)) - h(c)).max(0.0)
}
