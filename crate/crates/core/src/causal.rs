//! Rate region for causal side information.
//!
//! A point `(R1, ΔR)` is achievable at distortion `D` iff some channel
//! `P(W1, W2 | X)` and decoders `ĝ_y1(Y, W1)`, `ĝ_z1(Z, W1)`,
//! `ĝ_y2(Y, W1, W2)`, `ĝ_z2(Z, W1, W2)` meet `D` with
//! `R1 >= I(X; W1)` and `ΔR >= I(X; W2 | W1)`. Conditioning the auxiliary
//! channel on `X` alone makes `(W1, W2) - X - (Y, Z)` hold by construction.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decoder::{synthesize, table_distortion, DecoderTable};
use crate::error::{Error, Result};
use crate::family::{fixed, free_uniform, FactorKind, FactoredAux, Parent};
use crate::prob::info::{cmi_axes, entropy_on};
use crate::prob::{compose, Alphabet, CondPmf, DistortionQuad, JointPmf, SourceSpec};
use crate::search::{descend, pareto, weighted_runs, Evaluation, SearchConfig};

/// Joint axis positions after composing the source with a causal channel.
pub mod axis {
    pub const X: usize = 0;
    pub const Y: usize = 1;
    pub const Z: usize = 2;
    pub const W1: usize = 3;
    pub const W2: usize = 4;
}

/// Decoder argument axes, in `DistortionQuad` order.
pub(crate) const DECODER_ARGS: [&[usize]; 4] = [
    &[axis::Y, axis::W1],
    &[axis::Z, axis::W1],
    &[axis::Y, axis::W1, axis::W2],
    &[axis::Z, axis::W1, axis::W2],
];

/// Largest `|W1|` allowed for a source alphabet of size `nx`.
pub fn w1_cap(nx: usize) -> usize {
    nx + 5
}

/// Largest `|W2|` allowed given `|X|` and `|W1|`.
pub fn w2_cap(nx: usize, w1: usize) -> usize {
    nx * w1 + 2
}

#[derive(Deserialize)]
struct RawCausalAux {
    w1_size: usize,
    w2_size: usize,
    cond: CondPmf,
}

/// `P(W1, W2 | X)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCausalAux")]
pub struct CausalAuxChannel {
    w1_size: usize,
    w2_size: usize,
    cond: CondPmf,
}

impl TryFrom<RawCausalAux> for CausalAuxChannel {
    type Error = Error;
    fn try_from(r: RawCausalAux) -> Result<Self> {
        let c = Self::new(r.cond)?;
        if c.w1_size != r.w1_size || c.w2_size != r.w2_size {
            return Err(Error::AlphabetMismatch(
                "w1_size/w2_size disagree with the conditional table".into(),
            ));
        }
        Ok(c)
    }
}

impl CausalAuxChannel {
    /// `cond` must map a single `X` axis to `(W1, W2)`.
    pub fn new(cond: CondPmf) -> Result<Self> {
        if cond.from_axes().len() != 1 || cond.to_axes().len() != 2 {
            return Err(Error::AlphabetMismatch(
                "causal auxiliary channel must map X to (W1, W2)".into(),
            ));
        }
        let nx = cond.from_axes()[0].size();
        let (w1, w2) = (cond.to_axes()[0].size(), cond.to_axes()[1].size());
        if w1 > w1_cap(nx) || w2 > w2_cap(nx, w1) {
            return Err(Error::InvalidArgument(format!(
                "auxiliary sizes ({w1}, {w2}) exceed the caps ({}, {})",
                w1_cap(nx),
                w2_cap(nx, w1)
            )));
        }
        let from = vec![Alphabet::new("X", nx)?];
        let to = vec![Alphabet::new("W1", w1)?, Alphabet::new("W2", w2)?];
        let cond = CondPmf::new(from, to, cond.mass().to_vec())?;
        Ok(Self {
            w1_size: w1,
            w2_size: w2,
            cond,
        })
    }

    /// Build from `P(w1 | x)` (rows by `x`) and `P(w2 | x, w1)` (rows by `(x, w1)`).
    pub fn from_tables(nx: usize, w1: usize, w2: usize, w1_given_x: &[f64], w2_given_xw1: &[f64]) -> Result<Self> {
        let sizes = [w1, w2];
        let aux = FactoredAux::new(
            nx,
            vec!["W1".into(), "W2".into()],
            sizes.to_vec(),
            vec![
                crate::family::Factor {
                    var: 0,
                    parents: vec![Parent::X],
                    kind: FactorKind::Free(w1_given_x.to_vec()),
                },
                crate::family::Factor {
                    var: 1,
                    parents: vec![Parent::X, Parent::Var(0)],
                    kind: FactorKind::Free(w2_given_xw1.to_vec()),
                },
            ],
        )?;
        Self::new(aux.to_cond())
    }

    /// `W1 = W2 = 0`.
    pub fn constant(nx: usize) -> Result<Self> {
        Self::from_factored(&const_family(nx, 1, 1)?)
    }

    /// `W1 = W2 = X`.
    pub fn copy(nx: usize) -> Result<Self> {
        Self::from_factored(&FactoredAux::new(
            nx,
            vec!["W1".into(), "W2".into()],
            vec![nx, nx],
            vec![fixed(0, FactorKind::CopyX), fixed(1, FactorKind::CopyX)],
        )?)
    }

    pub fn from_factored(aux: &FactoredAux) -> Result<Self> {
        Self::new(aux.to_cond())
    }

    pub fn w1_size(&self) -> usize {
        self.w1_size
    }

    pub fn w2_size(&self) -> usize {
        self.w2_size
    }

    pub fn x_size(&self) -> usize {
        self.cond.from_axes()[0].size()
    }

    pub fn cond(&self) -> &CondPmf {
        &self.cond
    }
}

/// The four causal decoders.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CausalDecoderRuleSet {
    pub g_y1: DecoderTable,
    pub g_z1: DecoderTable,
    pub g_y2: DecoderTable,
    pub g_z2: DecoderTable,
}

impl CausalDecoderRuleSet {
    pub fn tables(&self) -> [&DecoderTable; 4] {
        [&self.g_y1, &self.g_z1, &self.g_y2, &self.g_z2]
    }
}

/// One evaluated point of the causal region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CausalRegionPoint {
    pub r1: f64,
    pub delta_r: f64,
    pub achieved: DistortionQuad,
    pub aux: CausalAuxChannel,
    pub decoders: CausalDecoderRuleSet,
}

fn check_source(source: &SourceSpec, aux: &CausalAuxChannel) -> Result<()> {
    if aux.x_size() != source.x_size() {
        return Err(Error::AlphabetMismatch(format!(
            "auxiliary channel expects |X| = {}, source has {}",
            aux.x_size(),
            source.x_size()
        )));
    }
    Ok(())
}

/// `P(X, Y, Z, W1, W2)`.
pub fn causal_joint(source: &SourceSpec, aux: &CausalAuxChannel) -> Result<JointPmf> {
    check_source(source, aux)?;
    compose(source.pxyz(), &aux.cond)
}

/// `(I(X;W1), I(X;W2|W1))` on a composed joint.
pub fn causal_rates(joint: &JointPmf) -> (f64, f64) {
    (
        cmi_axes(joint, &[axis::X], &[axis::W1], &[]),
        cmi_axes(joint, &[axis::X], &[axis::W2], &[axis::W1]),
    )
}

fn synthesize_all(source: &SourceSpec, joint: &JointPmf) -> Result<(CausalDecoderRuleSet, DistortionQuad)> {
    let mut tables = Vec::with_capacity(4);
    let mut dist = [0.0; 4];
    for (k, args) in DECODER_ARGS.iter().enumerate() {
        let (t, d) = synthesize(joint, axis::X, args, &source.distortions()[k])?;
        tables.push(t);
        dist[k] = d;
    }
    let mut it = tables.into_iter();
    let rules = CausalDecoderRuleSet {
        g_y1: it.next().expect("4"),
        g_z1: it.next().expect("4"),
        g_y2: it.next().expect("4"),
        g_z2: it.next().expect("4"),
    };
    Ok((rules, DistortionQuad::from_array(dist)))
}

/// Rates and achieved distortions for a fixed channel and decoder set.
pub fn evaluate_causal(
    source: &SourceSpec,
    aux: &CausalAuxChannel,
    dec: &CausalDecoderRuleSet,
) -> Result<CausalRegionPoint> {
    let joint = causal_joint(source, aux)?;
    let (r1, delta_r) = causal_rates(&joint);
    let mut dist = [0.0; 4];
    for (k, (args, table)) in DECODER_ARGS.iter().zip(dec.tables()).enumerate() {
        dist[k] = table_distortion(&joint, axis::X, args, &source.distortions()[k], table)?;
    }
    Ok(CausalRegionPoint {
        r1,
        delta_r,
        achieved: DistortionQuad::from_array(dist),
        aux: aux.clone(),
        decoders: dec.clone(),
    })
}

/// Bayes-optimal decoders for every stage and decoder.
pub fn optimal_decoders(source: &SourceSpec, aux: &CausalAuxChannel) -> Result<CausalDecoderRuleSet> {
    let joint = causal_joint(source, aux)?;
    Ok(synthesize_all(source, &joint)?.0)
}

/// Evaluate a channel under its optimal decoders.
pub fn evaluate_optimal(source: &SourceSpec, aux: &CausalAuxChannel) -> Result<CausalRegionPoint> {
    let joint = causal_joint(source, aux)?;
    let (r1, delta_r) = causal_rates(&joint);
    let (decoders, achieved) = synthesize_all(source, &joint)?;
    Ok(CausalRegionPoint {
        r1,
        delta_r,
        achieved,
        aux: aux.clone(),
        decoders,
    })
}

/// Default search sizes: `|W1| = min(|X|+5, max(cap, |X|))`,
/// `|W2| = min(|X|·|W1|+2, max(cap, |X|))`.
pub fn default_sizes(nx: usize, cap: usize) -> (usize, usize) {
    let c = cap.max(nx);
    let w1 = w1_cap(nx).min(c);
    (w1, w2_cap(nx, w1).min(c))
}

fn const_family(nx: usize, w1: usize, w2: usize) -> Result<FactoredAux> {
    FactoredAux::new(
        nx,
        vec!["W1".into(), "W2".into()],
        vec![w1, w2],
        vec![fixed(0, FactorKind::Const), fixed(1, FactorKind::Const)],
    )
}

/// Search family: `W1 | X` and `W2 | X, W1` free.
pub fn search_family(nx: usize, w1: usize, w2: usize) -> Result<FactoredAux> {
    let sizes = [w1, w2];
    FactoredAux::new(
        nx,
        vec!["W1".into(), "W2".into()],
        sizes.to_vec(),
        vec![
            free_uniform(nx, &sizes, 0, vec![Parent::X]),
            free_uniform(nx, &sizes, 1, vec![Parent::X, Parent::Var(0)]),
        ],
    )
}

fn quick_eval(source: &SourceSpec, aux: &FactoredAux) -> Evaluation {
    let joint = compose(source.pxyz(), &aux.to_cond()).expect("family matches source");
    let (r1, dr) = causal_rates(&joint);
    let mut dist = [0.0; 4];
    for (k, args) in DECODER_ARGS.iter().enumerate() {
        dist[k] = synthesize(&joint, axis::X, args, &source.distortions()[k])
            .expect("axes valid")
            .1;
    }
    Evaluation {
        rates: [r1, dr],
        achieved: DistortionQuad::from_array(dist),
    }
}

/// Distortions reached with `W1 = W2 = X` and optimal decoders; no channel
/// does better on any coordinate.
pub fn best_distortions(source: &SourceSpec) -> Result<DistortionQuad> {
    Ok(evaluate_optimal(source, &CausalAuxChannel::copy(source.x_size())?)?.achieved)
}

fn require_feasible(source: &SourceSpec, target: &DistortionQuad, tol: f64) -> Result<()> {
    if !target.is_valid() {
        return Err(Error::InvalidArgument("distortion target must be >= 0".into()));
    }
    let best = best_distortions(source)?;
    if !best.le(target, tol) {
        return Err(Error::InfeasibleTarget {
            target: Box::new(*target),
            best: Box::new(best),
        });
    }
    Ok(())
}

/// Simple channels tried before any search: constant, full copy, and
/// `W1` constant with `W2 = X`.
fn seed_candidates(nx: usize, sizes: (usize, usize)) -> Result<Vec<FactoredAux>> {
    let labels = vec!["W1".to_string(), "W2".to_string()];
    let mut out = vec![const_family(nx, sizes.0, sizes.1)?];
    if sizes.0 >= nx && sizes.1 >= nx {
        out.push(FactoredAux::new(
            nx,
            labels.clone(),
            vec![sizes.0, sizes.1],
            vec![fixed(0, FactorKind::CopyX), fixed(1, FactorKind::CopyX)],
        )?);
    }
    if sizes.1 >= nx {
        out.push(FactoredAux::new(
            nx,
            labels,
            vec![sizes.0, sizes.1],
            vec![fixed(0, FactorKind::Const), fixed(1, FactorKind::CopyX)],
        )?);
    }
    Ok(out)
}

fn to_point(source: &SourceSpec, aux: &FactoredAux) -> Result<CausalRegionPoint> {
    evaluate_optimal(source, &CausalAuxChannel::from_factored(aux)?)
}

/// Sample the lower-left frontier of achievable `(R1, ΔR)` at `target`.
///
/// Every returned point meets the target within `cfg.dist_tol`, and no
/// returned point dominates another.
pub fn min_rates_causal(
    source: &SourceSpec,
    target: &DistortionQuad,
    cfg: &SearchConfig,
) -> Result<Vec<CausalRegionPoint>> {
    let sizes = default_sizes(source.x_size(), cfg.aux_cap);
    min_rates_causal_sized(source, target, cfg, sizes)
}

/// As [`min_rates_causal`] with explicit `(|W1|, |W2|)`.
pub fn min_rates_causal_sized(
    source: &SourceSpec,
    target: &DistortionQuad,
    cfg: &SearchConfig,
    sizes: (usize, usize),
) -> Result<Vec<CausalRegionPoint>> {
    let nx = source.x_size();
    if sizes.0 == 0 || sizes.1 == 0 || sizes.0 > w1_cap(nx) || sizes.1 > w2_cap(nx, sizes.0) {
        return Err(Error::InvalidArgument(format!("auxiliary sizes {sizes:?} outside the caps")));
    }
    require_feasible(source, target, cfg.dist_tol)?;
    let eval = |a: &FactoredAux| quick_eval(source, a);
    let mut found: Vec<(FactoredAux, Evaluation)> = seed_candidates(nx, sizes)?
        .into_iter()
        .map(|a| {
            let e = eval(&a);
            (a, e)
        })
        .filter(|(_, e)| e.achieved.le(target, cfg.dist_tol))
        .collect();
    let template = search_family(nx, sizes.0, sizes.1)?;
    found.extend(
        weighted_runs(&template, target, &eval, cfg, 1)
            .into_iter()
            .map(|f| (f.aux, f.eval)),
    );
    let front = pareto(found, |(_, e)| e.rates, cfg.rate_tol);
    front.iter().map(|(a, _)| to_point(source, a)).collect()
}

/// Exhaustive grid over the probability simplices of `P(W1|X)` and
/// `P(W2|X,W1)` with step `1/resolution`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub w1_size: usize,
    pub w2_size: usize,
    pub resolution: usize,
    /// Refuse grids with more points than this (default 10^6).
    #[serde(default = "default_max_points")]
    pub max_points: u128,
}

fn default_max_points() -> u128 {
    1_000_000
}

impl GridSpec {
    pub fn new(w1_size: usize, w2_size: usize, resolution: usize) -> Self {
        Self {
            w1_size,
            w2_size,
            resolution,
            max_points: default_max_points(),
        }
    }
}

/// All points of the `parts`-simplex with coordinates in multiples of `1/k`.
pub(crate) fn simplex_grid(parts: usize, k: usize) -> Vec<Vec<f64>> {
    fn rec(parts: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for v in 0..=left {
            cur.push(v);
            rec(parts - 1, left - v, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(parts, k, &mut Vec::new(), &mut out);
    out.into_iter()
        .map(|c| c.into_iter().map(|v| v as f64 / k as f64).collect())
        .collect()
}

fn binom(n: u128, k: u128) -> u128 {
    let mut r: u128 = 1;
    for i in 0..k {
        r = r.saturating_mul(n - i) / (i + 1);
    }
    r
}

/// Frontier of all grid channels meeting `target`.
pub fn brute_force_causal(
    source: &SourceSpec,
    target: &DistortionQuad,
    grid: &GridSpec,
) -> Result<Vec<CausalRegionPoint>> {
    let nx = source.x_size();
    let (w1, w2, k) = (grid.w1_size, grid.w2_size, grid.resolution);
    if w1 == 0 || w2 == 0 || k == 0 || w1 > w1_cap(nx) || w2 > w2_cap(nx, w1) {
        return Err(Error::InvalidArgument("grid sizes or resolution out of range".into()));
    }
    let per_row1 = binom((k + w1 - 1) as u128, (w1 - 1) as u128);
    let per_row2 = binom((k + w2 - 1) as u128, (w2 - 1) as u128);
    let points = (0..nx)
        .fold(1u128, |a, _| a.saturating_mul(per_row1))
        .saturating_mul((0..nx * w1).fold(1u128, |a, _| a.saturating_mul(per_row2)));
    if points > grid.max_points {
        return Err(Error::GridTooLarge {
            points,
            cap: grid.max_points,
        });
    }
    let g1 = simplex_grid(w1, k);
    let g2 = simplex_grid(w2, k);
    let rows1 = nx;
    let rows2 = nx * w1;
    let template = search_family(nx, w1, w2)?;
    let feasible: Vec<(usize, Evaluation)> = (0..points as usize)
        .into_par_iter()
        .filter_map(|idx| {
            let aux = grid_point(&template, idx, &g1, &g2, rows1, rows2);
            let e = quick_eval(source, &aux);
            e.achieved.le(target, 1e-12).then_some((idx, e))
        })
        .collect();
    let front = pareto(feasible, |(_, e)| e.rates, 1e-12);
    front
        .iter()
        .map(|(idx, _)| to_point(source, &grid_point(&template, *idx, &g1, &g2, rows1, rows2)))
        .collect()
}

fn grid_point(
    template: &FactoredAux,
    mut idx: usize,
    g1: &[Vec<f64>],
    g2: &[Vec<f64>],
    rows1: usize,
    rows2: usize,
) -> FactoredAux {
    let mut aux = template.clone();
    let mut t1 = Vec::with_capacity(rows1 * g1[0].len());
    for _ in 0..rows1 {
        t1.extend_from_slice(&g1[idx % g1.len()]);
        idx /= g1.len();
    }
    let mut t2 = Vec::with_capacity(rows2 * g2[0].len());
    for _ in 0..rows2 {
        t2.extend_from_slice(&g2[idx % g2.len()]);
        idx /= g2.len();
    }
    *aux.table_mut(0).expect("free") = t1;
    *aux.table_mut(1).expect("free") = t2;
    aux
}

/// Result of a separation test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationOutcome {
    pub achievable: bool,
    /// `(ρ1·C1, ρ2·C2)`.
    pub budgets: [f64; 2],
    /// A channel meeting target and both budgets, when one was found.
    pub witness: Option<CausalRegionPoint>,
    /// Feasible point with the smallest budget excess seen.
    pub closest: CausalRegionPoint,
}

/// Search for a causal code meeting `target` with `I(X;W1) <= ρ1·C1` and
/// `I(X;W2|W1) <= ρ2·C2`.
pub fn separation_check(
    source: &SourceSpec,
    target: &DistortionQuad,
    rho1: f64,
    rho2: f64,
    c1: f64,
    c2: f64,
    cfg: &SearchConfig,
) -> Result<SeparationOutcome> {
    if !(rho1 > 0.0 && rho2 > 0.0 && c1 >= 0.0 && c2 >= 0.0) {
        return Err(Error::InvalidArgument(
            "separation needs rho1, rho2 > 0 and capacities >= 0".into(),
        ));
    }
    require_feasible(source, target, cfg.dist_tol)?;
    let budgets = [rho1 * c1, rho2 * c2];
    let excess = |e: &Evaluation| {
        (e.rates[0] - budgets[0]).max(0.0) + (e.rates[1] - budgets[1]).max(0.0)
    };
    let score = move |e: &Evaluation| excess(e) + 1e-3 * (e.rates[0] + e.rates[1]);
    let within = |e: &Evaluation| e.rates[0] <= budgets[0] + cfg.rate_tol && e.rates[1] <= budgets[1] + cfg.rate_tol;

    let nx = source.x_size();
    let sizes = default_sizes(nx, cfg.aux_cap);
    let eval = |a: &FactoredAux| quick_eval(source, a);
    let mut cands: Vec<(FactoredAux, Evaluation)> = seed_candidates(nx, sizes)?
        .into_iter()
        .map(|a| {
            let e = eval(&a);
            (a, e)
        })
        .filter(|(_, e)| e.achieved.le(target, cfg.dist_tol))
        .collect();
    if !cands.iter().any(|(_, e)| within(e)) {
        let template = search_family(nx, sizes.0, sizes.1)?;
        let runs: Vec<_> = (0..cfg.restarts.max(1))
            .into_par_iter()
            .map(|r| descend(&template, target, &eval, &score, cfg, &[2, r as u64]))
            .collect();
        cands.extend(runs.into_iter().flatten().map(|f| (f.aux, f.eval)));
    }
    let best = cands
        .iter()
        .min_by(|a, b| score(&a.1).total_cmp(&score(&b.1)))
        .expect("copy channel is feasible");
    let closest = to_point(source, &best.0)?;
    let achievable = within(&best.1);
    Ok(SeparationOutcome {
        achievable,
        budgets,
        witness: achievable.then(|| closest.clone()),
        closest,
    })
}

/// `H(X)` of the source, the rate of the copy channel.
pub fn source_entropy(source: &SourceSpec) -> f64 {
    entropy_on(source.pxyz(), &[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h2(p: f64) -> f64 {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }

    #[test]
    fn test_channel_gives_rate_distortion_pair() {
        let s = SourceSpec::without_side_info(&[0.5, 0.5]).unwrap();
        let q = 0.15;
        let aux = CausalAuxChannel::from_tables(2, 2, 1, &[1.0 - q, q, q, 1.0 - q], &[1.0; 4]).unwrap();
        let p = evaluate_optimal(&s, &aux).unwrap();
        assert!((p.r1 - (1.0 - h2(q))).abs() < 1e-12);
        assert!((p.achieved.dy1 - q).abs() < 1e-12);
        assert!(p.delta_r.abs() < 1e-12);
    }

    #[test]
    fn caps_enforced() {
        let c = CondPmf::constant(
            vec![Alphabet::new("X", 2).unwrap()],
            vec![Alphabet::new("W1", 8).unwrap(), Alphabet::new("W2", 1).unwrap()],
            0,
        )
        .unwrap();
        assert!(CausalAuxChannel::new(c).is_err());
    }

    #[test]
    fn grid_counts() {
        assert_eq!(simplex_grid(2, 10).len(), 11);
        assert_eq!(simplex_grid(3, 2).len(), 6);
        assert_eq!(binom(12, 2), 66);
    }
}
