//! Bounds for non-causal, degraded side information (`X - Z - Y`).
//!
//! The auxiliary channel is `P(W1, W2, W3, W4, V | X)`. Decoders see
//! `ĝ_y1(Y, W1)`, `ĝ_z1(Z, W1, W2, V)`, `ĝ_y2(Y, W1, W3, V)` and
//! `ĝ_z2(Z, W1, W2, W3, W4, V)`. Rates use the sum-rate convention: `r2`
//! counts both stages.
//!
//! Outer bound:
//! `R1 >= I(X;W1|Y) + I(X;W2,V|W1,Z)`,
//! `R2 >= I(X;W1,W3,V|Y) + I(X;W2,W4|W1,W3,V,Z)`.
//!
//! Inner bound (requires `W2 - (X,W1,V) - W3`): same `R1`, and
//! `R2 >= I(X;W1,V,W3|Y) + I(X;W2|W1,V,Z) + I(X;W4|W1,W2,W3,V,Z)`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::causal::best_distortions;
use crate::decoder::{synthesize, table_distortion, DecoderTable};
use crate::error::{Error, Result};
use crate::family::{fixed, free_uniform, FactorKind, FactoredAux, Parent};
use crate::prob::info::{cmi_axes, cond_entropy_axes};
use crate::prob::{compose, Alphabet, CondPmf, DistortionQuad, JointPmf, SourceSpec};
use crate::rng::derived_rng;
use crate::search::{pareto, weighted_runs, Evaluation, SearchConfig};

/// Joint axis positions after composing the source with a non-causal channel.
pub mod axis {
    pub const X: usize = 0;
    pub const Y: usize = 1;
    pub const Z: usize = 2;
    pub const W1: usize = 3;
    pub const W2: usize = 4;
    pub const W3: usize = 5;
    pub const W4: usize = 6;
    pub const V: usize = 7;
}
use axis::*;

pub(crate) const DECODER_ARGS: [&[usize]; 4] = [
    &[Y, W1],
    &[Z, W1, W2, V],
    &[Y, W1, W3, V],
    &[Z, W1, W2, W3, W4, V],
];

/// Tolerance on `I(X;Y|Z)` for accepting a source as degraded.
pub const DEGRADED_TOL: f64 = 1e-6;

/// Alphabet sizes of `(W1, W2, W3, W4, V)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NcSizes {
    pub w1: usize,
    pub w2: usize,
    pub w3: usize,
    pub w4: usize,
    pub v: usize,
}

/// Which bound's cardinality limits apply.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CapSet {
    Outer,
    Inner,
}

impl NcSizes {
    /// Binary auxiliaries, with `|W1| >= |X|` so that `W1 = X` is available.
    pub fn default_for(nx: usize) -> Self {
        Self {
            w1: nx.max(2),
            w2: 2,
            w3: 2,
            w4: 2,
            v: 2,
        }
    }

    pub fn as_array(&self) -> [usize; 5] {
        [self.w1, self.w2, self.w3, self.w4, self.v]
    }

    /// Check the cardinality limits of the chosen bound.
    pub fn check_caps(&self, nx: usize, caps: CapSet) -> Result<()> {
        let extra = match caps {
            CapSet::Outer => 0,
            CapSet::Inner => 1,
        };
        let limits = [
            (self.w1, nx + 5 + extra),
            (self.v, nx * self.w1 + 4 + extra),
            (self.w2, nx * self.w1 * self.v + 3 + extra),
            (self.w3, nx * self.w1 * self.w2 * self.v + 2 + extra),
            (self.w4, nx * self.w1 * self.w2 * self.w3 * self.v + 1 + extra),
        ];
        if self.as_array().contains(&0) {
            return Err(Error::InvalidArgument("auxiliary alphabets must be non-empty".into()));
        }
        for (got, cap) in limits {
            if got > cap {
                return Err(Error::InvalidArgument(format!(
                    "auxiliary sizes {self:?} exceed the cardinality limits for |X| = {nx}"
                )));
            }
        }
        Ok(())
    }
}

const LABELS: [&str; 5] = ["W1", "W2", "W3", "W4", "V"];

#[derive(Deserialize)]
struct RawNcAux {
    sizes: NcSizes,
    cond: CondPmf,
}

/// `P(W1, W2, W3, W4, V | X)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNcAux")]
pub struct NcAuxChannel {
    sizes: NcSizes,
    cond: CondPmf,
}

impl TryFrom<RawNcAux> for NcAuxChannel {
    type Error = Error;
    fn try_from(r: RawNcAux) -> Result<Self> {
        let a = Self::new(r.cond)?;
        if a.sizes != r.sizes {
            return Err(Error::AlphabetMismatch("sizes disagree with the conditional table".into()));
        }
        Ok(a)
    }
}

impl NcAuxChannel {
    /// `cond` must map `X` to `(W1, W2, W3, W4, V)`. Sizes are checked
    /// against the (looser) inner-bound limits.
    pub fn new(cond: CondPmf) -> Result<Self> {
        if cond.from_axes().len() != 1 || cond.to_axes().len() != 5 {
            return Err(Error::AlphabetMismatch(
                "non-causal auxiliary channel must map X to (W1, W2, W3, W4, V)".into(),
            ));
        }
        let nx = cond.from_axes()[0].size();
        let s: Vec<usize> = cond.to_axes().iter().map(Alphabet::size).collect();
        let sizes = NcSizes {
            w1: s[0],
            w2: s[1],
            w3: s[2],
            w4: s[3],
            v: s[4],
        };
        sizes.check_caps(nx, CapSet::Inner)?;
        let from = vec![Alphabet::new("X", nx)?];
        let to = LABELS
            .iter()
            .zip(&s)
            .map(|(l, &n)| Alphabet::new(*l, n))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            sizes,
            cond: CondPmf::new(from, to, cond.mass().to_vec())?,
        })
    }

    pub fn from_factored(aux: &FactoredAux) -> Result<Self> {
        Self::new(aux.to_cond())
    }

    /// `W1, W2, W3, W4, V` conditionally independent given `X`; `tables[k]`
    /// is row-major `P(var_k | X)` in `(W1, W2, W3, W4, V)` order.
    pub fn independent_given_x(nx: usize, sizes: NcSizes, tables: [&[f64]; 5]) -> Result<Self> {
        let s = sizes.as_array();
        for (t, &n) in tables.iter().zip(&s) {
            if t.len() != nx * n {
                return Err(Error::ShapeMismatch {
                    expected: nx * n,
                    got: t.len(),
                });
            }
        }
        let cols: usize = s.iter().product();
        let mut mass = Vec::with_capacity(nx * cols);
        for x in 0..nx {
            for c in 0..cols {
                let mut rest = c;
                let mut p = 1.0;
                for k in (0..5).rev() {
                    p *= tables[k][x * s[k] + rest % s[k]];
                    rest /= s[k];
                }
                mass.push(p);
            }
        }
        let from = vec![Alphabet::new("X", nx)?];
        let to = LABELS
            .iter()
            .zip(&s)
            .map(|(l, &n)| Alphabet::new(*l, n))
            .collect::<Result<Vec<_>>>()?;
        Self::new(CondPmf::new(from, to, mass)?)
    }

    pub fn sizes(&self) -> NcSizes {
        self.sizes
    }

    pub fn x_size(&self) -> usize {
        self.cond.from_axes()[0].size()
    }

    pub fn cond(&self) -> &CondPmf {
        &self.cond
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NcDecoderRuleSet {
    pub g_y1: DecoderTable,
    pub g_z1: DecoderTable,
    pub g_y2: DecoderTable,
    pub g_z2: DecoderTable,
}

impl NcDecoderRuleSet {
    pub fn tables(&self) -> [&DecoderTable; 4] {
        [&self.g_y1, &self.g_z1, &self.g_y2, &self.g_z2]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Inner,
    Outer,
    SrCase,
    LosslessCase,
}

impl BoundKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundKind::Inner => "inner",
            BoundKind::Outer => "outer",
            BoundKind::SrCase => "sr_case",
            BoundKind::LosslessCase => "lossless_case",
        }
    }
}

/// One evaluated bound point. `r2` is cumulative over both stages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NcRegionPoint {
    pub r1: f64,
    pub r2: f64,
    pub achieved: DistortionQuad,
    pub kind: BoundKind,
    pub aux: NcAuxChannel,
    pub decoders: NcDecoderRuleSet,
}

/// `P(X, Y, Z, W1, W2, W3, W4, V)`.
pub fn nc_joint(source: &SourceSpec, aux: &NcAuxChannel) -> Result<JointPmf> {
    if aux.x_size() != source.x_size() {
        return Err(Error::AlphabetMismatch(format!(
            "auxiliary channel expects |X| = {}, source has {}",
            aux.x_size(),
            source.x_size()
        )));
    }
    compose(source.pxyz(), &aux.cond)
}

fn i(j: &JointPmf, a: &[usize], b: &[usize], c: &[usize]) -> f64 {
    cmi_axes(j, a, b, c)
}

fn outer_on(j: &JointPmf) -> (f64, f64) {
    let r1 = i(j, &[X], &[W1], &[Y]) + i(j, &[X], &[W2, V], &[W1, Z]);
    let r2 = i(j, &[X], &[W1, W3, V], &[Y]) + i(j, &[X], &[W2, W4], &[W1, W3, V, Z]);
    (r1, r2)
}

fn inner_on(j: &JointPmf) -> (f64, f64) {
    let r1 = i(j, &[X], &[W1], &[Y]) + i(j, &[X], &[W2, V], &[W1, Z]);
    let r2 = i(j, &[X], &[W1, V, W3], &[Y])
        + i(j, &[X], &[W2], &[W1, V, Z])
        + i(j, &[X], &[W4], &[W1, W2, W3, V, Z]);
    (r1, r2)
}

/// `I(W2; W3 | X, W1, V)`, zero for channels in the inner-bound family.
pub fn extra_markov_residual(joint: &JointPmf) -> f64 {
    i(joint, &[W2], &[W3], &[X, W1, V])
}

/// Outer-bound rate expressions `(r1, r2)`.
pub fn outer_rates(source: &SourceSpec, aux: &NcAuxChannel) -> Result<(f64, f64)> {
    source.require_degraded(DEGRADED_TOL)?;
    aux.sizes.check_caps(source.x_size(), CapSet::Outer)?;
    Ok(outer_on(&nc_joint(source, aux)?))
}

/// Inner-bound rate expressions `(r1, r2)`; fails when
/// `I(W2;W3|X,W1,V) > tol`.
pub fn inner_rates(source: &SourceSpec, aux: &NcAuxChannel, tol: f64) -> Result<(f64, f64)> {
    source.require_degraded(DEGRADED_TOL)?;
    let j = nc_joint(source, aux)?;
    let residual = extra_markov_residual(&j);
    if residual > tol {
        return Err(Error::ExtraMarkovViolated { residual });
    }
    Ok(inner_on(&j))
}

/// Expected distortions under fixed decoders.
pub fn inner_distortions(source: &SourceSpec, aux: &NcAuxChannel, dec: &NcDecoderRuleSet) -> Result<DistortionQuad> {
    let j = nc_joint(source, aux)?;
    let mut d = [0.0; 4];
    for (k, (args, t)) in DECODER_ARGS.iter().zip(dec.tables()).enumerate() {
        d[k] = table_distortion(&j, X, args, &source.distortions()[k], t)?;
    }
    Ok(DistortionQuad::from_array(d))
}

fn synthesize_all(source: &SourceSpec, j: &JointPmf) -> Result<(NcDecoderRuleSet, DistortionQuad)> {
    let mut tables = Vec::with_capacity(4);
    let mut d = [0.0; 4];
    for (k, args) in DECODER_ARGS.iter().enumerate() {
        let (t, v) = synthesize(j, X, args, &source.distortions()[k])?;
        tables.push(t);
        d[k] = v;
    }
    let mut it = tables.into_iter();
    Ok((
        NcDecoderRuleSet {
            g_y1: it.next().expect("4"),
            g_z1: it.next().expect("4"),
            g_y2: it.next().expect("4"),
            g_z2: it.next().expect("4"),
        },
        DistortionQuad::from_array(d),
    ))
}

/// Bayes-optimal decoders for the four non-causal signatures.
pub fn nc_optimal_decoders(source: &SourceSpec, aux: &NcAuxChannel) -> Result<NcDecoderRuleSet> {
    Ok(synthesize_all(source, &nc_joint(source, aux)?)?.0)
}

/// Evaluate `aux` under optimal decoders with the rates of `kind`
/// (`SrCase` and `LosslessCase` use the inner expressions, which reduce to
/// the special-case formulas on their families).
pub fn evaluate_nc(source: &SourceSpec, aux: &NcAuxChannel, kind: BoundKind) -> Result<NcRegionPoint> {
    source.require_degraded(DEGRADED_TOL)?;
    let j = nc_joint(source, aux)?;
    let (r1, r2) = match kind {
        BoundKind::Outer => outer_on(&j),
        _ => inner_on(&j),
    };
    let (decoders, achieved) = synthesize_all(source, &j)?;
    Ok(NcRegionPoint {
        r1,
        r2,
        achieved,
        kind,
        aux: aux.clone(),
        decoders,
    })
}

fn labels() -> Vec<String> {
    LABELS.iter().map(|s| s.to_string()).collect()
}

const IW1: usize = 0;
const IW2: usize = 1;
const IW3: usize = 2;
const IW4: usize = 3;
const IV: usize = 4;

/// Inner-bound family: `W3` is generated without `W2` as a parent, so
/// `W2 - (X, W1, V) - W3` holds by construction.
pub fn inner_family(nx: usize, s: NcSizes) -> Result<FactoredAux> {
    let sizes = s.as_array().to_vec();
    FactoredAux::new(
        nx,
        labels(),
        sizes.clone(),
        vec![
            free_uniform(nx, &sizes, IW1, vec![Parent::X]),
            free_uniform(nx, &sizes, IV, vec![Parent::X, Parent::Var(IW1)]),
            free_uniform(nx, &sizes, IW2, vec![Parent::X, Parent::Var(IW1), Parent::Var(IV)]),
            free_uniform(nx, &sizes, IW3, vec![Parent::X, Parent::Var(IW1), Parent::Var(IV)]),
            free_uniform(
                nx,
                &sizes,
                IW4,
                vec![Parent::X, Parent::Var(IW1), Parent::Var(IV), Parent::Var(IW2), Parent::Var(IW3)],
            ),
        ],
    )
}

/// Unrestricted family for the outer bound.
pub fn outer_family(nx: usize, s: NcSizes) -> Result<FactoredAux> {
    let sizes = s.as_array().to_vec();
    FactoredAux::new(
        nx,
        labels(),
        sizes.clone(),
        vec![
            free_uniform(nx, &sizes, IW1, vec![Parent::X]),
            free_uniform(nx, &sizes, IV, vec![Parent::X, Parent::Var(IW1)]),
            free_uniform(nx, &sizes, IW2, vec![Parent::X, Parent::Var(IW1), Parent::Var(IV)]),
            free_uniform(
                nx,
                &sizes,
                IW3,
                vec![Parent::X, Parent::Var(IW1), Parent::Var(IV), Parent::Var(IW2)],
            ),
            free_uniform(
                nx,
                &sizes,
                IW4,
                vec![Parent::X, Parent::Var(IW1), Parent::Var(IV), Parent::Var(IW2), Parent::Var(IW3)],
            ),
        ],
    )
}

/// Sub-case of the refinement special case.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SrCase {
    /// `Δz1 >= Δy1`: `W2 = V = const`.
    StrongFirstStage,
    /// `Δy2 = Δy1`: `W3 = V = const`.
    WeakNoRefinement,
}

/// Pick the sub-case; `Δz1 >= Δy1` is tested first, so ties go there.
pub fn detect_sr_case(target: &DistortionQuad) -> Result<SrCase> {
    if target.dz1 >= target.dy1 {
        Ok(SrCase::StrongFirstStage)
    } else if target.dy2 == target.dy1 {
        Ok(SrCase::WeakNoRefinement)
    } else {
        Err(Error::NoRefinementCase(Box::new(*target)))
    }
}

pub fn sr_family(nx: usize, s: NcSizes, case: SrCase) -> Result<FactoredAux> {
    let mut sizes = s.as_array().to_vec();
    let factors = match case {
        SrCase::StrongFirstStage => {
            sizes[IW2] = 1;
            sizes[IV] = 1;
            vec![
                free_uniform(nx, &sizes, IW1, vec![Parent::X]),
                fixed(IW2, FactorKind::Const),
                fixed(IV, FactorKind::Const),
                free_uniform(nx, &sizes, IW3, vec![Parent::X, Parent::Var(IW1)]),
                free_uniform(nx, &sizes, IW4, vec![Parent::X, Parent::Var(IW1), Parent::Var(IW3)]),
            ]
        }
        SrCase::WeakNoRefinement => {
            sizes[IW3] = 1;
            sizes[IV] = 1;
            vec![
                free_uniform(nx, &sizes, IW1, vec![Parent::X]),
                free_uniform(nx, &sizes, IW2, vec![Parent::X, Parent::Var(IW1)]),
                fixed(IW3, FactorKind::Const),
                fixed(IV, FactorKind::Const),
                free_uniform(nx, &sizes, IW4, vec![Parent::X, Parent::Var(IW1), Parent::Var(IW2)]),
            ]
        }
    };
    FactoredAux::new(nx, labels(), sizes, factors)
}

/// Rates of the refinement special case computed from its own formulas.
pub fn sr_rates(joint: &JointPmf, case: SrCase) -> (f64, f64) {
    match case {
        SrCase::StrongFirstStage => (
            i(joint, &[X], &[W1], &[Y]),
            i(joint, &[X], &[W1, W3], &[Y]) + i(joint, &[X], &[W4], &[W1, W3, Z]),
        ),
        SrCase::WeakNoRefinement => {
            let base = i(joint, &[X], &[W1], &[Y]);
            (
                base + i(joint, &[X], &[W2], &[W1, Z]),
                base + i(joint, &[X], &[W2, W4], &[W1, Z]),
            )
        }
    }
}

/// Which decoder is lossless in the lossless special case.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LosslessDecoder {
    /// `Δz1 = 0`.
    Z1,
    /// `Δy2 = 0`.
    Y2,
}

impl std::str::FromStr for LosslessDecoder {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "z1" | "z1_lossless" | "lossless-z1" => Ok(Self::Z1),
            "y2" | "y2_lossless" | "lossless-y2" => Ok(Self::Y2),
            other => Err(Error::InvalidArgument(format!("unknown lossless decoder `{other}`"))),
        }
    }
}

/// Lossless-case family. `z1`: `W2 = X`, `V = W3`, `W4 = const` with
/// `W1`, `W3` free. `y2`: `V = W2`, `W3 = X`, `W4 = const` with `W1`, `W2` free.
pub fn lossless_family(nx: usize, s: NcSizes, which: LosslessDecoder) -> Result<FactoredAux> {
    let mut sizes = s.as_array().to_vec();
    sizes[IW4] = 1;
    let factors = match which {
        LosslessDecoder::Z1 => {
            sizes[IW2] = nx;
            sizes[IV] = sizes[IW3];
            vec![
                free_uniform(nx, &sizes, IW1, vec![Parent::X]),
                free_uniform(nx, &sizes, IW3, vec![Parent::X, Parent::Var(IW1)]),
                fixed(IW2, FactorKind::CopyX),
                fixed(IV, FactorKind::CopyOf(IW3)),
                fixed(IW4, FactorKind::Const),
            ]
        }
        LosslessDecoder::Y2 => {
            sizes[IW3] = nx;
            sizes[IV] = sizes[IW2];
            vec![
                free_uniform(nx, &sizes, IW1, vec![Parent::X]),
                free_uniform(nx, &sizes, IW2, vec![Parent::X, Parent::Var(IW1)]),
                fixed(IV, FactorKind::CopyOf(IW2)),
                fixed(IW3, FactorKind::CopyX),
                fixed(IW4, FactorKind::Const),
            ]
        }
    };
    FactoredAux::new(nx, labels(), sizes, factors)
}

/// Rates of the lossless special case from its own formulas.
pub fn lossless_rates(joint: &JointPmf, which: LosslessDecoder) -> (f64, f64) {
    match which {
        LosslessDecoder::Z1 => (
            i(joint, &[X], &[W1], &[Y]) + cond_entropy_axes(joint, &[X], &[W1, Z]),
            i(joint, &[X], &[W1, W3], &[Y]) + cond_entropy_axes(joint, &[X], &[W1, W3, Z]),
        ),
        LosslessDecoder::Y2 => (
            i(joint, &[X], &[W1], &[Y]) + i(joint, &[X], &[W2], &[W1, Z]),
            cond_entropy_axes(joint, &[X], &[Y]),
        ),
    }
}

/// How rates are computed for a searched family.
#[derive(Clone, Copy, Debug)]
enum RateRule {
    Inner,
    Outer,
    Sr(SrCase),
    Lossless(LosslessDecoder),
}

impl RateRule {
    fn rates(&self, j: &JointPmf) -> (f64, f64) {
        match self {
            RateRule::Inner => inner_on(j),
            RateRule::Outer => outer_on(j),
            RateRule::Sr(c) => sr_rates(j, *c),
            RateRule::Lossless(w) => lossless_rates(j, *w),
        }
    }

    fn kind(&self) -> BoundKind {
        match self {
            RateRule::Inner => BoundKind::Inner,
            RateRule::Outer => BoundKind::Outer,
            RateRule::Sr(_) => BoundKind::SrCase,
            RateRule::Lossless(_) => BoundKind::LosslessCase,
        }
    }
}

fn quick_eval(source: &SourceSpec, aux: &FactoredAux, rule: RateRule) -> Evaluation {
    let j = compose(source.pxyz(), &aux.to_cond()).expect("family matches source");
    let (r1, r2) = rule.rates(&j);
    let mut d = [0.0; 4];
    for (k, args) in DECODER_ARGS.iter().enumerate() {
        d[k] = synthesize(&j, X, args, &source.distortions()[k]).expect("axes valid").1;
    }
    Evaluation {
        rates: [r1, r2],
        achieved: DistortionQuad::from_array(d),
    }
}

fn point(source: &SourceSpec, aux: &FactoredAux, rule: RateRule) -> Result<NcRegionPoint> {
    let a = NcAuxChannel::from_factored(aux)?;
    let j = nc_joint(source, &a)?;
    let (r1, r2) = rule.rates(&j);
    let (decoders, achieved) = synthesize_all(source, &j)?;
    Ok(NcRegionPoint {
        r1,
        r2,
        achieved,
        kind: rule.kind(),
        aux: a,
        decoders,
    })
}

/// The family with every free factor constant.
fn constant_of(family: &FactoredAux) -> FactoredAux {
    let mut out = family.clone();
    for i in family.free_factors() {
        let s = family.var_size(i);
        let t = out.table_mut(i).expect("free");
        for row in t.chunks_mut(s) {
            row.iter_mut().for_each(|v| *v = 0.0);
            row[0] = 1.0;
        }
    }
    out
}

/// Search each `(family, rule, stream tag)` and merge the candidates, scored
/// by `final_rule`, into one frontier.
fn frontier(
    source: &SourceSpec,
    target: &DistortionQuad,
    searches: Vec<(FactoredAux, RateRule, u64)>,
    final_rule: RateRule,
    cfg: &SearchConfig,
) -> Result<Vec<NcRegionPoint>> {
    source.require_degraded(DEGRADED_TOL)?;
    if !target.is_valid() {
        return Err(Error::InvalidArgument("distortion target must be >= 0".into()));
    }
    let best = best_distortions(source)?;
    if !best.le(target, cfg.dist_tol) {
        return Err(Error::InfeasibleTarget {
            target: Box::new(*target),
            best: Box::new(best),
        });
    }
    let mut found: Vec<FactoredAux> = Vec::new();
    for (family, rule, tag) in &searches {
        let eval = |a: &FactoredAux| quick_eval(source, a, *rule);
        found.extend(
            [constant_of(family), family.anchor()]
                .into_iter()
                .filter(|a| eval(a).achieved.le(target, cfg.dist_tol)),
        );
        found.extend(weighted_runs(family, target, &eval, cfg, *tag).into_iter().map(|f| f.aux));
    }
    if found.is_empty() {
        // the anchor of a restricted family may miss a reachable target
        return Err(Error::InfeasibleTarget {
            target: Box::new(*target),
            best: Box::new(quick_eval(source, &searches[0].0.anchor(), final_rule).achieved),
        });
    }
    let scored: Vec<(FactoredAux, Evaluation)> = found
        .into_iter()
        .map(|a| {
            let e = quick_eval(source, &a, final_rule);
            (a, e)
        })
        .collect();
    let front = pareto(scored, |(_, e)| e.rates, cfg.rate_tol);
    front.iter().map(|(a, _)| point(source, a, final_rule)).collect()
}

const INNER_TAG: u64 = 11;

/// Frontier of the inner bound over the inner-bound family.
pub fn inner_frontier(source: &SourceSpec, target: &DistortionQuad, sizes: NcSizes, cfg: &SearchConfig) -> Result<Vec<NcRegionPoint>> {
    sizes.check_caps(source.x_size(), CapSet::Inner)?;
    let fam = inner_family(source.x_size(), sizes)?;
    frontier(source, target, vec![(fam, RateRule::Inner, INNER_TAG)], RateRule::Inner, cfg)
}

/// Frontier of the outer-bound expressions over unrestricted channels.
///
/// The inner-bound search (same seed streams as [`inner_frontier`]) is
/// rerun and its channels re-scored with the outer expressions, so with
/// equal inputs every inner frontier point is matched or beaten.
pub fn outer_frontier(source: &SourceSpec, target: &DistortionQuad, sizes: NcSizes, cfg: &SearchConfig) -> Result<Vec<NcRegionPoint>> {
    sizes.check_caps(source.x_size(), CapSet::Outer)?;
    let nx = source.x_size();
    let searches = vec![
        (outer_family(nx, sizes)?, RateRule::Outer, 12),
        (inner_family(nx, sizes)?, RateRule::Inner, INNER_TAG),
    ];
    frontier(source, target, searches, RateRule::Outer, cfg)
}

/// Refinement special case: the sub-case is read off the target.
pub fn sr_special_case(
    source: &SourceSpec,
    target: &DistortionQuad,
    sizes: NcSizes,
    cfg: &SearchConfig,
) -> Result<(SrCase, Vec<NcRegionPoint>)> {
    let case = detect_sr_case(target)?;
    let fam = sr_family(source.x_size(), sizes, case)?;
    Ok((case, frontier(source, target, vec![(fam, RateRule::Sr(case), 13)], RateRule::Sr(case), cfg)?))
}

/// Lossless special case. The lossless decoder's target is forced to 0.
pub fn lossless_special_case(
    source: &SourceSpec,
    which: LosslessDecoder,
    target: &DistortionQuad,
    sizes: NcSizes,
    cfg: &SearchConfig,
) -> Result<Vec<NcRegionPoint>> {
    let (k, name) = match which {
        LosslessDecoder::Z1 => (1, "z1"),
        LosslessDecoder::Y2 => (2, "y2"),
    };
    if !source.distortions()[k].admits_lossless() {
        return Err(Error::NotLosslessCompatible { decoder: name.into() });
    }
    let mut t = target.as_array();
    t[k] = 0.0;
    let fam = lossless_family(source.x_size(), sizes, which)?;
    let rule = RateRule::Lossless(which);
    frontier(source, &DistortionQuad::from_array(t), vec![(fam, rule, 14)], rule, cfg)
}

/// Comparison of inner and outer expressions on shared channels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub samples: usize,
    /// Samples where the two `r1` expressions differ by more than 1e-9.
    pub r1_mismatches: usize,
    /// Samples where `r2(inner) < r2(outer) − 1e-9`.
    pub r2_violations: usize,
    pub max_r1_diff: f64,
    /// Largest `r2(outer) − r2(inner)` seen (non-positive when consistent).
    pub max_r2_excess: f64,
    pub violating_samples: Vec<usize>,
    pub max_markov_residual: f64,
}

/// Sample inner-family channels and compare inner and outer points on each.
pub fn verify_inner_subset_outer(source: &SourceSpec, samples: usize, seed: u64) -> Result<ConsistencyReport> {
    source.require_degraded(DEGRADED_TOL)?;
    let nx = source.x_size();
    let fam = inner_family(nx, NcSizes::default_for(nx))?;
    let rows: Vec<Result<(f64, f64, f64)>> = (0..samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = derived_rng(seed, &[21, k as u64]);
            let mut aux = fam.randomized(&mut rng);
            // sparsify some rows so deterministic corners are covered too
            for f in aux.free_factors() {
                let s = aux.var_size(f);
                let t = aux.table_mut(f).expect("free");
                for row in t.chunks_mut(s) {
                    if rng.random::<f64>() < 0.25 {
                        let v = rng.random_range(0..s);
                        row.iter_mut().for_each(|q| *q = 0.0);
                        row[v] = 1.0;
                    }
                }
            }
            let a = NcAuxChannel::from_factored(&aux)?;
            let j = nc_joint(source, &a)?;
            let res = extra_markov_residual(&j);
            let (ri1, ri2) = inner_on(&j);
            let (ro1, ro2) = outer_on(&j);
            Ok(((ri1 - ro1).abs(), ro2 - ri2, res))
        })
        .collect();
    let mut rep = ConsistencyReport {
        samples,
        r1_mismatches: 0,
        r2_violations: 0,
        max_r1_diff: 0.0,
        max_r2_excess: f64::NEG_INFINITY,
        violating_samples: Vec::new(),
        max_markov_residual: 0.0,
    };
    for (k, r) in rows.into_iter().enumerate() {
        let (d1, excess, res) = r?;
        if d1 > 1e-9 {
            rep.r1_mismatches += 1;
        }
        if excess > 1e-9 {
            rep.r2_violations += 1;
            rep.violating_samples.push(k);
        }
        rep.max_r1_diff = rep.max_r1_diff.max(d1);
        rep.max_r2_excess = rep.max_r2_excess.max(excess);
        rep.max_markov_residual = rep.max_markov_residual.max(res);
    }
    if samples == 0 {
        rep.max_r2_excess = 0.0;
    }
    Ok(rep)
}
